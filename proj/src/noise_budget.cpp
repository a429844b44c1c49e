#include "levsense/noise_budget.hpp"

#include <cmath>
#include <limits>

#include "levsense/flux_geometry.hpp"

namespace levsense::budget {

double imprecision_quantum(double kappa, double nr, double G, double omega) {
    if (!(nr > 0.0 && G > 0.0 && kappa > 0.0))
        throw DomainError("imprecision needs positive kappa, nr and G");
    const double r = omega / kappa;
    return kappa / (16.0 * nr * G * G) * (1.0 + 4.0 * r * r);
}

double detection_efficiency(double s_imp_quantum, double s_imp_detected) {
    if (!(s_imp_quantum > 0.0)) throw DomainError("quantum imprecision must be positive");
    if (s_imp_detected < s_imp_quantum)
        throw UnphysicalInputError("detected imprecision below the quantum limit");
    return s_imp_quantum / s_imp_detected;
}

double cooperativity(double nr, double g0, double kappa, double gamma_m, double nth) {
    if (!(kappa > 0.0 && gamma_m > 0.0 && nth > 0.0))
        throw DomainError("cooperativity needs positive kappa, Gamma_m and nth");
    return 4.0 * nr * g0 * g0 / (kappa * gamma_m * nth);
}

double measurement_efficiency(double cq) {
    if (!(cq > 0.0)) throw DomainError("cooperativity must be positive");
    return cq / (1.0 + cq);
}

double total_efficiency(double eta_d, double eta_e) {
    if (!(eta_d >= 0.0 && eta_d <= 1.0 && eta_e >= 0.0 && eta_e <= 1.0))
        throw DomainError("efficiencies must lie in [0, 1]");
    return eta_d * eta_e;
}

double min_phonons(double eta) {
    if (eta == 0.0) throw DivergenceError("zero efficiency: no cooling limit");
    if (!(eta > 0.0 && eta <= 1.0)) throw DomainError("efficiency must lie in (0, 1]");
    return 0.5 * (1.0 / std::sqrt(eta) - 1.0);
}

double ground_state_density(double xzpf, double gamma_m, double nth) {
    if (!(xzpf > 0.0 && gamma_m > 0.0 && nth > 0.0))
        throw DomainError("ground-state density needs positive inputs");
    return 4.0 * xzpf * xzpf / (gamma_m * nth);
}

std::complex<double> susceptibility(double omega, double mass, double omega_m, double gamma) {
    if (!(mass > 0.0)) throw DomainError("mass must be positive");
    return 1.0 / (mass * std::complex<double>(omega_m * omega_m - omega * omega, -gamma * omega));
}

double back_action_force(double G, double nr, double kappa) {
    if (!(kappa > 0.0)) throw DomainError("kappa must be positive");
    return 4.0 * phys::hbar * phys::hbar * G * G * nr / kappa;
}

BackAction back_action_densities(const BackActionInputs& in) {
    if (!(in.mass > 0.0 && in.omega_m > 0.0 && in.gamma_m > 0.0 && in.gamma_eff > 0.0))
        throw DomainError("back-action needs positive mass, frequency and linewidths");
    BackAction b;
    b.force_psd = back_action_force(hz_to_rad(in.G_over_2pi), in.nr, in.kappa);
    b.thermal = b.force_psd * std::norm(susceptibility(in.omega_m, in.mass, in.omega_m, in.gamma_m));
    b.ground = b.force_psd * std::norm(susceptibility(in.omega_m, in.mass, in.omega_m, in.gamma_eff));
    return b;
}

double friis(const std::vector<AmplifierStage>& stages) {
    if (stages.empty()) throw ArgumentError("amplifier chain is empty");
    double total = 0.0;
    double gain = 1.0;
    for (const AmplifierStage& s : stages) {
        if (!(s.noise_temperature >= 0.0) || !std::isfinite(s.gain_db))
            throw DomainError("stage needs T >= 0 and a finite gain");
        total += s.noise_temperature / gain;
        gain *= db_to_linear(s.gain_db);
    }
    return total;
}

double added_photons(double temperature, double omega) {
    if (!(temperature >= 0.0 && omega > 0.0)) throw DomainError("need T >= 0 and omega > 0");
    return phys::kB * temperature / (phys::hbar * omega);
}

double cryo_chain(double n_hemt, double transmissivity) {
    if (transmissivity == 0.0) throw DivergenceError("zero transmissivity");
    if (!(transmissivity > 0.0 && transmissivity <= 1.0))
        throw DomainError("transmissivity must lie in (0, 1]");
    return n_hemt / transmissivity + (1.0 - transmissivity) / (2.0 * transmissivity);
}

double invert_loss(double n_hemt, double n_add) {
    if (n_add < n_hemt) throw UnphysicalInputError("added noise below the amplifier's own");
    return (n_hemt + 0.5) / (n_add + 0.5);
}

double cavity_efficiency(double kappa_int, double kappa_ext) {
    if (!(kappa_int + kappa_ext > 0.0) || kappa_int < 0.0 || kappa_ext < 0.0)
        throw DomainError("linewidths must be non-negative with a positive sum");
    return kappa_ext / (kappa_int + kappa_ext);
}

namespace {

void check_fraction(double v, const char* what) {
    if (!(v > 0.0 && v <= 1.0))
        throw UnphysicalInputError(std::string(what) + " must lie in (0, 1]");
}

}  // namespace

EfficiencyBudget budget_assemble(double eta_cav, double eta_cryo, double eta_warm) {
    check_fraction(eta_cav, "eta_cav");
    check_fraction(eta_cryo, "eta_cryo");
    check_fraction(eta_warm, "eta_warm");
    EfficiencyBudget b;
    b.eta_cav = eta_cav;
    b.eta_cryo = eta_cryo;
    b.eta_warm = eta_warm;
    b.eta_d = eta_cav * eta_cryo * eta_warm;
    b.eta = b.eta_d * b.eta_e;
    b.n_add_cryo = 0.5 * (1.0 / eta_cryo - 1.0);
    return b;
}

double solve_missing_factor(double eta_d, double known_a, double known_b) {
    check_fraction(eta_d, "eta_d");
    check_fraction(known_a, "known factor");
    check_fraction(known_b, "known factor");
    double x = eta_d / (known_a * known_b);
    if (x > 1.0) throw UnphysicalInputError("implied factor exceeds one");
    return x;
}

EfficiencyBudget with_cooperativity(EfficiencyBudget b, double cq) {
    b.eta_e = measurement_efficiency(cq);
    b.eta = total_efficiency(b.eta_d, b.eta_e);
    return b;
}

EfficiencyBudget with_hemt(EfficiencyBudget b, double n_hemt) {
    b.n_hemt = n_hemt;
    b.transmissivity = invert_loss(n_hemt, b.n_add_cryo);
    return b;
}

DesignCooperativity design_cooperativity(const mech::TrapConfig& trap,
                                         const mech::SphereParams& sphere, double nr,
                                         double kappa, double slope, double alpha,
                                         double geometric_factor, mech::Axis axis) {
    if (!(nr > 0.0 && kappa > 0.0 && slope > 0.0 && alpha > 0.0 && geometric_factor > 0.0))
        throw DomainError("design cooperativity needs positive inputs");
    trap.validate();
    const int i = mech::index(axis);
    const double b = std::abs(trap.gradient_per_ampere[i]) * trap.current;
    const double rho = sphere.density();
    const double rp = sphere.radius();

    const double slope_wb = slope / phys::flux_quantum;
    const double k = phys::two_pi * phys::hbar * slope_wb * alpha * geometric_factor;
    DesignCooperativity out;
    out.closed_form = std::sqrt(3.0 * phys::mu0 / (2.0 * rho)) * b * nr * trap.quality * rp /
                      (phys::kB * trap.bath_temperature * kappa) * k * k;

    const mech::MechMode m = mech::mode_from_config(trap, sphere, axis);
    const double g0 = hz_to_rad(flux::assemble_g0(slope, alpha, geometric_factor, b, rp, m.xzpf));
    out.assembled = cooperativity(nr, g0, kappa, m.linewidth, m.nth);
    return out;
}

Projection project(const ProjectionLedger& ledger) {
    if (!(ledger.base_cq > 0.0)) throw DomainError("base cooperativity must be positive");
    Projection p;
    double c = ledger.base_cq;
    for (const LedgerFactor& f : ledger.factors) {
        if (!(f.multiplier > 0.0)) throw DomainError("ledger multiplier '" + f.name + "' must be positive");
        c *= f.multiplier;
        p.rows.push_back({f.name, f.multiplier, c});
    }
    if (!std::isfinite(c)) throw DomainError("projected cooperativity is not finite");
    p.final_cq = c;
    return p;
}

ProjectionLedger default_ledger() {
    ProjectionLedger l;
    l.base_cq = 5e-17;
    l.factors = {
        {"readout", 200.0, "nr raised to 10 photons, imprecision linear in power"},
        {"positioning", 4e10, "pickup placement, coupling x2e5 squared"},
        {"transformer", 2.5e3, "on-chip transformer, 10 nH parasitics, 50% input coupling"},
        {"slope", 10.0, "flux responsivity 1.7 -> 5 GHz/Phi0"},
        {"linewidth", 300.0, "kappa/2pi 30 MHz -> 100 kHz"},
        {"current-switch", 19.0, "persistent current switch, higher trap current"},
    };
    return l;
}

Uncertain propagate(const std::function<double(const Eigen::VectorXd&)>& f,
                    const Eigen::VectorXd& x, const Eigen::MatrixXd& cov) {
    if (cov.rows() != x.size() || cov.cols() != x.size())
        throw ArgumentError("covariance shape does not match the parameter vector");
    Eigen::VectorXd grad(x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        double h = std::cbrt(std::numeric_limits<double>::epsilon()) * std::max(std::abs(x[k]), 1e-300);
        Eigen::VectorXd xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        grad[k] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return {f(x), std::sqrt(std::max(0.0, grad.dot(cov * grad)))};
}

Uncertain propagate(const std::function<double(const Eigen::VectorXd&)>& f,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& sigma) {
    return propagate(f, x, Eigen::MatrixXd(sigma.array().square().matrix().asDiagonal()));
}

}  // namespace levsense::budget
