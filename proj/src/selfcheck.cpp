#include "levsense/selfcheck.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "levsense/cavity_squid.hpp"
#include "levsense/flux_geometry.hpp"
#include "levsense/mech_trap.hpp"
#include "levsense/noise_budget.hpp"
#include "levsense/spectral.hpp"

namespace levsense::selfcheck {

namespace {

bool near(double v, double ref, double rel) { return std::abs(v / ref - 1.0) <= rel; }

std::string num(double v, int prec = 4) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    return buf;
}

const mech::SphereParams& sphere() {
    static const mech::SphereParams s(50e-6);
    return s;
}

CheckResult trap_law() {
    const double expect[3] = {39.0, 40.0, 80.0};
    const mech::TrapConfig trap;
    bool ok = true;
    std::string d = "Hz/A:";
    for (int i = 0; i < 3; ++i) {
        double f = rad_to_hz(mech::trap_frequency(trap.gradient_per_ampere[i], sphere().density()));
        ok &= near(f, expect[i], 0.02);
        d += " " + num(f);
    }
    return {"1", "trap frequency per ampere", ok, d + " vs (39, 40, 80) at 2%"};
}

CheckResult coupling_arithmetic() {
    auto c = spectral::extract_coupling(0.35e6 * 0.35e6, 2.2e-6 * 2.2e-6, 4.6e-15);
    bool g_ok = near(c.G_over_2pi, 0.16e12, 0.01);
    bool g0_ok = near(c.g0_over_2pi, 0.7e-3, 0.01);
    return {"2", "coupling from calibrated spectra", g_ok && g0_ok,
            "G/2pi=" + num(c.G_over_2pi) + " Hz/m (0.16e12), g0/2pi=" + num(c.g0_over_2pi) +
                " Hz (0.7e-3), 1%"};
}

CheckResult coupling_per_slope() {
    const double dphi[3] = {70.0, 800.0, 80.0};
    const double xzpf[3] = {4.6e-15, 4.6e-15, 3.2e-15};
    const double quoted[3] = {0.33, 3.8, 0.25};
    bool ok = true;
    std::string d = "mHz per GHz/Phi0:";
    for (int i = 0; i < 3; ++i) {
        double v = flux::assemble_g0_from_flux(1e9, dphi[i], xzpf[i]) * 1e3;
        ok &= near(v, quoted[i], 0.05);
        d += " " + num(v, 3);
    }
    return {"3", "g0 per flux responsivity", ok, d + " vs (0.33, 3.8, 0.25) at 5%"};
}

CheckResult imprecision_chain() {
    const double s = budget::imprecision_quantum(hz_to_rad(135e6), 0.05, phys::two_pi,
                                                 hz_to_rad(140.0));
    const double eta_d = budget::detection_efficiency(s, 0.61e12);
    bool ok = near(s, 26.9e6, 0.01) && std::abs(s - 26e6) <= 13e6 && std::abs(eta_d - 4.3e-5) <= 2.1e-5 &&
              near(eta_d, 4.4e-5, 0.01);
    return {"4", "quantum imprecision and detection efficiency", ok,
            "S_imp (G/2pi)^2=" + num(s) + " Hz, eta_d=" + num(eta_d)};
}

CheckResult efficiency_decomposition() {
    const double eta_cav = budget::cavity_efficiency(110e6, 25e6);
    const double eta_cryo = budget::solve_missing_factor(4.3e-5, 0.19, 1.3e-2);
    const double lambda = budget::invert_loss(12.0, 28.0);
    const double lambda_db = 10.0 * std::log10(lambda);
    const double eta_up = budget::budget_assemble(0.5, 0.81, 0.99).eta_d;
    // eta_d eta_e = 1/9 solved for Cq.
    const double eta_e = 1.0 / (9.0 * eta_up);
    const double cq_req = eta_e / (1.0 - eta_e);
    bool ok = near(eta_cav, 0.185, 0.05) && near(eta_cryo, 1.74e-2, 0.05) && near(lambda_db, -3.58, 0.05) &&
              std::abs(lambda_db + 3.5) <= 2.4 && near(eta_up, 0.40, 0.05) && near(cq_req, 0.38, 0.05);
    return {"5", "efficiency decomposition", ok,
            "eta_cav=" + num(eta_cav) + " eta_cryo=" + num(eta_cryo) + " Lambda=" + num(lambda_db) +
                " dB eta_d(upgrade)=" + num(eta_up) + " Cq_req=" + num(cq_req)};
}

mech::MechMode z_mode(double freq_hz) {
    mech::MechMode m;
    m.frequency = hz_to_rad(freq_hz);
    m.xzpf = mech::zero_point_motion(5.7e-9, m.frequency);
    m.linewidth = m.frequency / 2.6e7;
    m.nth = mech::thermal_occupation(15e-3, m.frequency);
    return m;
}

CheckResult ground_state_scale() {
    const mech::MechMode m = z_mode(150.0);
    const double s = std::sqrt(budget::ground_state_density(m.xzpf, m.linewidth, m.nth));
    return {"6", "ground-state displacement scale", near(s, 0.8e-15, 0.20),
            "sqrt(S_gs)=" + num(s) + " m/rtHz vs 0.8e-15 at 20%"};
}

CheckResult cooperativity_scale() {
    const mech::MechMode m = z_mode(140.0);
    const double g0 = hz_to_rad(flux::assemble_g0_from_flux(1.7e9, 80.0, m.xzpf));
    const double cq = budget::cooperativity(0.05, g0, hz_to_rad(135e6), m.linewidth, m.nth);
    const auto proj = budget::project(budget::default_ledger());
    bool ok = cq > 5e-18 && cq < 5e-16 && proj.final_cq > 1e4;
    return {"7", "cooperativity and projection", ok,
            "Cq=" + num(cq) + " (5e-17 within 10x), projected=" + num(proj.final_cq) + " (>1e4)"};
}

CheckResult enbw_check() {
    const double fs = 2000.0;
    const auto n = static_cast<std::size_t>(120.0 * fs / 10.0);
    const double e = spectral::enbw(spectral::hamming(n), fs);
    return {"8", "Hamming ENBW, 120 s record, 1/10 segments", near(e, 0.114, 0.01),
            "ENBW=" + num(e, 6) + " Hz vs 0.114 at 1%"};
}

CheckResult flux_calibration() {
    spectral::CalibrationChain chain;
    const double c = chain.cal_coil_flux();
    return {"9", "calibration coil flux per volt", near(c, 0.0465, 0.01),
            num(c, 5) + " Phi0/V vs 0.0465 at 1%"};
}

CheckResult gradiometer_rejection() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    flux::GradiometricLoop loop;
    const flux::LoopPath path = flux::discretize(loop);
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
        Vec3 b(u(rng), u(rng), u(rng));
        double single = b.norm() * loop.square_side * loop.square_side;
        worst = std::max(worst, std::abs(flux::uniform_field_flux(path, b)) / single);
    }
    return {"10a", "gradiometric uniform-field rejection", worst <= 1e-12,
            "max |Phi|/(|B| A)=" + num(worst)};
}

CheckResult sensitivity_vs_difference() {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> uxy(150e-6, 600e-6), uz(150e-6, 400e-6), sgn(-1.0, 1.0);
    const Vec3 b = mech::gradient_from_current(mech::TrapConfig{});
    const double rp = 50e-6;
    const double h = 1e-9;
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        flux::GradiometricLoop loop;
        loop.offset = Vec3(std::copysign(uxy(rng), sgn(rng)), std::copysign(uxy(rng), sgn(rng)), uz(rng));
        const auto sens = flux::flux_sensitivity(loop, b, rp, 1.0);
        for (int i = 0; i < 3; ++i) {
            Vec3 e = Vec3::Zero();
            e[i] = h;
            double fd = (flux::loop_flux(loop, e, b, rp) - flux::loop_flux(loop, -e, b, rp)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd / sens.dphi_pickup[i] - 1.0));
        }
    }
    return {"10b", "analytic flux sensitivity vs central difference", worst <= 1e-6,
            "max relative deviation=" + num(worst)};
}

CheckResult locate_round_trip() {
    const Vec3 b = mech::gradient_from_current(mech::TrapConfig{});
    const double rp = 50e-6;
    const double alpha = 1.3e-3;
    flux::GradiometricLoop planted;
    planted.offset = Vec3(430e-6, 280e-6, 250e-6);
    const auto sens = flux::flux_sensitivity(planted, b, rp, alpha);
    const Vec3 measured = sens.dphi_squid.cwiseAbs() / phys::flux_quantum;

    flux::GradiometricLoop geometry;
    const auto res = flux::locate_pickup(measured, b, rp, geometry, planted.offset.z());
    bool found = false, paired = false;
    double best_dr = HUGE_VAL, best_da = HUGE_VAL;
    for (std::size_t k = 0; k < res.solutions.size(); ++k) {
        const auto& s = res.solutions[k];
        double dr = (s.offset - planted.offset).norm();
        double da = std::abs(s.alpha / alpha - 1.0);
        if (dr < best_dr) {
            best_dr = dr;
            best_da = da;
        }
        if (dr <= 5e-6 && da <= 0.02) {
            found = true;
            int p = s.symmetry_partner_index;
            if (p >= 0 && static_cast<std::size_t>(p) < res.solutions.size()) {
                const Vec3& q = res.solutions[p].offset;
                Vec3 mirror(-s.offset.x(), -s.offset.y(), s.offset.z());
                paired = (q - mirror).norm() <= 1e-6;
            }
        }
    }
    return {"10c", "pickup localization round trip", found && paired,
            std::to_string(res.solutions.size()) + " solutions, best |dr|=" + num(best_dr * 1e6, 3) +
                " um, |dalpha|/alpha=" + num(best_da, 3) + (paired ? ", partner found" : ", no partner")};
}

CheckResult s21_coverage() {
    const double wr = hz_to_rad(4.44e9), ki = hz_to_rad(5e6), ke = hz_to_rad(18e6);
    const double kt = ki + ke;
    const int npts = 401;
    int covered = 0, failed = 0;
    const int seeds = 100;
    for (int seed = 0; seed < seeds; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::normal_distribution<double> noise(0.0, 0.01);
        std::vector<cavity::S21Point> trace(npts);
        for (int k = 0; k < npts; ++k) {
            double w = wr + kt * (-5.0 + 10.0 * k / (npts - 1));
            trace[k] = {w, cavity::s21_model(w, wr, ki, ke) + cavity::cplx(noise(rng), noise(rng))};
        }
        try {
            auto fit = cavity::fit_s21(trace);
            const double est[3] = {fit.params.resonance, fit.params.kappa_int, fit.params.kappa_ext};
            const double truth[3] = {wr, ki, ke};
            bool all = true;
            for (int i = 0; i < 3; ++i) all &= std::abs(est[i] - truth[i]) <= 3.0 * fit.std_error[i];
            covered += all;
        } catch (const Error&) {
            ++failed;
        }
    }
    const double frac = static_cast<double>(covered) / seeds;
    return {"10d", "S21 fit 3-sigma coverage over 100 seeds", frac >= 0.95,
            "coverage=" + num(frac, 3) + ", failed fits=" + std::to_string(failed)};
}

CheckResult pipeline_round_trip() {
    const spectral::Scenario sc = spectral::reference_scenario();
    const auto tr = spectral::synth_trace(sc.to_synth(2000.0, 120.0, 400.0, 7));
    const auto phase = spectral::quasi_heterodyne_phase(tr, 400.0);
    const auto raw = spectral::welch_psd(phase, tr.sample_rate);
    const auto flux_psd = spectral::calibrate_flux_axis(raw, sc.chain);
    const auto sww = spectral::flux_to_frequency(flux_psd, sc.slope);
    const auto& y = sc.modes[1];
    const auto sxx = spectral::calibrate_displacement(raw, y.amplitude, y.freq);
    const auto c = spectral::extract_coupling(sww, sxx, y.freq);

    spectral::FloorExclusions ex;
    for (const auto& m : sc.modes) ex.peaks.push_back(m.freq);
    ex.peaks.push_back(sc.chain.cal_tone_freq);
    ex.peaks.push_back(sc.phase_mod.freq);
    const double floor = spectral::imprecision_floor(sxx, 30.0, 300.0, ex);
    const double floor_true = sc.displacement_floor(1);
    bool ok = near(c.G_over_2pi, y.coupling_over_2pi, 0.02) && near(floor, floor_true, 0.05);
    return {"10e", "synthetic trace through the calibration pipeline", ok,
            "G/2pi=" + num(c.G_over_2pi) + " (planted " + num(y.coupling_over_2pi) + "), floor=" +
                num(std::sqrt(floor)) + " m/rtHz (planted " + num(std::sqrt(floor_true)) + ")"};
}

CheckResult noise_identities() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_id = 0.0, worst_corrected = 0.0, worst_prod = 0.0;
    for (int k = 0; k < 10; ++k) {
        // Omega << kappa: 4 Omega^2 / kappa^2 stays below 1e-10.
        const double kappa = hz_to_rad(50e6 + 150e6 * u(rng));
        const double nr = 0.01 + 10.0 * u(rng);
        const double omega = hz_to_rad(20.0 + 180.0 * u(rng));
        const double mass = 1e-10 + 1e-8 * u(rng);
        const double q = 1e6 + 1e8 * u(rng);
        const double temp = 5e-3 + 0.1 * u(rng);
        const double G = hz_to_rad(1e9 + 1e12 * u(rng));

        const double xzpf = mech::zero_point_motion(mass, omega);
        const double gamma = omega / q;
        const double nth = mech::thermal_occupation(temp, omega);
        const double g0 = G * xzpf;

        const double s_imp = budget::imprecision_quantum(kappa, nr, G, omega);
        const double s_gs = budget::ground_state_density(xzpf, gamma, nth);
        const double cq = budget::cooperativity(nr, g0, kappa, gamma, nth);
        const double s_ff = budget::back_action_force(G, nr, kappa);

        worst_id = std::max(worst_id, std::abs(s_imp / (s_gs / cq) - 1.0));
        worst_corrected = std::max(worst_corrected, std::abs(16.0 * s_imp / (s_gs / cq) - 1.0));
        worst_prod = std::max(worst_prod, std::abs(s_imp * s_ff / (phys::hbar * phys::hbar / 4.0) - 1.0));
    }
    bool ok = worst_id <= 1e-9 && worst_prod <= 1e-9;
    return {"10f", "S_imp = S_gs/Cq and S_imp S_FF = hbar^2/4", ok,
            "S_imp vs S_gs/Cq max rel dev=" + num(worst_id) + " (16 S_imp Cq/S_gs dev=" +
                num(worst_corrected) + "), product dev=" + num(worst_prod)};
}

}  // namespace

std::vector<CheckResult> run_all() {
    struct Entry {
        const char* id;
        CheckResult (*fn)();
    };
    const Entry checks[] = {{"1", trap_law},
                            {"2", coupling_arithmetic},
                            {"3", coupling_per_slope},
                            {"4", imprecision_chain},
                            {"5", efficiency_decomposition},
                            {"6", ground_state_scale},
                            {"7", cooperativity_scale},
                            {"8", enbw_check},
                            {"9", flux_calibration},
                            {"10a", gradiometer_rejection},
                            {"10b", sensitivity_vs_difference},
                            {"10c", locate_round_trip},
                            {"10d", s21_coverage},
                            {"10e", pipeline_round_trip},
                            {"10f", noise_identities}};
    std::vector<CheckResult> out;
    for (const Entry& e : checks) {
        try {
            out.push_back(e.fn());
        } catch (const std::exception& ex) {
            out.push_back({e.id, "raised an exception", false, ex.what()});
        }
    }
    return out;
}

std::string format(const CheckResult& r) {
    std::ostringstream os;
    os << (r.pass ? "PASS " : "FAIL ") << r.id << "  " << r.title << " | " << r.detail;
    return os.str();
}

}  // namespace levsense::selfcheck
