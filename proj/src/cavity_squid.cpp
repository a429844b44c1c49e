#include "levsense/cavity_squid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "levsense/least_squares.hpp"

namespace levsense::cavity {

void CavityParams::validate() const {
    if (kappa_int < 0.0 || kappa_ext < 0.0) throw DomainError("linewidths must be non-negative");
    if (photons < 0.0) throw DomainError("photon number must be non-negative");
}

void SquidParams::validate() const {
    if (!(critical_current > 0.0 && loop_inductance > 0.0))
        throw DomainError("SQUID critical current and loop inductance must be positive");
    double beta = 2.0 * loop_inductance * critical_current / phys::flux_quantum;
    if (std::abs(beta / screening - 1.0) > 0.2)
        throw DomainError("beta_L inconsistent with 2 L_s I_c / Phi0: " + std::to_string(beta));
}

cplx s21_model(double omega, double resonance, double kappa_int, double kappa_ext) {
    const double d = omega - resonance;
    const double kt = kappa_int + kappa_ext;
    const cplx num{d * d + 0.25 * (kappa_ext * kappa_ext - kappa_int * kappa_int), kappa_int * d};
    const cplx den = cplx{d, 0.5 * kt} * cplx{d, 0.5 * kt};
    return num / den;
}

namespace {

// d S21 / d(w_r, k_int, k_ext)
std::array<cplx, 3> s21_gradient(double omega, double wr, double ki, double ke) {
    const double d = omega - wr;
    const cplx D{d, 0.5 * (ki + ke)};
    const cplx N{d * d + 0.25 * (ke * ke - ki * ki), ki * d};
    const cplx D2 = D * D;
    const cplx D3 = D2 * D;
    const cplx I{0.0, 1.0};
    return {-(2.0 * d + I * ki) / D2 + 2.0 * N / D3,
            (I * d - 0.5 * ki) / D2 - I * N / D3,
            (0.5 * ke) / D2 - I * N / D3};
}

}  // namespace

S21Guess guess_s21(const std::vector<S21Point>& trace) {
    if (trace.size() < 3) throw InitializationError("trace too short for an initial guess");
    std::vector<double> absorption(trace.size());
    for (std::size_t k = 0; k < trace.size(); ++k)
        absorption[k] = 1.0 - std::norm(trace[k].value);
    auto peak = std::max_element(absorption.begin(), absorption.end());
    std::vector<double> sorted = absorption;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double baseline = sorted[sorted.size() / 2];
    const double depth = *peak - baseline;
    if (!(depth > 0.05)) throw InitializationError("no resonance dip found in |S21|");

    const std::size_t ip = static_cast<std::size_t>(peak - absorption.begin());
    const double half = baseline + 0.5 * depth;
    std::size_t lo = ip, hi = ip;
    while (lo > 0 && absorption[lo] > half) --lo;
    while (hi + 1 < absorption.size() && absorption[hi] > half) ++hi;
    double kt = std::abs(trace[hi].omega - trace[lo].omega);
    if (!(kt > 0.0)) throw InitializationError("could not resolve the resonance width");

    // On resonance S21 = (k_int - k_ext) / k_tot.
    double s0 = std::clamp(trace[ip].value.real(), -0.999, 0.999);
    S21Guess g;
    g.resonance = trace[ip].omega;
    g.kappa_int = 0.5 * kt * (1.0 + s0);
    g.kappa_ext = 0.5 * kt * (1.0 - s0);
    return g;
}

S21Fit fit_s21(const std::vector<S21Point>& trace, std::optional<S21Guess> guess) {
    if (trace.size() < 20) throw ArgumentError("fit_s21 needs at least 20 points");
    const S21Guess g = guess ? *guess : guess_s21(trace);
    auto [wmin, wmax] = std::minmax_element(trace.begin(), trace.end(), [](auto& a, auto& b) {
        return a.omega < b.omega;
    });
    const double scale = g.kappa_int + g.kappa_ext;
    if (!(scale > 0.0)) throw InitializationError("initial linewidth must be positive");
    if (wmax->omega - wmin->omega < 3.0 * scale)
        throw ArgumentError("trace must span at least 3 linewidths");

    // Work in units of the guessed linewidth, relative to the guessed resonance.
    const double ref = g.resonance;
    const auto n = static_cast<Eigen::Index>(trace.size());
    auto unpack = [&](const Eigen::VectorXd& p) {
        return std::array<double, 3>{ref + p[0] * scale, p[1] * scale, p[2] * scale};
    };
    auto residual = [&](const Eigen::VectorXd& p) {
        auto [wr, ki, ke] = unpack(p);
        Eigen::VectorXd r(2 * n);
        for (Eigen::Index k = 0; k < n; ++k) {
            cplx e = s21_model(trace[k].omega, wr, ki, ke) - trace[k].value;
            r[2 * k] = e.real();
            r[2 * k + 1] = e.imag();
        }
        return r;
    };
    auto jacobian = [&](const Eigen::VectorXd& p) {
        auto [wr, ki, ke] = unpack(p);
        Eigen::MatrixXd J(2 * n, 3);
        for (Eigen::Index k = 0; k < n; ++k) {
            auto grad = s21_gradient(trace[k].omega, wr, ki, ke);
            for (int c = 0; c < 3; ++c) {
                J(2 * k, c) = grad[c].real() * scale;
                J(2 * k + 1, c) = grad[c].imag() * scale;
            }
        }
        return J;
    };

    Eigen::VectorXd start(3);
    start << 0.0, g.kappa_int / scale, g.kappa_ext / scale;
    lsq::Result res = lsq::levenberg_marquardt(residual, jacobian, start);
    auto [wr, ki, ke] = unpack(res.params);
    if (!res.converged)
        throw ConvergenceError("S21 fit did not converge", {wr, ki, ke});

    S21Fit fit;
    fit.params.resonance = wr;
    fit.params.kappa_int = ki;
    fit.params.kappa_ext = ke;
    fit.chi2 = res.cost;
    fit.iterations = res.iterations;
    fit.covariance = lsq::covariance(res) * scale * scale;
    fit.std_error = fit.covariance.diagonal().cwiseSqrt();
    return fit;
}

double squid_inductance(double flux, double critical_current, double /*beta_l*/, double gap) {
    if (!(critical_current > 0.0)) throw DomainError("critical current must be positive");
    double frac = flux - std::floor(flux);  // in [0, 1)
    if (std::abs(frac - 0.5) < gap)
        throw NearSingularityError("flux bias within the half-flux-quantum exclusion window");
    return phys::flux_quantum /
           (phys::two_pi * 2.0 * critical_current * std::abs(std::cos(phys::pi * flux)));
}

double TuningModel::frequency(double flux) const {
    double l = squid_inductance(flux, critical_current) + loop_inductance;
    return omega0 / std::sqrt(1.0 + l / resonator_inductance);
}

double TuningModel::slope_unchecked(double flux) const {
    double lsq = squid_inductance(flux, critical_current);
    double x = 1.0 + (lsq + loop_inductance) / resonator_inductance;
    double dl = lsq * phys::pi * std::tan(phys::pi * flux);  // per Phi0
    double dw = -0.5 * omega0 * std::pow(x, -1.5) * dl / resonator_inductance;
    return dw / phys::two_pi;
}

std::vector<TuningPoint> tuning_curve(const std::vector<double>& flux_grid,
                                      const TuningModel& model) {
    std::vector<TuningPoint> out;
    out.reserve(flux_grid.size());
    for (double f : flux_grid) out.emplace_back(f, model.frequency(f));
    return out;
}

TuningModel fit_tuning_curve(const std::vector<TuningPoint>& data, double loop_inductance,
                             double critical_current) {
    if (data.size() < 3) throw ArgumentError("tuning fit needs at least 3 points");
    TuningModel m;
    m.loop_inductance = loop_inductance;
    m.critical_current = critical_current;
    m.flux_min = data.front().first;
    m.flux_max = data.front().first;
    for (auto& [f, w] : data) {
        m.flux_min = std::min(m.flux_min, f);
        m.flux_max = std::max(m.flux_max, f);
    }

    // 1/w^2 = a + c L(Phi) is linear in the total inductance: exact start.
    Eigen::MatrixXd A(data.size(), 2);
    Eigen::VectorXd y(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
        A(k, 0) = 1.0;
        A(k, 1) = (squid_inductance(data[k].first, critical_current) + loop_inductance) / 1e-9;
        y[k] = 1.0 / (data[k].second * data[k].second) * 1e20;
    }
    Eigen::Vector2d ac = A.colPivHouseholderQr().solve(y);
    if (!(ac[0] > 0.0 && ac[1] > 0.0))
        throw InitializationError("tuning data not compatible with the participation model");
    const double w_scale = data.front().second;
    double omega0 = std::sqrt(1e20 / ac[0]);
    double lr_nh = ac[0] / ac[1];

    auto residual = [&](const Eigen::VectorXd& p) {
        TuningModel t = m;
        t.omega0 = p[0] * w_scale;
        t.resonator_inductance = p[1] * 1e-9;
        Eigen::VectorXd r(data.size());
        for (std::size_t k = 0; k < data.size(); ++k)
            r[k] = (t.frequency(data[k].first) - data[k].second) / w_scale;
        return r;
    };
    auto jac = [&](const Eigen::VectorXd& p) {
        return lsq::numeric_jacobian(residual, p, p.cwiseAbs() * 1e-7);
    };
    Eigen::VectorXd start(2);
    start << omega0 / w_scale, lr_nh;
    lsq::Result res = lsq::levenberg_marquardt(residual, jac, start);
    if (!res.converged)
        throw ConvergenceError("tuning-curve fit did not converge",
                               {res.params[0] * w_scale, res.params[1] * 1e-9});
    m.omega0 = res.params[0] * w_scale;
    m.resonator_inductance = res.params[1] * 1e-9;
    return m;
}

double slope_at_bias(const TuningModel& model, double flux) {
    if (!(flux > model.flux_min && flux < model.flux_max))
        throw ExtrapolationError("bias outside the interior of the fitted tuning range");
    return model.slope_unchecked(flux);
}

double bias_for_slope(const TuningModel& model, double target) {
    target = std::abs(target);
    if (target == 0.0) return 0.0;
    const double hi_limit = std::min(model.flux_max, 0.5 - kFluxGap);
    if (!(hi_limit > 0.0)) throw RangeError("fitted range has no positive-flux branch", 0.0);
    const double best = std::abs(model.slope_unchecked(hi_limit));
    if (target > best)
        throw RangeError("target slope " + std::to_string(target) +
                             " Hz/Phi0 exceeds the achievable " + std::to_string(best),
                         best);
    double lo = 0.0, hi = hi_limit;
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
        double mid = 0.5 * (lo + hi);
        if (std::abs(model.slope_unchecked(mid)) >= target)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace levsense::cavity
