// cavity_squid.hpp - flux-tunable resonator: reflection model and complex fit,
// SQUID inductance, participation-ratio tuning curve and flux responsivity.
//
// Flux arguments are in units of the flux quantum. Responsivities (slopes) are
// in Hz per flux quantum, i.e. d(omega_r)/(2 pi dPhi).

#pragma once

#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "levsense/common.hpp"

namespace levsense::cavity {

using cplx = std::complex<double>;

struct CavityParams {
    double resonance = hz_to_rad(4.44e9);  // rad/s
    double kappa_int = hz_to_rad(5e6);     // rad/s
    double kappa_ext = hz_to_rad(18e6);    // rad/s
    double slope = 0.0;                    // Hz/Phi0
    double bias_flux = 0.0;                // Phi0
    double photons = 0.0;

    double kappa_tot() const { return kappa_int + kappa_ext; }
    void validate() const;
};

struct SquidParams {
    double critical_current = 0.5e-6;       // per junction, A
    double loop_inductance = 0.12e-9;       // L_s, H
    double screening = 0.06;                // beta_L
    double resonator_inductance = 1.4e-9;   // L_r, H
    double resonator_capacitance = 310e-15; // C_r, F
    double effective_area = 56e-6 * 56e-6;  // m^2

    /// 2 L_s I_c / Phi0 must match the stored beta_L within 20%.
    void validate() const;
};

inline constexpr double kFluxGap = 1e-3;  // Phi0, exclusion around half-integer flux

struct S21Point {
    double omega;  // rad/s
    cplx value;
};

/// S21 = [d^2 + i k_int d + (k_ext^2 - k_int^2)/4] / (d + i k_tot/2)^2, d = w - w_r.
cplx s21_model(double omega, double resonance, double kappa_int, double kappa_ext);

struct S21Guess {
    double resonance;
    double kappa_int;
    double kappa_ext;
};

struct S21Fit {
    CavityParams params;
    Eigen::Vector3d std_error;    // (w_r, k_int, k_ext), rad/s
    Eigen::Matrix3d covariance;
    double chi2 = 0.0;            // sum of squared complex residuals
    int iterations = 0;
};

/// Initial guess from the dip of 1 - |S21|^2 (Lorentzian of width k_tot).
S21Guess guess_s21(const std::vector<S21Point>& trace);

S21Fit fit_s21(const std::vector<S21Point>& trace, std::optional<S21Guess> guess = std::nullopt);

/// Two-junction parallel Josephson inductance Phi0 / (2 pi 2 I_c |cos(pi Phi)|).
/// beta_L is carried for reference only.
double squid_inductance(double flux, double critical_current, double beta_l = 0.06,
                        double gap = kFluxGap);

/// omega_r(Phi) = omega0 / sqrt(1 + (L_sq(Phi) + L_s) / L_r).
struct TuningModel {
    double omega0 = 0.0;                  // rad/s
    double resonator_inductance = 0.0;    // L_r
    double loop_inductance = 0.12e-9;     // L_s
    double critical_current = 0.5e-6;
    double flux_min = -0.5;               // validity range of the fitted data
    double flux_max = 0.5;

    double frequency(double flux) const;              // rad/s
    double slope_unchecked(double flux) const;        // Hz/Phi0
};

using TuningPoint = std::pair<double, double>;  // (flux in Phi0, omega_r in rad/s)

std::vector<TuningPoint> tuning_curve(const std::vector<double>& flux_grid,
                                      const TuningModel& model);

/// Fits omega0 and L_r with L_s and I_c held fixed.
TuningModel fit_tuning_curve(const std::vector<TuningPoint>& data, double loop_inductance,
                             double critical_current);

/// Analytic d(omega_r)/(2 pi dPhi) in Hz/Phi0; throws ExtrapolationError
/// unless flux is strictly inside the fitted range.
double slope_at_bias(const TuningModel& model, double flux);

/// Smallest positive bias whose |slope| reaches target (Hz/Phi0).
double bias_for_slope(const TuningModel& model, double target);

}  // namespace levsense::cavity
