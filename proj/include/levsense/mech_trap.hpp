// mech_trap.hpp - mechanics of a superconducting sphere levitated in a
// quadrupole trap: trap frequencies, zero-point motion, thermal occupation
// and linewidths.

#pragma once

#include <array>
#include <string_view>

#include "levsense/common.hpp"

namespace levsense::mech {

inline constexpr double kDefaultDensity = 1.09e4;  // kg/m^3, 90:10 lead-tin

/// Sphere radius and density. Mass is always derived.
class SphereParams {
public:
    SphereParams(double radius, double density = kDefaultDensity);

    double radius() const { return radius_; }
    double density() const { return density_; }
    double mass() const { return mass_; }

private:
    double radius_;
    double density_;
    double mass_;
};

enum class SignConvention { z_negative_sum };

struct TrapConfig {
    Vec3 gradient_per_ampere{23.5, 24.2, 48.1};  // |b_i| per A, T/m/A
    double current = 1.0;                         // A
    double quality = 2.6e7;
    double bath_temperature = 15e-3;              // K
    SignConvention sign_convention = SignConvention::z_negative_sum;

    /// Throws DomainError on Q <= 0, T <= 0, I < 0 or a non-solenoidal
    /// gradient set (|sum b_i| > 2% of max |b_i|).
    void validate() const;
};

enum class Axis { x = 0, y = 1, z = 2 };

constexpr int index(Axis a) { return static_cast<int>(a); }
std::string_view name(Axis a);

struct MechMode {
    Axis axis = Axis::z;
    double frequency = 0.0;     // Omega_m, rad/s
    double xzpf = 0.0;          // m
    double linewidth = 0.0;     // Gamma_m, rad/s
    double nth = 0.0;
    double eff_linewidth = 0.0; // Gamma_eff = Gamma_m * nth, rad/s
};

/// Omega = sqrt(3 / (2 mu0 rho)) |b|.
double trap_frequency(double gradient, double density);

/// Signed gradients b_i = sign_i * B_I,i * I_trap with signs (+, +, -).
Vec3 gradient_from_current(const TrapConfig& cfg);

/// sqrt(hbar / (2 m Omega)).
double zero_point_motion(double mass, double omega);

/// High-temperature occupation kB T / (hbar Omega); no Bose correction.
double thermal_occupation(double temperature, double omega);

MechMode mode_from_config(const TrapConfig& cfg, const SphereParams& sphere, Axis axis);

std::array<MechMode, 3> modes_from_config(const TrapConfig& cfg, const SphereParams& sphere);

}  // namespace levsense::mech
