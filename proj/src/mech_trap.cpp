#include "levsense/mech_trap.hpp"

#include <cmath>
#include <string>

namespace levsense::mech {

SphereParams::SphereParams(double radius, double density)
    : radius_(radius), density_(density) {
    if (!(radius > 0.0)) throw DomainError("sphere radius must be positive");
    if (!(density > 0.0)) throw DomainError("sphere density must be positive");
    mass_ = 4.0 / 3.0 * phys::pi * radius * radius * radius * density;
}

void TrapConfig::validate() const {
    if (!(quality > 0.0)) throw DomainError("trap quality factor must be positive");
    if (!(bath_temperature > 0.0)) throw DomainError("bath temperature must be positive");
    if (!(current >= 0.0)) throw DomainError("trap current must be non-negative");
    Vec3 signed_b = gradient_from_current(TrapConfig{gradient_per_ampere, 1.0});
    double max_b = signed_b.cwiseAbs().maxCoeff();
    if (max_b > 0.0 && std::abs(signed_b.sum()) > 0.02 * max_b) {
        throw DomainError("trap gradients are not solenoidal within 2%: sum = " +
                          std::to_string(signed_b.sum()) + " T/m/A");
    }
}

std::string_view name(Axis a) {
    switch (a) {
        case Axis::x: return "x";
        case Axis::y: return "y";
        case Axis::z: return "z";
    }
    return "?";
}

double trap_frequency(double gradient, double density) {
    if (!(density > 0.0)) throw DomainError("density must be positive");
    return std::sqrt(3.0 / (2.0 * phys::mu0 * density)) * std::abs(gradient);
}

Vec3 gradient_from_current(const TrapConfig& cfg) {
    // z_negative_sum: z carries the sign opposite to x and y.
    Vec3 mag = cfg.gradient_per_ampere.cwiseAbs() * cfg.current;
    return {mag.x(), mag.y(), -mag.z()};
}

double zero_point_motion(double mass, double omega) {
    if (!(mass > 0.0) || !(omega > 0.0))
        throw DomainError("zero_point_motion needs positive mass and frequency");
    return std::sqrt(phys::hbar / (2.0 * mass * omega));
}

double thermal_occupation(double temperature, double omega) {
    if (!(temperature > 0.0) || !(omega > 0.0))
        throw DomainError("thermal_occupation needs positive temperature and frequency");
    return phys::kB * temperature / (phys::hbar * omega);
}

MechMode mode_from_config(const TrapConfig& cfg, const SphereParams& sphere, Axis axis) {
    cfg.validate();
    Vec3 b = gradient_from_current(cfg);
    MechMode m;
    m.axis = axis;
    m.frequency = trap_frequency(b[index(axis)], sphere.density());
    m.xzpf = zero_point_motion(sphere.mass(), m.frequency);
    m.linewidth = m.frequency / cfg.quality;
    m.nth = thermal_occupation(cfg.bath_temperature, m.frequency);
    m.eff_linewidth = m.linewidth * m.nth;
    return m;
}

std::array<MechMode, 3> modes_from_config(const TrapConfig& cfg, const SphereParams& sphere) {
    return {mode_from_config(cfg, sphere, Axis::x), mode_from_config(cfg, sphere, Axis::y),
            mode_from_config(cfg, sphere, Axis::z)};
}

}  // namespace levsense::mech
