// flux_geometry.hpp - flux that a displaced superconducting sphere induces in a
// gradiometric pickup loop, the flux-transformer chain to the SQUID, the
// single-photon coupling assembly, and inversion of measured sensitivities
// to locate the pickup loop relative to the trap centre.
//
// Frame: the pickup centre is the origin and the loop lies in the z = 0 plane.
// The trap centre sits at GradiometricLoop::offset; the sphere at
// offset + r0 where r0 is its displacement from the trap centre.
//
// Field model: the sphere is a perfect diamagnet and responds to the local
// trap field with the image dipole m = -(2 pi / mu0) rp^3 B(r0). Its flux
// through the loop is the line integral of the dipole vector potential,
// evaluated by segment-midpoint quadrature.

#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "levsense/common.hpp"

namespace levsense::flux {

struct GradiometricLoop {
    double square_side = 150e-6;          // m
    double center_separation = 158e-6;    // m, centre to centre (8 um edge gap)
    double in_plane_rotation = -phys::pi / 4.0;  // rad, loop axis vs trap x axis
    Vec3 offset{450e-6, 250e-6, 250e-6};  // trap centre relative to pickup centre
    std::array<int, 2> winding{+1, -1};
    int segments_per_side = 64;

    void validate() const;
};

GradiometricLoop with_offset(GradiometricLoop loop, const Vec3& offset);

/// Discretized loop: segment midpoints and directed lengths. The second
/// square is the exact point reflection of the first, so fluxes at
/// point-symmetric placements agree bit-for-bit.
struct LoopPath {
    std::array<std::vector<Vec3>, 2> midpoints;
    std::array<std::vector<Vec3>, 2> dl;
    double segment_length = 0.0;
};

LoopPath discretize(const GradiometricLoop& loop);

struct TransformerParams {
    double squid_inductance = 0.12e-9;  // L_s
    double input_coil = 20.5e-9;        // L_fc
    double twisted_pair = 100e-9;       // L_tw
    double pickup = 0.9e-9;             // L_PUL
    double coupling = 0.1;              // nu_i

    double mutual_inductance() const;
};

struct SensitivityResult {
    Vec3 dphi_pickup;  // Wb/m
    Vec3 dphi_squid;   // Wb/m, alpha * dphi_pickup
    /// F_i = dphi_pickup_i / (b_i rp^2); empty where b_i = 0.
    std::array<std::optional<double>, 3> geometric_factor;
};

struct PlacementSolution {
    Vec3 offset;            // m
    double alpha = 0.0;
    double residual = 0.0;  // ||alpha s - measured|| / ||measured||
    int symmetry_partner_index = -1;
    bool rank_deficient = false;
};

struct LocateOptions {
    double half_width = 600e-6;  // grid extent in x and y, m
    double pitch = 5e-6;         // m
    double ratio_tolerance = 0.10;
    double prior_weight = 1e-3;  // soft pull of dz towards the prior
    double merge_distance = 1e-6;
    int scan_segments_per_side = 16;
};

struct LocateResult {
    std::vector<PlacementSolution> solutions;
    /// Grid cells (dx, dy) whose sensitivity ratios matched; kept as a
    /// diagnostic even when no solution survives.
    std::vector<std::array<double, 2>> matched_cells;
    int loci = 0;
};

/// B(r) = (b_x x, b_y y, b_z z) about the trap centre.
Vec3 quadrupole_field(const Vec3& r, const Vec3& b);

/// m = -(2 pi / mu0) rp^3 B(r0).
Vec3 induced_dipole(const Vec3& r0, const Vec3& b, double rp);

/// Line integral of an arbitrary vector potential around the gradiometer.
double loop_flux_of(const LoopPath& path, const std::function<Vec3(const Vec3&)>& vector_potential);

/// Net flux linked by a spatially uniform field.
double uniform_field_flux(const LoopPath& path, const Vec3& field);

/// Flux of a point dipole at absolute position p (pickup frame).
/// Throws SingularGeometryError when p lies on the loop path.
double dipole_flux(const LoopPath& path, const Vec3& moment, const Vec3& p);

/// Flux per unit dipole moment along x, y, z for a dipole at p.
Vec3 unit_moment_flux(const LoopPath& path, const Vec3& p);

/// Flux of the sphere displaced by r0 from the trap centre.
double loop_flux(const GradiometricLoop& loop, const Vec3& r0, const Vec3& b, double rp);

/// Analytic d(Phi)/d(r0_i) at the trap centre. m is linear in r0, so the
/// derivative dipole along axis i is -(2 pi / mu0) rp^3 b_i e_i placed at
/// the trap centre.
SensitivityResult flux_sensitivity(const GradiometricLoop& loop, const Vec3& b, double rp,
                                   double alpha);

double transformer_efficiency(const TransformerParams& t);

/// g0 / 2 pi in Hz. slope in Hz per flux quantum, gradient in T/m.
double assemble_g0(double slope, double alpha, double geometric_factor, double gradient,
                   double rp, double xzpf);

/// g0 / 2 pi in Hz from the SQUID-side flux sensitivity (flux quanta per m).
double assemble_g0_from_flux(double slope, double dphi_squid_phi0_per_m, double xzpf);

/// rms SQUID flux (Wb) for phonon number nm.
double mean_flux_rms(double alpha, double geometric_factor, double gradient, double rp,
                     double xzpf, double phonons);

/// Two-stage inversion: ratio grid scan at dz_prior, then local least squares
/// on absolute sensitivities. measured is |dPhi_squid/di| in flux quanta per m.
LocateResult locate_pickup(const Vec3& measured, const Vec3& b, double rp,
                           const GradiometricLoop& geometry, double dz_prior,
                           const LocateOptions& opts = {});

struct FluxMapRow {
    double dx, dy;
    std::array<double, 3> F;
};

/// Geometric factors F_i over a (dx, dy) grid at fixed dz.
std::vector<FluxMapRow> flux_map(const GradiometricLoop& geometry, double rp, double dz,
                                 double half_width, double pitch);

}  // namespace levsense::flux
