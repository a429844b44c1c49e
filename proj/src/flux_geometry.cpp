#include "levsense/flux_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Dense>

#include "levsense/least_squares.hpp"

namespace levsense::flux {

namespace {

constexpr double kDipolePrefactor = 2.0 * phys::pi / phys::mu0;  // m = -k rp^3 B
constexpr double kVectorPotentialPrefactor = phys::mu0 / (4.0 * phys::pi);

double point_segment_distance(const Vec3& p, const Vec3& mid, const Vec3& dl) {
    Vec3 a = mid - 0.5 * dl;
    double len2 = dl.squaredNorm();
    double t = std::clamp((p - a).dot(dl) / len2, 0.0, 1.0);
    return (a + t * dl - p).norm();
}

void check_not_on_path(const LoopPath& path, const Vec3& p) {
    const double tol = 1e-3 * path.segment_length;
    // Cheap reject: only points near the loop plane can touch the path.
    if (std::abs(p.z()) > tol) return;
    for (int s = 0; s < 2; ++s) {
        for (std::size_t k = 0; k < path.midpoints[s].size(); ++k) {
            if (point_segment_distance(p, path.midpoints[s][k], path.dl[s][k]) < tol)
                throw SingularGeometryError("dipole lies on the pickup-loop integration path");
        }
    }
}

// Flux per unit moment along x, y, z for one square.
Vec3 square_unit_flux(const std::vector<Vec3>& mids, const std::vector<Vec3>& dls, const Vec3& p) {
    double fx = 0.0, fy = 0.0, fz = 0.0;
    for (std::size_t k = 0; k < mids.size(); ++k) {
        const Vec3 d = mids[k] - p;
        const Vec3& dl = dls[k];
        double r2 = d.squaredNorm();
        double inv_r3 = 1.0 / (r2 * std::sqrt(r2));
        // (e_i x d) . dl for i = x, y, z
        fx += (d.y() * dl.z() - d.z() * dl.y()) * inv_r3;
        fy += (d.z() * dl.x() - d.x() * dl.z()) * inv_r3;
        fz += (d.x() * dl.y() - d.y() * dl.x()) * inv_r3;
    }
    return kVectorPotentialPrefactor * Vec3{fx, fy, fz};
}

}  // namespace

void GradiometricLoop::validate() const {
    if (!(square_side > 0.0)) throw DomainError("pickup square side must be positive");
    if (center_separation < square_side)
        throw DomainError("pickup squares overlap: center_separation < square_side");
    if (winding[0] != -winding[1] || std::abs(winding[0]) != 1)
        throw DomainError("gradiometer windings must be opposite (+1, -1)");
    if (segments_per_side < 8) throw DomainError("segments_per_side must be at least 8");
}

GradiometricLoop with_offset(GradiometricLoop loop, const Vec3& offset) {
    loop.offset = offset;
    return loop;
}

LoopPath discretize(const GradiometricLoop& loop) {
    loop.validate();
    const int n = loop.segments_per_side;
    const double h = 0.5 * loop.square_side;
    const Vec3 u{std::cos(loop.in_plane_rotation), std::sin(loop.in_plane_rotation), 0.0};
    const Vec3 v{-u.y(), u.x(), 0.0};
    const Vec3 c = 0.5 * loop.center_separation * u;

    std::array<Vec3, 4> corners{c - h * u - h * v, c + h * u - h * v, c + h * u + h * v,
                                c - h * u + h * v};
    if (loop.winding[0] < 0) std::reverse(corners.begin(), corners.end());

    LoopPath path;
    path.segment_length = loop.square_side / n;
    for (int e = 0; e < 4; ++e) {
        const Vec3& a = corners[e];
        const Vec3 edge = corners[(e + 1) % 4] - a;
        const Vec3 dl = edge / n;
        for (int k = 0; k < n; ++k) {
            path.midpoints[0].push_back(a + ((k + 0.5) / n) * edge);
            path.dl[0].push_back(dl);
        }
    }
    // Second square: point reflection through the pickup centre. Reflection
    // flips dl; the opposite winding flips it back.
    const double flip = -static_cast<double>(loop.winding[0] * loop.winding[1]);
    for (std::size_t k = 0; k < path.midpoints[0].size(); ++k) {
        const Vec3& m = path.midpoints[0][k];
        path.midpoints[1].push_back({-m.x(), -m.y(), m.z()});
        path.dl[1].push_back(flip * path.dl[0][k]);
    }
    return path;
}

double TransformerParams::mutual_inductance() const {
    return coupling * std::sqrt(squid_inductance * input_coil);
}

Vec3 quadrupole_field(const Vec3& r, const Vec3& b) { return b.cwiseProduct(r); }

Vec3 induced_dipole(const Vec3& r0, const Vec3& b, double rp) {
    if (!(rp > 0.0)) throw DomainError("particle radius must be positive");
    return -kDipolePrefactor * rp * rp * rp * quadrupole_field(r0, b);
}

double loop_flux_of(const LoopPath& path, const std::function<Vec3(const Vec3&)>& vector_potential) {
    double total = 0.0;
    for (int s = 0; s < 2; ++s) {
        double part = 0.0;
        for (std::size_t k = 0; k < path.midpoints[s].size(); ++k)
            part += vector_potential(path.midpoints[s][k]).dot(path.dl[s][k]);
        total += part;
    }
    return total;
}

double uniform_field_flux(const LoopPath& path, const Vec3& field) {
    return loop_flux_of(path, [&](const Vec3& r) -> Vec3 { return 0.5 * field.cross(r); });
}

Vec3 unit_moment_flux(const LoopPath& path, const Vec3& p) {
    check_not_on_path(path, p);
    Vec3 a = square_unit_flux(path.midpoints[0], path.dl[0], p);
    Vec3 b = square_unit_flux(path.midpoints[1], path.dl[1], p);
    return a + b;
}

double dipole_flux(const LoopPath& path, const Vec3& moment, const Vec3& p) {
    return moment.dot(unit_moment_flux(path, p));
}

double loop_flux(const GradiometricLoop& loop, const Vec3& r0, const Vec3& b, double rp) {
    LoopPath path = discretize(loop);
    return dipole_flux(path, induced_dipole(r0, b, rp), loop.offset + r0);
}

SensitivityResult flux_sensitivity(const GradiometricLoop& loop, const Vec3& b, double rp,
                                   double alpha) {
    if (!(rp > 0.0)) throw DomainError("particle radius must be positive");
    LoopPath path = discretize(loop);
    Vec3 unit = unit_moment_flux(path, loop.offset);
    SensitivityResult out;
    const double scale = -kDipolePrefactor * rp * rp * rp;
    for (int i = 0; i < 3; ++i) {
        out.dphi_pickup[i] = scale * b[i] * unit[i];
        if (b[i] != 0.0)
            out.geometric_factor[i] = out.dphi_pickup[i] / (b[i] * rp * rp);
    }
    out.dphi_squid = alpha * out.dphi_pickup;
    return out;
}

double transformer_efficiency(const TransformerParams& t) {
    if (!(t.squid_inductance > 0.0 && t.input_coil > 0.0 && t.twisted_pair >= 0.0 &&
          t.pickup >= 0.0))
        throw DomainError("transformer inductances must be positive");
    if (t.coupling < 0.0 || t.coupling > 1.0)
        throw DomainError("input coupling coefficient must lie in [0, 1]");
    return t.mutual_inductance() / (t.input_coil + t.twisted_pair + t.pickup);
}

double assemble_g0(double slope, double alpha, double geometric_factor, double gradient,
                   double rp, double xzpf) {
    return slope * alpha * geometric_factor * std::abs(gradient) * rp * rp * xzpf /
           phys::flux_quantum;
}

double assemble_g0_from_flux(double slope, double dphi_squid_phi0_per_m, double xzpf) {
    return slope * dphi_squid_phi0_per_m * xzpf;
}

double mean_flux_rms(double alpha, double geometric_factor, double gradient, double rp,
                     double xzpf, double phonons) {
    if (phonons < 0.0) throw DomainError("phonon number must be non-negative");
    return alpha * geometric_factor * std::abs(gradient) * rp * rp * xzpf *
           std::sqrt(2.0 * phonons + 1.0);
}

std::vector<FluxMapRow> flux_map(const GradiometricLoop& geometry, double rp, double dz,
                                 double half_width, double pitch) {
    LoopPath path = discretize(geometry);
    const int n = static_cast<int>(std::lround(half_width / pitch));
    std::vector<FluxMapRow> rows;
    rows.reserve(static_cast<std::size_t>((2 * n + 1) * (2 * n + 1)));
    const double scale = -kDipolePrefactor * rp;
    for (int iy = -n; iy <= n; ++iy) {
        for (int ix = -n; ix <= n; ++ix) {
            Vec3 p{ix * pitch, iy * pitch, dz};
            FluxMapRow row{p.x(), p.y(), {0.0, 0.0, 0.0}};
            try {
                Vec3 u = unit_moment_flux(path, p);
                for (int i = 0; i < 3; ++i) row.F[i] = scale * u[i];
            } catch (const SingularGeometryError&) {
                row.F = {std::nan(""), std::nan(""), std::nan("")};
            }
            rows.push_back(row);
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// locate_pickup

namespace {

struct SensitivityModel {
    LoopPath path;
    Vec3 per_alpha_scale;  // |dPhi_squid/di| per unit alpha and unit-moment flux, in Phi0/m

    SensitivityModel(const GradiometricLoop& geometry, const Vec3& b, double rp)
        : path(discretize(geometry)) {
        for (int i = 0; i < 3; ++i)
            per_alpha_scale[i] = kDipolePrefactor * rp * rp * rp * std::abs(b[i]) / phys::flux_quantum;
    }

    Vec3 at(const Vec3& p) const {
        return per_alpha_scale.cwiseProduct(unit_moment_flux(path, p).cwiseAbs());
    }
};

struct AlphaFit {
    double alpha;
    Eigen::Vector3d rel;  // (alpha s_i - m_i) / m_i
};

AlphaFit profile_alpha(const Vec3& s, const Vec3& measured, const Vec3& denom) {
    double num = 0.0, den = 0.0;
    for (int i = 0; i < 3; ++i) {
        double w = s[i] / denom[i];
        num += w * measured[i] / denom[i];
        den += w * w;
    }
    AlphaFit f{den > 0.0 ? num / den : 0.0, {}};
    for (int i = 0; i < 3; ++i) f.rel[i] = (f.alpha * s[i] - measured[i]) / denom[i];
    return f;
}

double misfit(const Vec3& s, double alpha, const Vec3& measured) {
    return (alpha * s - measured).norm() / measured.norm();
}

PlacementSolution mirror(const PlacementSolution& s, const SensitivityModel& model,
                         const Vec3& measured) {
    PlacementSolution m = s;
    m.offset = {-s.offset.x(), -s.offset.y(), s.offset.z()};
    m.residual = misfit(model.at(m.offset), m.alpha, measured);
    return m;
}

}  // namespace

LocateResult locate_pickup(const Vec3& measured_in, const Vec3& b, double rp,
                           const GradiometricLoop& geometry, double dz_prior,
                           const LocateOptions& opts) {
    if (!measured_in.allFinite()) throw ArgumentError("measured sensitivities must be finite");
    if (!(dz_prior > 0.0)) throw ArgumentError("dz prior must be positive");
    LocateResult out;
    const Vec3 measured = measured_in.cwiseAbs();
    const double mmax = measured.maxCoeff();
    if (!(mmax > 0.0)) return out;

    int ref = 0;
    measured.maxCoeff(&ref);
    const int oa = (ref + 1) % 3, ob = (ref + 2) % 3;
    const double target_a = measured[oa] / measured[ref];
    const double target_b = measured[ob] / measured[ref];

    // Stage 1: ratio scan with a coarse loop discretization.
    GradiometricLoop coarse = geometry;
    coarse.segments_per_side = std::max(8, opts.scan_segments_per_side);
    const SensitivityModel scan_model(coarse, b, rp);
    const int n = static_cast<int>(std::lround(opts.half_width / opts.pitch));
    const int side = 2 * n + 1;

    auto ratio_ok = [&](double model_ratio, double target) {
        if (target == 0.0) return model_ratio <= opts.ratio_tolerance;
        return std::abs(model_ratio / target - 1.0) <= opts.ratio_tolerance;
    };
    auto mismatch = [&](const Vec3& s) {
        double ra = s[oa] / s[ref], rb = s[ob] / s[ref];
        double ea = target_a > 0.0 ? ra / target_a - 1.0 : ra;
        double eb = target_b > 0.0 ? rb / target_b - 1.0 : rb;
        return ea * ea + eb * eb;
    };

    std::vector<double> cell_cost(static_cast<std::size_t>(side) * side,
                                  std::numeric_limits<double>::infinity());
    auto scan_rows = [&](int row_begin, int row_end) {
        for (int r = row_begin; r < row_end; ++r) {
            for (int c = 0; c < side; ++c) {
                Vec3 p{(c - n) * opts.pitch, (r - n) * opts.pitch, dz_prior};
                Vec3 s;
                try {
                    s = scan_model.at(p);
                } catch (const SingularGeometryError&) {
                    continue;
                }
                if (!(s[ref] > 0.0)) continue;
                if (ratio_ok(s[oa] / s[ref], target_a) && ratio_ok(s[ob] / s[ref], target_b))
                    cell_cost[static_cast<std::size_t>(r) * side + c] = mismatch(s);
            }
        }
    };
    const int workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    {
        std::vector<std::jthread> pool;
        const int chunk = (side + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            int r0 = w * chunk, r1 = std::min(side, r0 + chunk);
            if (r0 < r1) pool.emplace_back(scan_rows, r0, r1);
        }
    }

    // Connected components of matching cells; one seed per locus.
    std::vector<int> label(cell_cost.size(), -1);
    std::vector<std::size_t> seeds;
    for (std::size_t idx = 0; idx < cell_cost.size(); ++idx) {
        if (!std::isfinite(cell_cost[idx])) continue;
        out.matched_cells.push_back({(static_cast<int>(idx % side) - n) * opts.pitch,
                                     (static_cast<int>(idx / side) - n) * opts.pitch});
        if (label[idx] >= 0) continue;
        const int id = static_cast<int>(seeds.size());
        std::size_t best = idx;
        std::vector<std::size_t> stack{idx};
        label[idx] = id;
        while (!stack.empty()) {
            std::size_t cur = stack.back();
            stack.pop_back();
            if (cell_cost[cur] < cell_cost[best]) best = cur;
            const int r = static_cast<int>(cur / side), c = static_cast<int>(cur % side);
            const int nbr[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
            for (const auto& rc : nbr) {
                if (rc[0] < 0 || rc[0] >= side || rc[1] < 0 || rc[1] >= side) continue;
                std::size_t j = static_cast<std::size_t>(rc[0]) * side + rc[1];
                if (label[j] < 0 && std::isfinite(cell_cost[j])) {
                    label[j] = id;
                    stack.push_back(j);
                }
            }
        }
        seeds.push_back(best);
    }
    out.loci = static_cast<int>(seeds.size());

    // Stage 2: refine (dx, dy, dz) with alpha profiled out, at full resolution.
    const SensitivityModel model(geometry, b, rp);
    Vec3 denom = measured.cwiseMax(1e-6 * mmax);
    constexpr double um = 1e-6;

    std::vector<PlacementSolution> refined;
    for (std::size_t seed : seeds) {
        Eigen::VectorXd start(3);
        start << (static_cast<int>(seed % side) - n) * opts.pitch / um,
            (static_cast<int>(seed / side) - n) * opts.pitch / um, dz_prior / um;

        auto residual = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
            Eigen::VectorXd r(4);
            Vec3 s;
            try {
                s = model.at(Vec3{q[0], q[1], q[2]} * um);
            } catch (const SingularGeometryError&) {
                r.setConstant(1e6);
                return r;
            }
            AlphaFit f = profile_alpha(s, measured, denom);
            r.head<3>() = f.rel;
            r[3] = opts.prior_weight * (q[2] * um - dz_prior) / dz_prior;
            return r;
        };
        auto jac = [&](const Eigen::VectorXd& q) {
            return lsq::numeric_jacobian(residual, q, Eigen::VectorXd::Constant(3, 1e-4));
        };
        lsq::Result fit = lsq::levenberg_marquardt(residual, jac, start);

        PlacementSolution sol;
        sol.offset = Vec3{fit.params[0], fit.params[1], fit.params[2]} * um;
        if (!(sol.offset.z() > 0.0)) continue;
        Vec3 s;
        try {
            s = model.at(sol.offset);
        } catch (const SingularGeometryError&) {
            continue;
        }
        sol.alpha = profile_alpha(s, measured, denom).alpha;
        sol.residual = misfit(s, sol.alpha, measured);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(fit.jacobian);
        const auto& sv = svd.singularValues();
        sol.rank_deficient = !fit.converged || sv[sv.size() - 1] <= 1e-10 * sv[0];
        refined.push_back(sol);
    }

    // Canonicalize to the x > 0 half plane (y >= 0 on the axis), merge
    // duplicates, then emit each survivor with its exact point-symmetric image.
    std::vector<PlacementSolution> canon;
    for (const auto& s : refined) {
        bool upper = s.offset.x() > 0.0 || (s.offset.x() == 0.0 && s.offset.y() >= 0.0);
        PlacementSolution c = upper ? s : mirror(s, model, measured);
        auto dup = std::find_if(canon.begin(), canon.end(), [&](const PlacementSolution& o) {
            return (o.offset - c.offset).norm() < opts.merge_distance;
        });
        if (dup == canon.end()) {
            canon.push_back(c);
        } else if (c.residual < dup->residual) {
            *dup = c;
        }
    }
    std::stable_sort(canon.begin(), canon.end(), [](const auto& a, const auto& b) {
        if (a.residual != b.residual) return a.residual < b.residual;
        return a.offset.norm() < b.offset.norm();
    });
    for (const auto& c : canon) {
        const int i = static_cast<int>(out.solutions.size());
        out.solutions.push_back(c);
        if (c.offset.x() == 0.0 && c.offset.y() == 0.0) {
            out.solutions.back().symmetry_partner_index = i;
            continue;
        }
        out.solutions.push_back(mirror(c, model, measured));
        out.solutions[i].symmetry_partner_index = i + 1;
        out.solutions[i + 1].symmetry_partner_index = i;
    }
    return out;
}

}  // namespace levsense::flux
