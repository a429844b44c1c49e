#include <doctest.h>

#include <random>

#include "levsense/mech_trap.hpp"
#include "oracle.hpp"

using namespace levsense;
using namespace levsense::mech;
using oracle::rel;

namespace {
double omega_ref(double b, double rho) { return std::sqrt(3.0 / (2.0 * oracle::mu0 * rho)) * std::abs(b); }
}

TEST_SUITE("mech_trap") {

TEST_CASE("trap frequency at 1 A") {
    double w = trap_frequency(48.1, 1.09e4);
    CHECK(rel(w, omega_ref(48.1, 1.09e4)) < 1e-12);
    CHECK(rel(w / (2 * oracle::pi), 80.11) < 1e-3);
    CHECK(rel(w / (2 * oracle::pi), 80.0) < 0.02);
    CHECK(trap_frequency(0.0, 1.09e4) == 0.0);
    CHECK(rel(trap_frequency(24.05, 1.09e4), 0.5 * w) < 1e-14);
}

TEST_CASE("trap frequency rejects non-positive density") {
    CHECK_THROWS_AS(trap_frequency(10.0, 0.0), DomainError);
    CHECK_THROWS_AS(trap_frequency(10.0, -1.0), DomainError);
}

TEST_CASE("trap frequency homogeneity") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ub(1.0, 100.0), ur(1e3, 2e4), uc(0.1, 10.0);
    for (int i = 0; i < 5; ++i) {
        double b = ub(rng), rho = ur(rng), c = uc(rng);
        CHECK(rel(trap_frequency(c * b, rho), c * trap_frequency(b, rho)) < 1e-12);
        CHECK(rel(trap_frequency(b, c * rho), trap_frequency(b, rho) / std::sqrt(c)) < 1e-12);
    }
}

TEST_CASE("gradient from current") {
    TrapConfig cfg;
    Vec3 b = gradient_from_current(cfg);
    CHECK(b.x() == doctest::Approx(23.5));
    CHECK(b.y() == doctest::Approx(24.2));
    CHECK(b.z() == doctest::Approx(-48.1));
    cfg.current = 0.0;
    CHECK(gradient_from_current(cfg).norm() == 0.0);
    cfg.current = 2.0;
    CHECK((gradient_from_current(cfg) - 2.0 * b).norm() < 1e-12);
}

TEST_CASE("trap config validation") {
    TrapConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.quality = 0.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = TrapConfig{};
    cfg.gradient_per_ampere = Vec3(10.0, 10.0, 40.0);
    CHECK_THROWS_AS(cfg.validate(), DomainError);
    cfg = TrapConfig{};
    cfg.current = -1.0;
    CHECK_THROWS_AS(cfg.validate(), DomainError);
}

TEST_CASE("sphere mass is derived") {
    SphereParams s(50e-6, 1.09e4);
    double m = 4.0 / 3.0 * oracle::pi * std::pow(50e-6, 3) * 1.09e4;
    CHECK(rel(s.mass(), m) < 1e-9);
    CHECK_THROWS(SphereParams(0.0));
    CHECK_THROWS(SphereParams(1e-6, -1.0));
}

TEST_CASE("zero point motion") {
    double m = 5.7e-9;
    double x140 = zero_point_motion(m, 2 * oracle::pi * 140.0);
    double x70 = zero_point_motion(m, 2 * oracle::pi * 70.0);
    CHECK(rel(x140, std::sqrt(oracle::hbar / (2 * m * 2 * oracle::pi * 140.0))) < 1e-12);
    CHECK(x140 * 1e15 == doctest::Approx(3.2).epsilon(0.02));
    CHECK(x70 * 1e15 == doctest::Approx(4.6).epsilon(0.02));
    CHECK(rel(zero_point_motion(m, 4 * 2 * oracle::pi * 70.0), 0.5 * x70) < 1e-12);
    CHECK(rel(x140 * x140 * 2 * m * 2 * oracle::pi * 140.0, oracle::hbar) < 1e-12);
    CHECK_THROWS_AS(zero_point_motion(0.0, 1.0), DomainError);
    CHECK_THROWS_AS(zero_point_motion(1.0, 0.0), DomainError);
}

TEST_CASE("thermal occupation") {
    double n150 = thermal_occupation(15e-3, 2 * oracle::pi * 150.0);
    CHECK(rel(n150, oracle::kB * 15e-3 / (oracle::hbar * 2 * oracle::pi * 150.0)) < 1e-12);
    CHECK(n150 == doctest::Approx(2.08e6).epsilon(0.005));
    CHECK(rel(thermal_occupation(30e-3, 2 * oracle::pi * 150.0), 2 * n150) < 1e-12);
    CHECK(thermal_occupation(15e-3, 2 * oracle::pi * 140.0) == doctest::Approx(2.23e6).epsilon(0.005));
}

TEST_CASE("mode from config at 140 Hz") {
    TrapConfig cfg;
    SphereParams sphere(50e-6);
    // current such that the z mode sits at 140 Hz
    cfg.current = 2 * oracle::pi * 140.0 / omega_ref(48.1, sphere.density());
    MechMode z = mode_from_config(cfg, sphere, Axis::z);
    CHECK(z.frequency / (2 * oracle::pi) == doctest::Approx(140.0));
    CHECK(z.linewidth == doctest::Approx(3.38e-5).epsilon(0.005));
    CHECK(rel(z.xzpf, std::sqrt(oracle::hbar / (2 * sphere.mass() * z.frequency))) < 1e-9);
    CHECK(rel(z.eff_linewidth, z.linewidth * z.nth) < 1e-9);
    CHECK(z.eff_linewidth == doctest::Approx(75.5).epsilon(0.005));

    cfg.quality = 1e300;
    CHECK(mode_from_config(cfg, sphere, Axis::z).linewidth < 1e-290);
}

TEST_CASE("mode frequency ratios follow gradient ratios") {
    TrapConfig cfg;
    SphereParams sphere(50e-6);
    auto m = modes_from_config(cfg, sphere);
    CHECK(rel(m[2].frequency / m[0].frequency, 48.1 / 23.5) < 1e-14);
    CHECK(rel(m[1].frequency / m[0].frequency, 24.2 / 23.5) < 1e-14);
}

TEST_CASE("effective linewidth is independent of frequency") {
    TrapConfig cfg;
    SphereParams sphere(50e-6);
    double expect = oracle::kB * cfg.bath_temperature / (oracle::hbar * cfg.quality);
    for (double I : {0.5, 1.0, 1.7}) {
        cfg.current = I;
        CHECK(rel(mode_from_config(cfg, sphere, Axis::y).eff_linewidth, expect) < 1e-12);
    }
}

}
