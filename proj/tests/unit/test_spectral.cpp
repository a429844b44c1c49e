#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include "levsense/spectral.hpp"
#include "oracle.hpp"

using namespace levsense;
using namespace levsense::spectral;
using oracle::rel;

namespace {

constexpr double kTwoPi = 2 * oracle::pi;

std::vector<double> sine(double fs, std::size_t n, double f, double a, double phase = 0.0) {
    std::vector<double> x(n);
    for (std::size_t k = 0; k < n; ++k) x[k] = a * std::sin(kTwoPi * f * k / fs + phase);
    return x;
}

std::vector<double> white(double fs, std::size_t n, double sigma, std::uint64_t seed) {
    (void)fs;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    std::vector<double> x(n);
    for (auto& v : x) v = g(rng);
    return x;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
    }
    return d;
}

// tone record with the calibration tone on a bin centre of a 12 s segment
SpectrumRecord tone_record(double tone_amp, double noise_sigma, std::uint64_t seed) {
    const double fs = 1000.0;
    const std::size_t n = 120000;
    auto x = white(fs, n, noise_sigma, seed);
    auto t = sine(fs, n, 223.0, tone_amp);
    for (std::size_t k = 0; k < n; ++k) x[k] += t[k];
    return welch_psd(x, fs);
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("Hamming ENBW") {
    const double fs = 1000.0;
    auto rec = welch_psd(white(fs, 120000, 1.0, 1), fs);
    double s1 = 0.0, s2 = 0.0;
    const std::size_t L = 12000;
    for (std::size_t k = 0; k < L; ++k) {
        double w = 0.54 - 0.46 * std::cos(kTwoPi * k / L);
        s1 += w;
        s2 += w * w;
    }
    CHECK(rel(rec.enbw, fs * s2 / (s1 * s1)) < 1e-9);
    CHECK(rec.enbw == doctest::Approx(0.1136).epsilon(1e-3));
    CHECK(rec.enbw == doctest::Approx(0.114).epsilon(0.01));
    for (std::size_t len : {256u, 1000u, 4096u})
        CHECK(rel(enbw(hamming(len), fs), 1.3628 * fs / len) < 1e-3);
}

TEST_CASE("sine at bin centre") {
    const double fs = 1000.0;
    auto rec = welch_psd(sine(fs, 120000, 125.0, 0.3, 0.4), fs);
    auto p = find_peak(rec, 125.0);
    CHECK(p.freq == doctest::Approx(125.0));
    CHECK(rel(p.ps, 0.3 * 0.3 / 2) < 1e-3);
    CHECK(rel(p.psd, p.ps / rec.enbw) < 1e-9);
}

TEST_CASE("white noise level and Parseval") {
    const double fs = 2000.0, sigma = 0.7;
    auto x = white(fs, 240000, sigma, 9);
    auto rec = welch_psd(x, fs);
    std::vector<double> inner(rec.psd.begin() + 1, rec.psd.end() - 1);
    double mean = std::accumulate(inner.begin(), inner.end(), 0.0) / inner.size();
    CHECK(rel(mean, 2 * sigma * sigma / fs) < 0.05);

    double integral = std::accumulate(rec.psd.begin(), rec.psd.end(), 0.0) * rec.bin_width();
    double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double var = 0.0;
    for (double v : x) var += (v - m) * (v - m);
    var /= x.size();
    CHECK(rel(integral, var) < 0.01);
}

TEST_CASE("Welch argument errors") {
    std::vector<double> x(100, 1.0);
    WelchOptions o;
    o.segment_length = 200;
    CHECK_THROWS_AS(welch_psd(x, 10.0, o), ArgumentError);
    CHECK_THROWS_AS(welch_psd(x, 0.0), ArgumentError);
}

TEST_CASE("Welch invariant under circular shift") {
    const double fs = 1000.0;
    auto x = white(fs, 60000, 1.0, 4);
    auto base = welch_psd(x, fs).psd;
    std::mt19937_64 rng(8);
    std::uniform_int_distribution<std::size_t> u(1, x.size() - 1);
    const double crit = 1.63 * std::sqrt(2.0 / base.size());
    for (int s = 0; s < 20; ++s) {
        auto y = x;
        std::rotate(y.begin(), y.begin() + u(rng), y.end());
        CHECK(ks_statistic(base, welch_psd(y, fs).psd) < crit);
    }
}

TEST_CASE("unwrap and rewrap") {
    // excursion of a few cycles on a 2^-40 grid keeps every unwrapped value
    // exactly representable
    std::vector<double> w(5000);
    for (std::size_t k = 0; k < w.size(); ++k) {
        double q = std::ldexp(std::nearbyint(std::ldexp(40.0 * std::sin(0.003 * k), 40)), -40);
        w[k] = std::remainder(q, kTwoPi);
    }
    auto back = rewrap_phase(unwrap_phase(w));
    REQUIRE(back.size() == w.size());
    CHECK(std::memcmp(back.data(), w.data(), w.size() * sizeof(double)) == 0);

    // ramp crossing +-pi many times
    std::vector<double> ramp(2000);
    for (std::size_t k = 0; k < ramp.size(); ++k) ramp[k] = std::remainder(0.9 * k + 0.1, kTwoPi);
    auto un = unwrap_phase(ramp);
    for (std::size_t k = 1; k < un.size(); ++k) CHECK(std::abs(un[k] - un[k - 1] - 0.9) < 1e-9);
}

TEST_CASE("quasi-heterodyne phase") {
    SynthConfig c;
    c.duration = 20.0;
    TimeTrace flat = synth_trace(c);
    auto ph = quasi_heterodyne_phase(flat, c.carrier_freq);
    double m = std::accumulate(ph.begin(), ph.end(), 0.0) / ph.size();
    double var = 0.0;
    for (double v : ph) var += (v - m) * (v - m);
    CHECK(var / ph.size() < 1e-20);

    SynthConfig pm;
    pm.tones = {{100.0, 0.1}};
    auto p = quasi_heterodyne_phase(synth_trace(pm), pm.carrier_freq);
    auto rec = welch_psd(p, pm.sample_rate);
    CHECK(rel(find_peak(rec, 100.0).ps, 0.1 * 0.1 / 2) < 0.01);
    CHECK_THROWS_AS(quasi_heterodyne_phase(flat, 1500.0), ArgumentError);
}

TEST_CASE("calibration coil flux") {
    CalibrationChain chain;
    CHECK(rel(chain.cal_coil_flux(), 0.0217 / 0.467) < 1e-12);
    CHECK(chain.cal_coil_flux() == doctest::Approx(0.0465).epsilon(1e-3));
}

TEST_CASE("flux-axis calibration") {
    CalibrationChain chain;
    chain.cal_tone_amplitude = 2.0;
    auto rec = tone_record(0.01, 1e-3, 3);
    auto cal = calibrate_flux_axis(rec, chain);
    CHECK(cal.units == Units::flux2_per_hz);
    double flux = chain.injected_flux_amplitude();
    CHECK(rel(find_peak(cal, 223.0).ps, flux * flux / 2) < 1e-6);

    // doubling the tone leaves the calibrated floor unchanged
    auto rec2 = tone_record(0.02, 1e-3, 3);
    auto x1 = calibrate_flux_axis(rec, chain), x2 = calibrate_flux_axis(rec2, chain);
    double ratio = (x2.psd[rec.nearest_bin(300.0)] / x1.psd[rec.nearest_bin(300.0)]);
    CHECK(std::abs(ratio - 0.25) / 0.25 < 0.005);

    auto none = welch_psd(white(1000.0, 120000, 1e-3, 5), 1000.0);
    CHECK_THROWS_AS(calibrate_flux_axis(none, chain), CalibrationError);
}

TEST_CASE("calibration floor scale invariance at fixed injected flux") {
    CalibrationChain chain;
    auto a = calibrate_flux_axis(tone_record(0.01, 1e-3, 3), chain);
    auto b = calibrate_flux_axis(tone_record(0.02, 2e-3, 3), chain);
    // signal and noise scaled together: calibrated spectrum identical
    for (double f : {80.0, 223.0, 300.0}) CHECK(rel(b.psd[b.nearest_bin(f)], a.psd[a.nearest_bin(f)]) < 1e-9);
}

TEST_CASE("full chain linearity") {
    CalibrationChain chain;
    auto raw = tone_record(0.01, 1e-3, 6);
    auto scaled = raw;
    for (auto& v : scaled.psd) v *= 9.0;
    for (std::size_t k = 0; k < raw.psd.size(); k += 997) CHECK(rel(scaled.psd[k], 9.0 * raw.psd[k]) < 1e-15);
    auto a = calibrate_flux_axis(raw, chain), b = calibrate_flux_axis(scaled, chain);
    for (std::size_t k = 1; k < raw.psd.size(); k += 997) CHECK(rel(b.psd[k], a.psd[k]) < 1e-12);
}

TEST_CASE("flux to frequency") {
    SpectrumRecord s;
    s.freq = {0.0, 1.0, 2.0};
    s.psd = {3.46e-6, 1.0, 0.0};
    s.enbw = 0.1;
    s.units = Units::flux2_per_hz;
    auto w = flux_to_frequency(s, 188e6);
    CHECK(w.units == Units::hz2_per_hz);
    CHECK(std::sqrt(w.psd[0]) == doctest::Approx(0.35e6).epsilon(0.01));
    CHECK(rel(w.psd[0], 3.46e-6 * 188e6 * 188e6) < 1e-12);
    CHECK(w.psd[2] == 0.0);
    auto w2 = flux_to_frequency(s, 376e6);
    CHECK(rel(w2.psd[1], 4 * w.psd[1]) < 1e-12);
    s.units = Units::volt2_per_hz;
    CHECK_THROWS_AS(flux_to_frequency(s, 188e6), ArgumentError);
}

TEST_CASE("displacement calibration") {
    const double fs = 1000.0;
    auto x = white(fs, 120000, 1e-4, 12);
    auto t = sine(fs, x.size(), 70.0, 0.05);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += t[k];
    auto rec = welch_psd(x, fs);
    auto sxx = calibrate_displacement(rec, 740e-9, 70.0);
    CHECK(sxx.units == Units::m2_per_hz);
    CHECK(rel(find_peak(sxx, 70.0).ps, 740e-9 * 740e-9 / 2) < 1e-9);
    CHECK_THROWS_AS(calibrate_displacement(rec, 0.0, 70.0), CalibrationError);
    CHECK_THROWS_AS(calibrate_displacement(rec, 740e-9, 170.0), CalibrationError);
}

TEST_CASE("coupling extraction") {
    double sww = 0.35e6 * 0.35e6, sxx = 2.2e-6 * 2.2e-6;
    auto c = extract_coupling(sww, sxx, 4.6e-15);
    CHECK(rel(c.G_over_2pi, 0.35e6 / 2.2e-6) < 1e-12);
    CHECK(c.G_over_2pi == doctest::Approx(0.16e12).epsilon(0.01));
    CHECK(rel(c.g0_over_2pi, c.G_over_2pi * 4.6e-15) < 1e-12);
    auto s = extract_coupling(7.0 * sww, 7.0 * sxx);
    CHECK(rel(s.G_over_2pi, c.G_over_2pi) < 1e-15);
    CHECK_THROWS_AS(extract_coupling(sww, 0.0), DivergenceError);
}

TEST_CASE("imprecision floor") {
    const double fs = 1000.0, sigma = 1e-3;
    auto x = white(fs, 120000, sigma, 21);
    for (double f : {70.0, 133.0, 223.0}) {
        auto t = sine(fs, x.size(), f, 0.05);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] += t[k];
    }
    for (double f : {50.0, 100.0, 150.0}) {
        auto t = sine(fs, x.size(), f, 0.01);
        for (std::size_t k = 0; k < x.size(); ++k) x[k] += t[k];
    }
    auto rec = welch_psd(x, fs);
    FloorExclusions ex;
    ex.peaks = {70.0, 133.0, 223.0};
    // median of a chi-square(2K) averaged floor sits slightly below the mean
    double floor = imprecision_floor(rec, 30.0, 400.0, ex);
    CHECK(rel(floor, 2 * sigma * sigma / fs) < 0.03);
    CHECK_THROWS_AS(imprecision_floor(rec, 49.0, 51.0, ex), ArgumentError);
    CHECK_THROWS_AS(imprecision_floor(rec, 5.0, 25.0, ex), ArgumentError);
}

TEST_CASE("synthetic trace") {
    SynthConfig c;
    c.carrier_freq = 0.0;
    c.duration = 2.0;
    auto t = synth_trace(c);
    CHECK(std::all_of(t.i.begin(), t.i.end(), [&](double v) { return v == t.i[0]; }));
    CHECK(std::all_of(t.q.begin(), t.q.end(), [&](double v) { return v == t.q[0]; }));

    SynthConfig n;
    n.duration = 5.0;
    n.phase_noise_psd = 1e-8;
    n.seed = 77;
    auto a = synth_trace(n), b = synth_trace(n);
    CHECK(std::memcmp(a.i.data(), b.i.data(), a.i.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(a.q.data(), b.q.data(), a.q.size() * sizeof(double)) == 0);
    n.seed = 78;
    CHECK(synth_trace(n).i != a.i);

    SynthConfig alias;
    alias.tones = {{1200.0, 0.1}};
    CHECK_THROWS_AS(synth_trace(alias), ArgumentError);
    SynthConfig edge;
    edge.carrier_freq = 900.0;
    edge.tones = {{150.0, 0.1}};
    CHECK_THROWS_AS(synth_trace(edge), ArgumentError);
}

TEST_CASE("single mode through synthesis") {
    SynthConfig c;
    c.tones = {{140.0, 0.02}};
    auto rec = welch_psd(quasi_heterodyne_phase(synth_trace(c), c.carrier_freq), c.sample_rate);
    auto p = find_peak(rec, 140.0);
    CHECK(p.freq == doctest::Approx(140.0));
    CHECK(rel(p.ps, 0.02 * 0.02 / 2) < 0.01);
}

TEST_CASE("scenario end to end") {
    const Scenario sc = reference_scenario();
    auto tr = synth_trace(sc.to_synth(2000.0, 120.0, 400.0, 11));
    auto raw = welch_psd(quasi_heterodyne_phase(tr, 400.0), tr.sample_rate);
    const double bin = raw.bin_width();
    std::vector<double> expected{sc.chain.cal_tone_freq, sc.phase_mod.freq};
    for (const auto& m : sc.modes) expected.push_back(m.freq);
    for (const auto& m : sc.mains) expected.push_back(m.freq);
    for (double f : expected) CHECK(std::abs(find_peak(raw, f).freq - f) <= bin);

    auto sww = flux_to_frequency(calibrate_flux_axis(raw, sc.chain), sc.slope);
    const auto& y = sc.modes[1];
    auto sxx = calibrate_displacement(raw, y.amplitude, y.freq);
    auto c = extract_coupling(sww, sxx, y.freq);
    CHECK(rel(c.G_over_2pi, y.coupling_over_2pi) < 0.02);

    FloorExclusions ex;
    for (const auto& m : sc.modes) ex.peaks.push_back(m.freq);
    ex.peaks.push_back(sc.chain.cal_tone_freq);
    ex.peaks.push_back(sc.phase_mod.freq);
    CHECK(rel(imprecision_floor(sxx, 30.0, 300.0, ex), sc.displacement_floor(1)) < 0.05);
    CHECK(std::sqrt(sc.displacement_floor(1)) == doctest::Approx(102e-9).epsilon(0.01));
}

TEST_CASE("coupling estimate is unbiased over seeds") {
    // single runs scatter by about 1.5% at this peak-to-floor ratio
    const Scenario sc = reference_scenario();
    const auto& y = sc.modes[1];
    double sum = 0.0;
    const int seeds = 12;
    for (int s = 1; s <= seeds; ++s) {
        auto tr = synth_trace(sc.to_synth(2000.0, 120.0, 400.0, s));
        auto raw = welch_psd(quasi_heterodyne_phase(tr, 400.0), tr.sample_rate);
        auto sww = flux_to_frequency(calibrate_flux_axis(raw, sc.chain), sc.slope);
        sum += extract_coupling(sww, calibrate_displacement(raw, y.amplitude, y.freq), y.freq).G_over_2pi;
    }
    CHECK(rel(sum / seeds, y.coupling_over_2pi) < 0.005);
}

TEST_CASE("units tags") {
    for (Units u : {Units::volt2_per_hz, Units::flux2_per_hz, Units::hz2_per_hz, Units::m2_per_hz})
        CHECK(units_from_tag(units_tag(u)) == u);
    CHECK_THROWS_AS(units_from_tag("furlongs"), ArgumentError);
}

}
