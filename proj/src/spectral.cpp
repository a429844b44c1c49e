#include "levsense/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <random>
#include <string>

#include <fftw3.h>

namespace levsense::spectral {

std::string_view units_tag(Units u) {
    switch (u) {
        case Units::volt2_per_hz: return "V^2/Hz";
        case Units::flux2_per_hz: return "Phi0^2/Hz";
        case Units::hz2_per_hz: return "Hz^2/Hz";
        case Units::m2_per_hz: return "m^2/Hz";
    }
    return "?";
}

Units units_from_tag(std::string_view tag) {
    for (Units u : {Units::volt2_per_hz, Units::flux2_per_hz, Units::hz2_per_hz, Units::m2_per_hz})
        if (units_tag(u) == tag) return u;
    throw ArgumentError("unknown spectrum units tag '" + std::string(tag) + "'");
}

double TimeTrace::duration() const {
    return sample_rate > 0.0 ? static_cast<double>(i.size()) / sample_rate : 0.0;
}

void TimeTrace::validate() const {
    if (!(sample_rate > 0.0)) throw ArgumentError("sample rate must be positive");
    if (i.size() != q.size()) throw ArgumentError("I and Q channels differ in length");
}

double SpectrumRecord::bin_width() const {
    return freq.size() > 1 ? freq[1] - freq[0] : 0.0;
}

std::size_t SpectrumRecord::nearest_bin(double f) const {
    if (freq.empty()) throw ArgumentError("empty spectrum");
    double df = bin_width();
    long k = df > 0.0 ? std::lround((f - freq.front()) / df) : 0;
    return static_cast<std::size_t>(std::clamp<long>(k, 0, static_cast<long>(freq.size()) - 1));
}

Peak find_peak(const SpectrumRecord& s, double f, int search_bins) {
    const std::size_t c = s.nearest_bin(f);
    std::size_t lo = c >= static_cast<std::size_t>(search_bins) ? c - search_bins : 0;
    std::size_t hi = std::min(s.psd.size() - 1, c + search_bins);
    std::size_t best = lo;
    for (std::size_t k = lo; k <= hi; ++k)
        if (s.psd[k] > s.psd[best]) best = k;
    return {best, s.freq[best], s.psd[best] * s.enbw, s.psd[best]};
}

double peak_snr(const SpectrumRecord& s, const Peak& p, int window) {
    constexpr std::size_t guard = 3;
    std::vector<double> around;
    const std::size_t n = s.psd.size();
    for (std::size_t d = guard + 1; d <= guard + static_cast<std::size_t>(window); ++d) {
        if (p.bin >= d) around.push_back(s.psd[p.bin - d]);
        if (p.bin + d < n) around.push_back(s.psd[p.bin + d]);
    }
    if (around.empty()) return 0.0;
    auto mid = around.begin() + static_cast<long>(around.size() / 2);
    std::nth_element(around.begin(), mid, around.end());
    return *mid > 0.0 ? p.psd / *mid : HUGE_VAL;
}

std::vector<double> hamming(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t k = 0; k < n; ++k)
        w[k] = 0.54 - 0.46 * std::cos(phys::two_pi * static_cast<double>(k) / static_cast<double>(n));
    return w;
}

double enbw(const std::vector<double>& window, double sample_rate) {
    double s1 = 0.0, s2 = 0.0;
    for (double v : window) {
        s1 += v;
        s2 += v * v;
    }
    return sample_rate * s2 / (s1 * s1);
}

namespace {

struct FftwPlanDeleter {
    void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

SpectrumRecord welch_psd(const std::vector<double>& x, double sample_rate, const WelchOptions& opts,
                         Units units) {
    if (!(sample_rate > 0.0)) throw ArgumentError("sample rate must be positive");
    const std::size_t n = x.size();
    const std::size_t seg = opts.segment_length ? opts.segment_length : n / 10;
    if (seg < 2 || seg > n) throw ArgumentError("segment length must lie in [2, record length]");
    if (!(opts.overlap >= 0.0 && opts.overlap < 1.0)) throw ArgumentError("overlap must lie in [0, 1)");
    const std::size_t step = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(static_cast<double>(seg) * (1.0 - opts.overlap))));
    const std::size_t nseg = (n - seg) / step + 1;
    if (nseg < 2) throw ArgumentError("Welch needs at least two segments");

    const std::vector<double> w = hamming(seg);
    double s2 = 0.0;
    for (double v : w) s2 += v * v;

    const std::size_t nbins = seg / 2 + 1;
    std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * seg)));
    std::unique_ptr<fftw_complex, FftwFree> out(
        static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * nbins)));
    std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(
        fftw_plan_dft_r2c_1d(static_cast<int>(seg), in.get(), out.get(), FFTW_ESTIMATE));

    std::vector<double> acc(nbins, 0.0);
    for (std::size_t s = 0; s < nseg; ++s) {
        const double* src = x.data() + s * step;
        double mean = 0.0;
        for (std::size_t k = 0; k < seg; ++k) mean += src[k];
        mean /= static_cast<double>(seg);
        for (std::size_t k = 0; k < seg; ++k) in.get()[k] = (src[k] - mean) * w[k];
        fftw_execute(plan.get());
        for (std::size_t k = 0; k < nbins; ++k) {
            const double re = out.get()[k][0], im = out.get()[k][1];
            acc[k] += re * re + im * im;
        }
    }

    SpectrumRecord r;
    r.units = units;
    r.enbw = enbw(w, sample_rate);
    r.freq.resize(nbins);
    r.psd.resize(nbins);
    const double norm = 1.0 / (sample_rate * s2 * static_cast<double>(nseg));
    for (std::size_t k = 0; k < nbins; ++k) {
        r.freq[k] = static_cast<double>(k) * sample_rate / static_cast<double>(seg);
        bool edge = k == 0 || (seg % 2 == 0 && k == nbins - 1);
        r.psd[k] = acc[k] * norm * (edge ? 1.0 : 2.0);
    }
    return r;
}

std::vector<double> unwrap_phase(const std::vector<double>& wrapped) {
    std::vector<double> out(wrapped.size());
    long cycles = 0;
    for (std::size_t k = 0; k < wrapped.size(); ++k) {
        if (k > 0) {
            double jump = wrapped[k] - wrapped[k - 1];
            if (jump > phys::pi) --cycles;
            else if (jump < -phys::pi) ++cycles;
        }
        out[k] = wrapped[k] + static_cast<double>(cycles) * phys::two_pi;
    }
    return out;
}

std::vector<double> rewrap_phase(const std::vector<double>& unwrapped) {
    std::vector<double> out(unwrapped.size());
    for (std::size_t k = 0; k < unwrapped.size(); ++k)
        out[k] = std::remainder(unwrapped[k], phys::two_pi);
    return out;
}

std::vector<double> quasi_heterodyne_phase(const TimeTrace& trace, double mix_freq) {
    trace.validate();
    if (!(std::abs(mix_freq) < 0.5 * trace.sample_rate))
        throw ArgumentError("mixing frequency must lie below Nyquist");
    std::vector<double> wrapped(trace.i.size());
    for (std::size_t k = 0; k < wrapped.size(); ++k) {
        // Reduce the mixer phase modulo one cycle before scaling by 2 pi.
        double cyc = std::fmod(mix_freq * static_cast<double>(k), trace.sample_rate) / trace.sample_rate;
        std::complex<double> lo = std::polar(1.0, -phys::two_pi * cyc);
        std::complex<double> z = std::complex<double>(trace.i[k], trace.q[k]) * lo;
        wrapped[k] = std::arg(z);
    }
    return unwrap_phase(wrapped);
}

namespace {

SpectrumRecord scaled(const SpectrumRecord& in, double factor, Units units) {
    SpectrumRecord out = in;
    out.units = units;
    for (double& v : out.psd) v *= factor;
    out.power_peaks.clear();
    for (auto& [f, ps] : in.power_peaks) out.power_peaks[f] = ps * factor;
    return out;
}

}  // namespace

SpectrumRecord calibrate_flux_axis(const SpectrumRecord& spectrum, const CalibrationChain& chain,
                                   double min_snr) {
    const Peak tone = find_peak(spectrum, chain.cal_tone_freq);
    if (!(peak_snr(spectrum, tone) >= min_snr) || !(tone.ps > 0.0))
        throw CalibrationError("calibration tone not found at " + std::to_string(chain.cal_tone_freq) + " Hz");
    const double flux = chain.injected_flux_amplitude();
    const double factor = 0.5 * flux * flux / tone.ps;
    SpectrumRecord out = scaled(spectrum, factor, Units::flux2_per_hz);
    out.power_peaks[tone.freq] = tone.ps * factor;
    return out;
}

SpectrumRecord flux_to_frequency(const SpectrumRecord& spectrum, double slope) {
    if (spectrum.units != Units::flux2_per_hz)
        throw ArgumentError("flux_to_frequency expects a Phi0^2/Hz spectrum");
    if (!(slope > 0.0)) throw DomainError("flux responsivity must be positive");
    return scaled(spectrum, slope * slope, Units::hz2_per_hz);
}

SpectrumRecord calibrate_displacement(const SpectrumRecord& spectrum, double amplitude,
                                      double mode_freq, double min_snr) {
    if (!(amplitude > 0.0)) throw CalibrationError("displacement amplitude must be positive");
    const Peak p = find_peak(spectrum, mode_freq);
    if (!(peak_snr(spectrum, p) >= min_snr) || !(p.ps > 0.0))
        throw CalibrationError("mechanical peak not found at " + std::to_string(mode_freq) + " Hz");
    const double factor = 0.5 * amplitude * amplitude / p.ps;
    SpectrumRecord out = scaled(spectrum, factor, Units::m2_per_hz);
    out.power_peaks[p.freq] = p.ps * factor;
    return out;
}

Coupling extract_coupling(double sww_at_mode, double sxx_at_mode, double xzpf) {
    if (!(sxx_at_mode > 0.0)) throw DivergenceError("displacement density at the mode is zero");
    if (sww_at_mode < 0.0) throw DomainError("frequency-noise density must be non-negative");
    double g = std::sqrt(sww_at_mode / sxx_at_mode);
    return {g, g * xzpf};
}

Coupling extract_coupling(const SpectrumRecord& sww, const SpectrumRecord& sxx, double mode_freq,
                          double xzpf) {
    if (sww.units != Units::hz2_per_hz || sxx.units != Units::m2_per_hz)
        throw ArgumentError("extract_coupling expects Hz^2/Hz and m^2/Hz spectra");
    const Peak px = find_peak(sxx, mode_freq);
    const Peak pw = find_peak(sww, mode_freq);
    if (std::abs(px.freq - pw.freq) > 0.5 * sxx.bin_width())
        throw ArgumentError("frequency and displacement peaks fall in different bins");
    return extract_coupling(pw.psd, px.psd, xzpf);
}

double imprecision_floor(const SpectrumRecord& spectrum, double band_lo, double band_hi,
                         const FloorExclusions& ex) {
    std::vector<double> kept;
    for (std::size_t k = 0; k < spectrum.freq.size(); ++k) {
        const double f = spectrum.freq[k];
        if (f < band_lo || f > band_hi) continue;
        if (f < ex.vibration_cutoff) continue;
        if (ex.mains_base > 0.0) {
            double nearest = std::round(f / ex.mains_base) * ex.mains_base;
            if (nearest > 0.0 && std::abs(f - nearest) <= ex.mains_half_width) continue;
        }
        bool hit = std::any_of(ex.peaks.begin(), ex.peaks.end(),
                               [&](double p) { return std::abs(f - p) <= ex.peak_half_width; });
        if (hit) continue;
        kept.push_back(spectrum.psd[k]);
    }
    if (kept.empty()) throw ArgumentError("no bins left in the floor band after exclusions");
    auto mid = kept.begin() + static_cast<long>(kept.size() / 2);
    std::nth_element(kept.begin(), mid, kept.end());
    if (kept.size() % 2 == 1) return *mid;
    double upper = *mid;
    double lower = *std::max_element(kept.begin(), mid);
    return 0.5 * (lower + upper);
}

TimeTrace synth_trace(const SynthConfig& cfg) {
    if (!(cfg.sample_rate > 0.0 && cfg.duration > 0.0))
        throw ArgumentError("sample rate and duration must be positive");
    const double nyq = 0.5 * cfg.sample_rate;
    for (const Tone& t : cfg.tones) {
        if (std::abs(cfg.carrier_freq) + t.freq >= nyq)
            throw ArgumentError("tone at " + std::to_string(t.freq) +
                                " Hz aliases: carrier + tone must stay below Nyquist");
    }
    if (std::abs(cfg.carrier_freq) >= nyq) throw ArgumentError("carrier above Nyquist");
    if (cfg.phase_noise_psd < 0.0) throw ArgumentError("phase noise density must be non-negative");

    const auto n = static_cast<std::size_t>(std::llround(cfg.duration * cfg.sample_rate));
    TimeTrace tr;
    tr.sample_rate = cfg.sample_rate;
    tr.i.resize(n);
    tr.q.resize(n);

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double sigma = std::sqrt(cfg.phase_noise_psd * nyq);

    for (std::size_t k = 0; k < n; ++k) {
        const double kk = static_cast<double>(k);
        double phi = 0.0;
        for (const Tone& t : cfg.tones) {
            double cyc = std::fmod(t.freq * kk, cfg.sample_rate) / cfg.sample_rate;
            phi += t.phase_amplitude * std::sin(phys::two_pi * cyc + t.phase0);
        }
        if (sigma > 0.0) phi += sigma * gauss(rng);
        double carrier = phys::two_pi * std::fmod(cfg.carrier_freq * kk, cfg.sample_rate) / cfg.sample_rate;
        tr.i[k] = cfg.carrier_amplitude * std::cos(carrier + phi);
        tr.q[k] = cfg.carrier_amplitude * std::sin(carrier + phi);
    }
    return tr;
}

double Scenario::mode_phase_amplitude(std::size_t k) const {
    const ScenarioMode& m = modes.at(k);
    return phase_per_flux * m.coupling_over_2pi * m.amplitude / slope;
}

double Scenario::displacement_floor(std::size_t k) const {
    const double phase_per_m = phase_per_flux * modes.at(k).coupling_over_2pi / slope;
    return phase_noise_psd / (phase_per_m * phase_per_m);
}

SynthConfig Scenario::to_synth(double sample_rate, double duration, double carrier_freq,
                               std::uint64_t seed) const {
    SynthConfig c;
    c.sample_rate = sample_rate;
    c.duration = duration;
    c.carrier_freq = carrier_freq;
    c.seed = seed;
    c.phase_noise_psd = phase_noise_psd;
    for (std::size_t k = 0; k < modes.size(); ++k)
        c.tones.push_back({modes[k].freq, mode_phase_amplitude(k), 0.3 * static_cast<double>(k + 1)});
    c.tones.push_back({chain.cal_tone_freq, phase_per_flux * chain.injected_flux_amplitude(), 0.1});
    if (phase_mod.phase_amplitude > 0.0) c.tones.push_back(phase_mod);
    for (const Tone& t : mains) c.tones.push_back(t);
    return c;
}

Scenario reference_scenario() {
    Scenario s;
    s.slope = 188e6;
    // G/2pi from (70, 800, 80) Phi0/m at 188 MHz/Phi0; y at the 740 nm drive.
    s.modes = {{69.0, 500e-9, 70.0 * 188e6},
               {70.0, 740e-9, 800.0 * 188e6},
               {140.0, 500e-9, 80.0 * 188e6}};
    // White phase floor equivalent to 102 nm/rtHz on the y mode.
    const double phase_per_m = s.phase_per_flux * s.modes[1].coupling_over_2pi / s.slope;
    s.phase_noise_psd = std::pow(102e-9 * phase_per_m, 2);
    return s;
}

}  // namespace levsense::spectral
