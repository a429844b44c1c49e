// spectral.hpp - time series to calibrated spectral densities.
//
// Conventions: one-sided densities; DC and Nyquist bins are not doubled.
// PS (power spectrum, units^2) and PSD (units^2/Hz) are related through the
// window's equivalent noise bandwidth: PSD = PS / ENBW. A sinusoid of
// amplitude A centred on a bin reads PS = A^2 / 2.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "levsense/common.hpp"

namespace levsense::spectral {

enum class Units { volt2_per_hz, flux2_per_hz, hz2_per_hz, m2_per_hz };

std::string_view units_tag(Units u);
Units units_from_tag(std::string_view tag);

struct TimeTrace {
    double sample_rate = 0.0;  // Hz
    std::vector<double> i;     // V
    std::vector<double> q;     // V

    double duration() const;
    void validate() const;
};

struct SpectrumRecord {
    std::vector<double> freq;   // Hz
    std::vector<double> psd;    // one-sided density
    double enbw = 0.0;          // Hz
    Units units = Units::volt2_per_hz;
    std::map<double, double> power_peaks;  // frequency -> PS (units^2)

    double bin_width() const;
    std::size_t nearest_bin(double f) const;
};

struct Peak {
    std::size_t bin;
    double freq;
    double ps;   // PSD * ENBW
    double psd;
};

/// Largest bin within +-search_bins of the nominal frequency.
Peak find_peak(const SpectrumRecord& s, double f, int search_bins = 2);

/// Peak PSD over the median of the surrounding bins (a guard of 3 bins each
/// side is skipped).
double peak_snr(const SpectrumRecord& s, const Peak& p, int window = 25);

/// Periodic (DFT-even) Hamming window.
std::vector<double> hamming(std::size_t n);

/// fs * sum(w^2) / sum(w)^2
double enbw(const std::vector<double>& window, double sample_rate);

struct WelchOptions {
    std::size_t segment_length = 0;  // 0: one tenth of the record
    double overlap = 0.5;
};

SpectrumRecord welch_psd(const std::vector<double>& x, double sample_rate,
                         const WelchOptions& opts = {}, Units units = Units::volt2_per_hz);

/// Adds +-2 pi whenever successive samples jump by more than pi.
std::vector<double> unwrap_phase(const std::vector<double>& wrapped);

/// Maps unwrapped phase back into [-pi, pi] with an exact IEEE remainder.
std::vector<double> rewrap_phase(const std::vector<double>& unwrapped);

/// Mixes I + iQ with exp(-i 2 pi f_mix t) and returns the unwrapped phase.
std::vector<double> quasi_heterodyne_phase(const TimeTrace& trace, double mix_freq);

struct CalibrationChain {
    double ext_coil_periodicity = 0.467;  // V per Phi0
    double cal_coil_ratio = 0.0217;       // V(ext) per V(cal)
    double cal_tone_freq = 223.0;         // Hz
    double cal_tone_amplitude = 1.0;      // V, peak

    double cal_coil_flux() const { return cal_coil_ratio / ext_coil_periodicity; }  // Phi0/V
    double injected_flux_amplitude() const { return cal_coil_flux() * cal_tone_amplitude; }
};

/// V^2/Hz -> Phi0^2/Hz using the calibration tone. The tone's calibrated PS
/// equals the mean square (A^2/2) of the injected flux.
SpectrumRecord calibrate_flux_axis(const SpectrumRecord& spectrum, const CalibrationChain& chain,
                                   double min_snr = 3.0);

/// Phi0^2/Hz -> Hz^2/Hz (cyclic frequency noise) for slope in Hz/Phi0.
SpectrumRecord flux_to_frequency(const SpectrumRecord& spectrum, double slope);

/// Scales the spectrum so PS at the mode equals amplitude^2 / 2 (m^2).
SpectrumRecord calibrate_displacement(const SpectrumRecord& spectrum, double amplitude,
                                      double mode_freq, double min_snr = 3.0);

struct Coupling {
    double G_over_2pi;   // Hz/m
    double g0_over_2pi;  // Hz
};

/// G/2pi = sqrt(S_ww(Omega_m) / S_xx(Omega_m)) with S_ww in Hz^2/Hz.
Coupling extract_coupling(double sww_at_mode, double sxx_at_mode, double xzpf = 0.0);

/// Reads both spectra at the displacement peak; the frequency-noise peak must
/// fall in the same bin.
Coupling extract_coupling(const SpectrumRecord& sww, const SpectrumRecord& sxx, double mode_freq,
                          double xzpf = 0.0);

struct FloorExclusions {
    std::vector<double> peaks;           // mechanical modes and tones, Hz
    double peak_half_width = 1.0;        // Hz
    double mains_base = 50.0;            // Hz, 0 disables
    double mains_half_width = 2.0;       // Hz
    double vibration_cutoff = 30.0;      // Hz
};

/// Median PSD over [band_lo, band_hi] after exclusions.
double imprecision_floor(const SpectrumRecord& spectrum, double band_lo, double band_hi,
                         const FloorExclusions& ex = {});

struct Tone {
    double freq;             // Hz
    double phase_amplitude;  // rad
    double phase0 = 0.0;     // rad
};

struct SynthConfig {
    double sample_rate = 2000.0;   // Hz
    double duration = 120.0;       // s
    double carrier_freq = 400.0;   // Hz, the quasi-heterodyne offset
    double carrier_amplitude = 1.0;  // V
    std::vector<Tone> tones;
    double phase_noise_psd = 0.0;  // one-sided, rad^2/Hz
    std::uint64_t seed = 1;
};

/// Deterministic I/Q pair A exp(i (2 pi f_c t + phi(t))) where phi sums the
/// tones and white phase noise.
TimeTrace synth_trace(const SynthConfig& cfg);

/// Physical description of a readout scenario: motional modes, the
/// calibration tone, a phase-modulation tone and mains pickup, all mapped to
/// phase modulation through a fixed phase-per-flux transduction.
struct ScenarioMode {
    double freq;                // Hz
    double amplitude;           // m, peak
    double coupling_over_2pi;   // G/2pi, Hz/m
};

struct Scenario {
    double phase_per_flux = 0.05;   // rad per Phi0
    double slope = 188e6;           // Hz/Phi0
    std::vector<ScenarioMode> modes;
    CalibrationChain chain;
    Tone phase_mod{133.0, 1e-3};
    std::vector<Tone> mains{{50.0, 2e-4}, {100.0, 1e-4}, {150.0, 1e-4}};
    double phase_noise_psd = 1e-10;  // rad^2/Hz

    /// Phase amplitude of mode k.
    double mode_phase_amplitude(std::size_t k) const;
    /// Displacement-equivalent floor for mode k (m^2/Hz).
    double displacement_floor(std::size_t k) const;
    SynthConfig to_synth(double sample_rate, double duration, double carrier_freq,
                         std::uint64_t seed) const;
};

/// Modes at (69, 70, 140) Hz with the y mode at 740 nm, cal tone at 223 Hz.
Scenario reference_scenario();

}  // namespace levsense::spectral
