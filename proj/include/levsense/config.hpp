// config.hpp - run configuration: sectioned key = value text with unit
// suffixed keys (kappa_ext_MHz = 18), or the same structure as JSON.
//
// Every field has a base name and a physical dimension. A key is the base
// name followed by a unit suffix valid for that dimension; dimensionless
// fields take the bare base name. Values are stored in SI (frequencies in Hz,
// angles in rad).

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "levsense/common.hpp"

namespace levsense::config {

inline constexpr int kSchemaVersion = 1;

class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column);
    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

class UnitError : public Error {
public:
    UnitError(const std::string& what, std::string field);
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

struct LedgerEntry {
    std::string name;
    double multiplier;
};

struct RunConfig {
    int schema_version = kSchemaVersion;

    struct Sphere {
        double radius = 50e-6;
        double density = 1.09e4;
    } sphere;

    struct Trap {
        Vec3 gradient_per_ampere{23.5, 24.2, 48.1};
        double current = 1.0;
        double quality = 2.6e7;
        double bath_temperature = 15e-3;
    } trap;

    struct Loop {
        double square_side = 150e-6;
        double center_separation = 158e-6;
        double rotation = -phys::pi / 4.0;
        Vec3 offset{450e-6, 250e-6, 250e-6};
        int segments_per_side = 64;
        Vec3 measured_sensitivity{70.0, 800.0, 80.0};  // Phi0/m at the SQUID
        double dz_prior = 250e-6;
        double map_half_width = 600e-6;
        double map_pitch = 10e-6;
    } loop;

    struct Transformer {
        double squid_inductance = 0.12e-9;
        double input_coil = 20.5e-9;
        double twisted_pair = 100e-9;
        double pickup = 0.9e-9;
        double coupling = 0.1;
    } transformer;

    struct Cavity {
        double resonance = 4.44e9;   // Hz
        double kappa_int = 5e6;      // Hz
        double kappa_ext = 18e6;     // Hz
        double slope = 1.7e9;        // Hz/Phi0
        double critical_current = 0.5e-6;
        double loop_inductance = 0.12e-9;
        double screening = 0.06;
        double resonator_inductance = 1.4e-9;
        double resonator_capacitance = 310e-15;
        double bias_flux = 0.3;      // Phi0, tuning-curve report point
        double s21_noise = 0.01;     // synthetic trace noise
    } cavity;

    struct Calibration {
        double ext_coil_periodicity = 0.467;  // V/Phi0
        double cal_coil_ratio = 0.0217;       // V/V
        double cal_tone_freq = 223.0;
        double cal_tone_amplitude = 1.0;      // V
        double mode_freq = 70.0;
        double mode_amplitude = 740e-9;
        double mode_slope = 188e6;            // Hz/Phi0 during the calibration run
        double floor_band_lo = 30.0;
        double floor_band_hi = 300.0;
        double sample_rate = 2000.0;
        double duration = 120.0;
        double carrier_freq = 400.0;
    } calibration;

    struct Budget {
        double kappa = 135e6;                 // Hz
        double photons = 0.05;
        double detected_imprecision = 0.61e12; // S_imp_detected (G/2pi)^2, Hz
        double kappa_int = 110e6;             // Hz
        double kappa_ext = 25e6;              // Hz
        double eta_warm = 1.3e-2;
        double hemt_temperature = 2.5;
        double hemt_frequency = 4.3e9;        // Hz
        double mode_freq = 140.0;             // Hz, z mode at the operating point
        double flux_sensitivity = 80.0;       // Phi0/m, z mode
        double photons_sigma = 0.026;
        double kappa_int_sigma = 13e6;        // Hz
        double kappa_ext_sigma = 5e6;         // Hz
        double detected_imprecision_sigma = 0.02e12;
        double upgrade_eta_cav = 0.5;
        double upgrade_eta_cryo = 0.81;
        double upgrade_eta_warm = 0.99;
    } budget;

    struct Ledger {
        double base_cq = 5e-17;
        std::vector<LedgerEntry> factors;  // empty: built-in list
    } ledger;
};

/// Parses text. Content whose first non-blank character is '{' is read as
/// JSON, anything else as sectioned key = value text.
RunConfig parse_config(const std::string& text);

/// Missing path is an error; an empty file yields the defaults.
RunConfig load_config(const std::filesystem::path& path);

/// Canonical echo with unit-suffixed keys, suitable for hashing.
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace levsense::config
