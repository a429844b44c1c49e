#include "levsense/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace levsense::config {

ParseError::ParseError(const std::string& what, int line, int column)
    : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

UnitError::UnitError(const std::string& what, std::string field)
    : Error(field + ": " + what), field_(std::move(field)) {}

namespace {

enum class Dim {
    none,
    count,
    length,
    density,
    gradient_per_current,
    current,
    temperature,
    angle,
    flux_per_length,
    inductance,
    capacitance,
    frequency,
    slope,
    flux,
    volt_per_flux,
    volt_ratio,
    voltage,
    time,
};

struct UnitDef {
    std::string_view suffix;
    Dim dim;
    double scale;
};

constexpr UnitDef kUnits[] = {
    {"m", Dim::length, 1.0},          {"mm", Dim::length, 1e-3},
    {"um", Dim::length, 1e-6},        {"nm", Dim::length, 1e-9},
    {"fm", Dim::length, 1e-15},       {"kg_m3", Dim::density, 1.0},
    {"g_cm3", Dim::density, 1e3},     {"T_per_m_A", Dim::gradient_per_current, 1.0},
    {"A", Dim::current, 1.0},         {"mA", Dim::current, 1e-3},
    {"uA", Dim::current, 1e-6},       {"K", Dim::temperature, 1.0},
    {"mK", Dim::temperature, 1e-3},   {"rad", Dim::angle, 1.0},
    {"deg", Dim::angle, phys::pi / 180.0},
    {"Phi0_per_m", Dim::flux_per_length, 1.0},
    {"Phi0_per_um", Dim::flux_per_length, 1e6},
    {"H", Dim::inductance, 1.0},      {"nH", Dim::inductance, 1e-9},
    {"pH", Dim::inductance, 1e-12},   {"F", Dim::capacitance, 1.0},
    {"pF", Dim::capacitance, 1e-12},  {"fF", Dim::capacitance, 1e-15},
    {"Hz", Dim::frequency, 1.0},      {"kHz", Dim::frequency, 1e3},
    {"MHz", Dim::frequency, 1e6},     {"GHz", Dim::frequency, 1e9},
    {"THz", Dim::frequency, 1e12},    {"Hz_per_Phi0", Dim::slope, 1.0},
    {"kHz_per_Phi0", Dim::slope, 1e3}, {"MHz_per_Phi0", Dim::slope, 1e6},
    {"GHz_per_Phi0", Dim::slope, 1e9}, {"Phi0", Dim::flux, 1.0},
    {"V_per_Phi0", Dim::volt_per_flux, 1.0}, {"mV_per_Phi0", Dim::volt_per_flux, 1e-3},
    {"V_per_V", Dim::volt_ratio, 1.0}, {"mV_per_V", Dim::volt_ratio, 1e-3},
    {"V", Dim::voltage, 1.0},         {"mV", Dim::voltage, 1e-3},
    {"s", Dim::time, 1.0},            {"ms", Dim::time, 1e-3},
    // Bare magnetic units exist only to produce a useful unit error.
    {"T", Dim::none, 0.0},            {"mT", Dim::none, 0.0},
    {"T_per_m", Dim::none, 0.0},
};

std::string_view dim_name(Dim d) {
    switch (d) {
        case Dim::none: return "dimensionless";
        case Dim::count: return "integer count";
        case Dim::length: return "length";
        case Dim::density: return "density";
        case Dim::gradient_per_current: return "field gradient per current";
        case Dim::current: return "current";
        case Dim::temperature: return "temperature";
        case Dim::angle: return "angle";
        case Dim::flux_per_length: return "flux per length";
        case Dim::inductance: return "inductance";
        case Dim::capacitance: return "capacitance";
        case Dim::frequency: return "frequency";
        case Dim::slope: return "flux responsivity";
        case Dim::flux: return "flux";
        case Dim::volt_per_flux: return "voltage per flux quantum";
        case Dim::volt_ratio: return "voltage ratio";
        case Dim::voltage: return "voltage";
        case Dim::time: return "time";
    }
    return "?";
}

struct Field {
    std::string section;
    std::string base;
    Dim dim;
    std::string_view unit;  // canonical suffix for the echo
    std::function<double&(RunConfig&)> ref;
};

double unit_scale(std::string_view suffix) {
    for (const UnitDef& u : kUnits)
        if (u.suffix == suffix) return u.scale;
    return 1.0;
}

#define LS_FIELD(sec, name, dim, unit, member) \
    Field{sec, name, dim, unit, [](RunConfig& c) -> double& { return c.member; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        LS_FIELD("sphere", "radius", Dim::length, "um", sphere.radius),
        LS_FIELD("sphere", "density", Dim::density, "kg_m3", sphere.density),
        LS_FIELD("trap", "gradient_x", Dim::gradient_per_current, "T_per_m_A", trap.gradient_per_ampere[0]),
        LS_FIELD("trap", "gradient_y", Dim::gradient_per_current, "T_per_m_A", trap.gradient_per_ampere[1]),
        LS_FIELD("trap", "gradient_z", Dim::gradient_per_current, "T_per_m_A", trap.gradient_per_ampere[2]),
        LS_FIELD("trap", "current", Dim::current, "A", trap.current),
        LS_FIELD("trap", "quality", Dim::none, "", trap.quality),
        LS_FIELD("trap", "bath_temperature", Dim::temperature, "mK", trap.bath_temperature),
        LS_FIELD("loop", "square_side", Dim::length, "um", loop.square_side),
        LS_FIELD("loop", "center_separation", Dim::length, "um", loop.center_separation),
        LS_FIELD("loop", "rotation", Dim::angle, "deg", loop.rotation),
        LS_FIELD("loop", "offset_x", Dim::length, "um", loop.offset[0]),
        LS_FIELD("loop", "offset_y", Dim::length, "um", loop.offset[1]),
        LS_FIELD("loop", "offset_z", Dim::length, "um", loop.offset[2]),
        LS_FIELD("loop", "measured_x", Dim::flux_per_length, "Phi0_per_m", loop.measured_sensitivity[0]),
        LS_FIELD("loop", "measured_y", Dim::flux_per_length, "Phi0_per_m", loop.measured_sensitivity[1]),
        LS_FIELD("loop", "measured_z", Dim::flux_per_length, "Phi0_per_m", loop.measured_sensitivity[2]),
        LS_FIELD("loop", "dz_prior", Dim::length, "um", loop.dz_prior),
        LS_FIELD("loop", "map_half_width", Dim::length, "um", loop.map_half_width),
        LS_FIELD("loop", "map_pitch", Dim::length, "um", loop.map_pitch),
        LS_FIELD("transformer", "squid_inductance", Dim::inductance, "nH", transformer.squid_inductance),
        LS_FIELD("transformer", "input_coil", Dim::inductance, "nH", transformer.input_coil),
        LS_FIELD("transformer", "twisted_pair", Dim::inductance, "nH", transformer.twisted_pair),
        LS_FIELD("transformer", "pickup", Dim::inductance, "nH", transformer.pickup),
        LS_FIELD("transformer", "coupling", Dim::none, "", transformer.coupling),
        LS_FIELD("cavity", "resonance", Dim::frequency, "GHz", cavity.resonance),
        LS_FIELD("cavity", "kappa_int", Dim::frequency, "MHz", cavity.kappa_int),
        LS_FIELD("cavity", "kappa_ext", Dim::frequency, "MHz", cavity.kappa_ext),
        LS_FIELD("cavity", "slope", Dim::slope, "GHz_per_Phi0", cavity.slope),
        LS_FIELD("cavity", "critical_current", Dim::current, "uA", cavity.critical_current),
        LS_FIELD("cavity", "loop_inductance", Dim::inductance, "nH", cavity.loop_inductance),
        LS_FIELD("cavity", "screening", Dim::none, "", cavity.screening),
        LS_FIELD("cavity", "resonator_inductance", Dim::inductance, "nH", cavity.resonator_inductance),
        LS_FIELD("cavity", "resonator_capacitance", Dim::capacitance, "fF", cavity.resonator_capacitance),
        LS_FIELD("cavity", "bias_flux", Dim::flux, "Phi0", cavity.bias_flux),
        LS_FIELD("cavity", "s21_noise", Dim::none, "", cavity.s21_noise),
        LS_FIELD("calibration", "ext_coil_periodicity", Dim::volt_per_flux, "mV_per_Phi0", calibration.ext_coil_periodicity),
        LS_FIELD("calibration", "cal_coil_ratio", Dim::volt_ratio, "mV_per_V", calibration.cal_coil_ratio),
        LS_FIELD("calibration", "cal_tone", Dim::frequency, "Hz", calibration.cal_tone_freq),
        LS_FIELD("calibration", "cal_tone_amplitude", Dim::voltage, "V", calibration.cal_tone_amplitude),
        LS_FIELD("calibration", "mode", Dim::frequency, "Hz", calibration.mode_freq),
        LS_FIELD("calibration", "mode_amplitude", Dim::length, "nm", calibration.mode_amplitude),
        LS_FIELD("calibration", "mode_slope", Dim::slope, "MHz_per_Phi0", calibration.mode_slope),
        LS_FIELD("calibration", "floor_band_lo", Dim::frequency, "Hz", calibration.floor_band_lo),
        LS_FIELD("calibration", "floor_band_hi", Dim::frequency, "Hz", calibration.floor_band_hi),
        LS_FIELD("calibration", "sample_rate", Dim::frequency, "Hz", calibration.sample_rate),
        LS_FIELD("calibration", "duration", Dim::time, "s", calibration.duration),
        LS_FIELD("calibration", "carrier", Dim::frequency, "Hz", calibration.carrier_freq),
        LS_FIELD("budget", "kappa", Dim::frequency, "MHz", budget.kappa),
        LS_FIELD("budget", "photons", Dim::none, "", budget.photons),
        LS_FIELD("budget", "detected_imprecision", Dim::frequency, "THz", budget.detected_imprecision),
        LS_FIELD("budget", "kappa_int", Dim::frequency, "MHz", budget.kappa_int),
        LS_FIELD("budget", "kappa_ext", Dim::frequency, "MHz", budget.kappa_ext),
        LS_FIELD("budget", "eta_warm", Dim::none, "", budget.eta_warm),
        LS_FIELD("budget", "hemt_temperature", Dim::temperature, "K", budget.hemt_temperature),
        LS_FIELD("budget", "hemt_frequency", Dim::frequency, "GHz", budget.hemt_frequency),
        LS_FIELD("budget", "mode", Dim::frequency, "Hz", budget.mode_freq),
        LS_FIELD("budget", "flux_sensitivity", Dim::flux_per_length, "Phi0_per_m", budget.flux_sensitivity),
        LS_FIELD("budget", "photons_sigma", Dim::none, "", budget.photons_sigma),
        LS_FIELD("budget", "kappa_int_sigma", Dim::frequency, "MHz", budget.kappa_int_sigma),
        LS_FIELD("budget", "kappa_ext_sigma", Dim::frequency, "MHz", budget.kappa_ext_sigma),
        LS_FIELD("budget", "detected_imprecision_sigma", Dim::frequency, "THz", budget.detected_imprecision_sigma),
        LS_FIELD("budget", "upgrade_eta_cav", Dim::none, "", budget.upgrade_eta_cav),
        LS_FIELD("budget", "upgrade_eta_cryo", Dim::none, "", budget.upgrade_eta_cryo),
        LS_FIELD("budget", "upgrade_eta_warm", Dim::none, "", budget.upgrade_eta_warm),
        LS_FIELD("ledger", "base_cq", Dim::none, "", ledger.base_cq),
    };
    return f;
}

#undef LS_FIELD

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct Loader {
    RunConfig cfg;
    int segments = cfg.loop.segments_per_side;
    bool ledger_seen = false;

    // Returns false when the key names no field of the section.
    bool assign(const std::string& section, const std::string& key, double value) {
        const std::string path = section + "." + key;
        if (section.empty() && key == "schema_version") {
            if (value != kSchemaVersion)
                throw Error("unsupported schema_version " + std::to_string(value));
            return true;
        }
        if (section == "loop" && key == "segments_per_side") {
            if (value < 1 || value != std::floor(value))
                throw UnitError("expected a positive integer count", path);
            segments = static_cast<int>(value);
            return true;
        }

        const Field* best = nullptr;
        std::string suffix;
        for (const Field& f : fields()) {
            if (f.section != section) continue;
            if (key == f.base) {
                best = &f;
                suffix.clear();
                break;
            }
            if (key.size() > f.base.size() + 1 && key.compare(0, f.base.size(), f.base) == 0 &&
                key[f.base.size()] == '_' && (!best || f.base.size() > best->base.size())) {
                best = &f;
                suffix = key.substr(f.base.size() + 1);
            }
        }
        if (!best) {
            if (section == "ledger") {
                if (!ledger_seen) cfg.ledger.factors.clear();
                ledger_seen = true;
                cfg.ledger.factors.push_back({key, value});
                return true;
            }
            return false;
        }

        const std::string fpath = section + "." + best->base;
        if (suffix.empty()) {
            if (best->dim != Dim::none)
                throw UnitError("missing unit suffix, expected " + std::string(dim_name(best->dim)) +
                                    " (e.g. " + best->base + "_" + std::string(best->unit) + ")",
                                fpath);
            best->ref(cfg) = value;
            return true;
        }
        for (const UnitDef& u : kUnits) {
            if (u.suffix != suffix) continue;
            if (u.dim != best->dim || best->dim == Dim::none)
                throw UnitError("unit '" + suffix + "' is not a " + std::string(dim_name(best->dim)) +
                                    " (expected e.g. " + best->base +
                                    (best->unit.empty() ? "" : "_" + std::string(best->unit)) + ")",
                                fpath);
            best->ref(cfg) = value * u.scale;
            return true;
        }
        throw UnitError("unknown unit suffix '" + suffix + "'", fpath);
    }

    RunConfig finish() {
        cfg.loop.segments_per_side = segments;
        return cfg;
    }
};

bool known_section(const std::string& s) {
    static const char* names[] = {"sphere", "trap", "loop", "transformer",
                                  "cavity", "calibration", "budget", "ledger"};
    return std::any_of(std::begin(names), std::end(names), [&](const char* n) { return s == n; });
}

RunConfig parse_ini(const std::string& text) {
    Loader ld;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find_first_of("#;");
        std::string body = line.substr(0, hash);
        const auto first = body.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const int col = static_cast<int>(first) + 1;

        if (body[first] == '[') {
            auto close = body.find(']', first);
            if (close == std::string::npos) throw ParseError("unterminated section header", lineno, col);
            if (!trim(body.substr(close + 1)).empty())
                throw ParseError("text after section header", lineno, static_cast<int>(close) + 2);
            section = trim(body.substr(first + 1, close - first - 1));
            if (!known_section(section))
                throw ParseError("unknown section [" + section + "]", lineno, col);
            continue;
        }

        auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno, col);
        std::string key = trim(body.substr(0, eq));
        if (key.empty()) throw ParseError("empty key", lineno, col);
        std::string value = trim(body.substr(eq + 1));
        const int vcol = static_cast<int>(body.find_first_not_of(" \t", eq + 1)) + 1;
        if (value.empty()) throw ParseError("missing value for '" + key + "'", lineno, static_cast<int>(eq) + 2);

        double v = 0.0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(v))
            throw ParseError("value '" + value + "' is not a finite number", lineno, vcol);
        if (!ld.assign(section, key, v))
            throw ParseError("unknown key '" + (section.empty() ? key : section + "." + key) + "'", lineno, col);
    }
    return ld.finish();
}

RunConfig parse_json_config(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t pos = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        int line = 1, col = 1;
        for (std::size_t k = 0; k < pos; ++k) {
            if (text[k] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ParseError("invalid JSON", line, col);
    }
    if (!j.is_object()) throw ParseError("top level must be an object", 1, 1);

    Loader ld;
    for (auto& [name, val] : j.items()) {
        if (name == "schema_version") {
            if (!val.is_number()) throw UnitError("expected a number", "schema_version");
            ld.assign("", name, val.get<double>());
            continue;
        }
        if (!known_section(name) || !val.is_object()) throw Error("unknown section '" + name + "'");
        for (auto& [key, v] : val.items()) {
            if (name == "ledger" && key == "factors") {
                ld.cfg.ledger.factors.clear();
                ld.ledger_seen = true;
                for (const auto& pair : v)
                    ld.cfg.ledger.factors.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
                continue;
            }
            if (!v.is_number()) throw UnitError("expected a number", name + "." + key);
            if (!ld.assign(name, key, v.get<double>()))
                throw Error("unknown key '" + name + "." + key + "'");
        }
    }
    return ld.finish();
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return parse_json_config(text);
    return parse_ini(text);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

nlohmann::json to_json(const RunConfig& cfg) {
    RunConfig c = cfg;
    nlohmann::json j;
    j["schema_version"] = c.schema_version;
    for (const Field& f : fields()) {
        std::string key = f.unit.empty() ? f.base : f.base + "_" + std::string(f.unit);
        // Trim the last-digit noise of the unit division so the echo reads cleanly.
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.15g", f.ref(c) / unit_scale(f.unit));
        j[f.section][key] = std::strtod(buf, nullptr);
    }
    j["loop"]["segments_per_side"] = c.loop.segments_per_side;
    auto& factors = j["ledger"]["factors"] = nlohmann::json::array();
    for (const LedgerEntry& e : c.ledger.factors) factors.push_back({e.name, e.multiplier});
    return j;
}

}  // namespace levsense::config
