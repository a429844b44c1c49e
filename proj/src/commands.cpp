#include "levsense/commands.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <sstream>

#include "levsense/cavity_squid.hpp"
#include "levsense/flux_geometry.hpp"
#include "levsense/mech_trap.hpp"
#include "levsense/noise_budget.hpp"
#include "levsense/report.hpp"
#include "levsense/selfcheck.hpp"
#include "levsense/spectral.hpp"
#include "levsense/trace_io.hpp"

namespace levsense::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {
        "fit-s21", "tuning-curve", "psd",    "calibrate", "coupling", "fluxmap",
        "locate-pul", "budget",    "project", "synth",    "selfcheck"};
    return names;
}

namespace {

class UsageError : public Error {
public:
    using Error::Error;
};

std::string error_kind(const std::exception& e) {
    if (dynamic_cast<const config::ParseError*>(&e)) return "parse";
    if (dynamic_cast<const config::UnitError*>(&e)) return "unit";
    if (dynamic_cast<const DomainError*>(&e)) return "domain";
    if (dynamic_cast<const ArgumentError*>(&e)) return "argument";
    if (dynamic_cast<const SingularGeometryError*>(&e)) return "singular_geometry";
    if (dynamic_cast<const NearSingularityError*>(&e)) return "near_singularity";
    if (dynamic_cast<const InitializationError*>(&e)) return "initialization";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "convergence";
    if (dynamic_cast<const ExtrapolationError*>(&e)) return "extrapolation";
    if (dynamic_cast<const RangeError*>(&e)) return "range";
    if (dynamic_cast<const CalibrationError*>(&e)) return "calibration";
    if (dynamic_cast<const UnphysicalInputError*>(&e)) return "unphysical_input";
    if (dynamic_cast<const DivergenceError*>(&e)) return "divergence";
    return "error";
}

std::optional<fs::path> artifact(const Options& o, const std::string& name) {
    if (!o.out_dir) return std::nullopt;
    fs::create_directories(*o.out_dir);
    return *o.out_dir / name;
}

mech::TrapConfig trap_of(const config::RunConfig& c) {
    mech::TrapConfig t;
    t.gradient_per_ampere = c.trap.gradient_per_ampere;
    t.current = c.trap.current;
    t.quality = c.trap.quality;
    t.bath_temperature = c.trap.bath_temperature;
    t.validate();
    return t;
}

flux::GradiometricLoop loop_of(const config::RunConfig& c) {
    flux::GradiometricLoop l;
    l.square_side = c.loop.square_side;
    l.center_separation = c.loop.center_separation;
    l.in_plane_rotation = c.loop.rotation;
    l.offset = c.loop.offset;
    l.segments_per_side = c.loop.segments_per_side;
    l.validate();
    return l;
}

flux::TransformerParams transformer_of(const config::RunConfig& c) {
    flux::TransformerParams t;
    t.squid_inductance = c.transformer.squid_inductance;
    t.input_coil = c.transformer.input_coil;
    t.twisted_pair = c.transformer.twisted_pair;
    t.pickup = c.transformer.pickup;
    t.coupling = c.transformer.coupling;
    return t;
}

spectral::CalibrationChain chain_of(const config::RunConfig& c) {
    spectral::CalibrationChain ch;
    ch.ext_coil_periodicity = c.calibration.ext_coil_periodicity;
    ch.cal_coil_ratio = c.calibration.cal_coil_ratio;
    ch.cal_tone_freq = c.calibration.cal_tone_freq;
    ch.cal_tone_amplitude = c.calibration.cal_tone_amplitude;
    return ch;
}

spectral::Scenario scenario_of(const config::RunConfig& c) {
    spectral::Scenario s = spectral::reference_scenario();
    s.chain = chain_of(c);
    const double scale = c.calibration.mode_slope / s.slope;
    s.slope = c.calibration.mode_slope;
    // Keep the phase floor and mode couplings while honouring the configured slope.
    for (auto& m : s.modes) m.coupling_over_2pi *= scale;
    for (auto& m : s.modes)
        if (m.freq == c.calibration.mode_freq) m.amplitude = c.calibration.mode_amplitude;
    return s;
}

spectral::TimeTrace trace_input(const config::RunConfig& c, const Options& o) {
    if (!o.inputs.empty()) return io::to_time_trace(io::read_channels(o.inputs.front()));
    const auto sc = scenario_of(c);
    return spectral::synth_trace(sc.to_synth(c.calibration.sample_rate, c.calibration.duration,
                                             c.calibration.carrier_freq, o.seed));
}

spectral::SpectrumRecord raw_spectrum(const config::RunConfig& c, const Options& o) {
    const auto tr = trace_input(c, o);
    return spectral::welch_psd(spectral::quasi_heterodyne_phase(tr, c.calibration.carrier_freq),
                               tr.sample_rate);
}

spectral::FloorExclusions exclusions_of(const config::RunConfig& c) {
    spectral::FloorExclusions ex;
    const auto sc = spectral::reference_scenario();
    for (const auto& m : sc.modes) ex.peaks.push_back(m.freq);
    ex.peaks.push_back(c.calibration.mode_freq);
    ex.peaks.push_back(c.calibration.cal_tone_freq);
    ex.peaks.push_back(sc.phase_mod.freq);
    return ex;
}

json cmd_fit_s21(const config::RunConfig& c, const Options& o) {
    std::vector<cavity::S21Point> trace;
    if (!o.inputs.empty()) {
        trace = io::read_s21_csv(o.inputs.front());
    } else {
        const double wr = hz_to_rad(c.cavity.resonance);
        const double ki = hz_to_rad(c.cavity.kappa_int), ke = hz_to_rad(c.cavity.kappa_ext);
        std::mt19937_64 rng(o.seed);
        std::normal_distribution<double> noise(0.0, c.cavity.s21_noise);
        const int n = 401;
        for (int k = 0; k < n; ++k) {
            double w = wr + (ki + ke) * (-5.0 + 10.0 * k / (n - 1));
            trace.push_back({w, cavity::s21_model(w, wr, ki, ke) + cavity::cplx(noise(rng), noise(rng))});
        }
    }
    const auto fit = cavity::fit_s21(trace);
    if (auto p = artifact(o, "s21_model.csv")) {
        std::vector<cavity::S21Point> model;
        for (const auto& pt : trace)
            model.push_back({pt.omega, cavity::s21_model(pt.omega, fit.params.resonance,
                                                          fit.params.kappa_int, fit.params.kappa_ext)});
        io::write_s21_csv(*p, model);
    }
    return {{"resonance_GHz", rad_to_hz(fit.params.resonance) / 1e9},
            {"kappa_int_MHz", rad_to_hz(fit.params.kappa_int) / 1e6},
            {"kappa_ext_MHz", rad_to_hz(fit.params.kappa_ext) / 1e6},
            {"resonance_stderr_MHz", rad_to_hz(fit.std_error[0]) / 1e6},
            {"kappa_int_stderr_MHz", rad_to_hz(fit.std_error[1]) / 1e6},
            {"kappa_ext_stderr_MHz", rad_to_hz(fit.std_error[2]) / 1e6},
            {"chi2", fit.chi2},
            {"iterations", fit.iterations},
            {"points", trace.size()}};
}

json cmd_tuning_curve(const config::RunConfig& c, const Options& o) {
    std::vector<cavity::TuningPoint> data;
    if (!o.inputs.empty()) {
        data = io::read_tuning_csv(o.inputs.front());
    } else {
        cavity::TuningModel m;
        m.loop_inductance = c.cavity.loop_inductance;
        m.critical_current = c.cavity.critical_current;
        m.resonator_inductance = c.cavity.resonator_inductance;
        const double l0 = cavity::squid_inductance(0.0, m.critical_current) + m.loop_inductance;
        m.omega0 = hz_to_rad(c.cavity.resonance) * std::sqrt(1.0 + l0 / m.resonator_inductance);
        std::vector<double> grid;
        for (int k = -40; k <= 40; ++k) grid.push_back(0.01 * k);
        data = cavity::tuning_curve(grid, m);
    }
    const auto model = cavity::fit_tuning_curve(data, c.cavity.loop_inductance, c.cavity.critical_current);
    json r = {{"omega0_over_2pi_GHz", rad_to_hz(model.omega0) / 1e9},
              {"resonator_inductance_nH", model.resonator_inductance / 1e-9},
              {"flux_min_Phi0", model.flux_min},
              {"flux_max_Phi0", model.flux_max},
              {"bias_flux_Phi0", c.cavity.bias_flux},
              {"slope_at_bias_GHz_per_Phi0", cavity::slope_at_bias(model, c.cavity.bias_flux) / 1e9}};
    try {
        r["bias_for_slope_Phi0"] = cavity::bias_for_slope(model, c.cavity.slope);
    } catch (const RangeError& e) {
        r["bias_for_slope_error"] = e.what();
        r["max_slope_GHz_per_Phi0"] = e.max_achievable / 1e9;
    }
    if (auto p = artifact(o, "tuning_curve.csv")) {
        std::vector<std::vector<double>> rows;
        for (const auto& [f, w] : data)
            rows.push_back({f, rad_to_hz(model.frequency(f)) / 1e9, model.slope_unchecked(f) / 1e9});
        io::write_csv(*p, {"flux_Phi0", "frequency_GHz", "slope_GHz_per_Phi0"}, rows);
    }
    return r;
}

json cmd_psd(const config::RunConfig& c, const Options& o) {
    const auto s = raw_spectrum(c, o);
    if (auto p = artifact(o, "psd_raw.csv")) io::write_spectrum_csv(*p, s);
    const auto tone = spectral::find_peak(s, c.calibration.cal_tone_freq);
    return {{"enbw_Hz", s.enbw},
            {"bin_width_Hz", s.bin_width()},
            {"bins", s.freq.size()},
            {"units", spectral::units_tag(s.units)},
            {"cal_tone_freq_Hz", tone.freq},
            {"cal_tone_ps_rad2", tone.ps},
            {"cal_tone_snr", spectral::peak_snr(s, tone)}};
}

struct Calibrated {
    spectral::SpectrumRecord raw, flux, freq, disp;
};

Calibrated calibrate(const config::RunConfig& c, const Options& o) {
    Calibrated out;
    out.raw = raw_spectrum(c, o);
    out.flux = spectral::calibrate_flux_axis(out.raw, chain_of(c));
    out.freq = spectral::flux_to_frequency(out.flux, c.calibration.mode_slope);
    out.disp = spectral::calibrate_displacement(out.raw, c.calibration.mode_amplitude, c.calibration.mode_freq);
    if (auto p = artifact(o, "psd_flux.csv")) io::write_spectrum_csv(*p, out.flux);
    if (auto p = artifact(o, "psd_frequency.csv")) io::write_spectrum_csv(*p, out.freq);
    if (auto p = artifact(o, "psd_displacement.csv")) io::write_spectrum_csv(*p, out.disp);
    return out;
}

json cmd_calibrate(const config::RunConfig& c, const Options& o) {
    const auto cal = calibrate(c, o);
    const double floor = spectral::imprecision_floor(cal.disp, c.calibration.floor_band_lo,
                                                     c.calibration.floor_band_hi, exclusions_of(c));
    const auto peak = spectral::find_peak(cal.disp, c.calibration.mode_freq);
    return {{"cal_coil_flux_Phi0_per_V", chain_of(c).cal_coil_flux()},
            {"enbw_Hz", cal.raw.enbw},
            {"mode_freq_Hz", peak.freq},
            {"mode_ps_m2", peak.ps},
            {"imprecision_floor_m2_per_Hz", floor},
            {"imprecision_floor_m_per_rtHz", std::sqrt(floor)}};
}

json cmd_coupling(const config::RunConfig& c, const Options& o) {
    const auto cal = calibrate(c, o);
    const mech::SphereParams sphere(c.sphere.radius, c.sphere.density);
    const double xzpf = mech::zero_point_motion(sphere.mass(), hz_to_rad(c.calibration.mode_freq));
    const auto k = spectral::extract_coupling(cal.freq, cal.disp, c.calibration.mode_freq, xzpf);
    const double floor = spectral::imprecision_floor(cal.disp, c.calibration.floor_band_lo,
                                                     c.calibration.floor_band_hi, exclusions_of(c));
    return {{"mode_freq_Hz", c.calibration.mode_freq},
            {"G_over_2pi_Hz_per_m", k.G_over_2pi},
            {"xzpf_m", xzpf},
            {"g0_over_2pi_Hz", k.g0_over_2pi},
            {"imprecision_floor_m2_per_Hz", floor},
            {"imprecision_floor_m_per_rtHz", std::sqrt(floor)},
            {"imprecision_times_G2_Hz", floor * k.G_over_2pi * k.G_over_2pi}};
}

json cmd_synth(const config::RunConfig& c, const Options& o) {
    const auto sc = scenario_of(c);
    const auto synth = sc.to_synth(c.calibration.sample_rate, c.calibration.duration,
                                   c.calibration.carrier_freq, o.seed);
    const auto tr = spectral::synth_trace(synth);
    const fs::path dir = o.out_dir.value_or(".");
    fs::create_directories(dir);
    fs::path file;
    if (o.format == Format::csv) {
        file = dir / "trace.csv";
        io::write_trace_csv(file, io::from_time_trace(tr), {"I_V", "Q_V"});
    } else {
        file = dir / "trace.levi";
        io::write_levi(file, io::from_time_trace(tr));
    }
    json modes = json::array();
    for (std::size_t k = 0; k < sc.modes.size(); ++k)
        modes.push_back({{"freq_Hz", sc.modes[k].freq},
                         {"amplitude_m", sc.modes[k].amplitude},
                         {"G_over_2pi_Hz_per_m", sc.modes[k].coupling_over_2pi},
                         {"displacement_floor_m2_per_Hz", sc.displacement_floor(k)}});
    return {{"trace_file", file.string()},
            {"samples", tr.i.size()},
            {"sample_rate_Hz", tr.sample_rate},
            {"phase_noise_rad2_per_Hz", sc.phase_noise_psd},
            {"modes", modes}};
}

json cmd_fluxmap(const config::RunConfig& c, const Options& o) {
    const auto loop = loop_of(c);
    const double rp = c.sphere.radius;
    const auto rows = flux::flux_map(loop, rp, loop.offset.z(), c.loop.map_half_width, c.loop.map_pitch);
    if (auto p = artifact(o, "fluxmap.csv")) io::write_fluxmap_csv(*p, rows);
    const Vec3 b = mech::gradient_from_current(trap_of(c));
    const auto sens = flux::flux_sensitivity(loop, b, rp, flux::transformer_efficiency(transformer_of(c)));
    json f = json::array();
    for (const auto& v : sens.geometric_factor) f.push_back(v ? json(*v) : json(nullptr));
    const flux::FluxMapRow* best = nullptr;
    for (const auto& r : rows)
        if (std::isfinite(r.F[2]) && (!best || std::abs(r.F[2]) < std::abs(best->F[2]))) best = &r;
    json out = {{"cells", rows.size()},
                {"F_at_offset", f},
                {"dphi_squid_Phi0_per_m",
                 {sens.dphi_squid[0] / phys::flux_quantum, sens.dphi_squid[1] / phys::flux_quantum,
                  sens.dphi_squid[2] / phys::flux_quantum}}};
    if (best) out["min_abs_F_z"] = {{"dx_um", best->dx * 1e6}, {"dy_um", best->dy * 1e6}, {"F_z", best->F[2]}};
    return out;
}

json cmd_locate(const config::RunConfig& c, const Options&) {
    const Vec3 b = mech::gradient_from_current(trap_of(c));
    const auto res = flux::locate_pickup(c.loop.measured_sensitivity, b, c.sphere.radius, loop_of(c),
                                         c.loop.dz_prior);
    json sols = json::array();
    for (const auto& s : res.solutions)
        sols.push_back({{"dx_um", s.offset.x() * 1e6},
                        {"dy_um", s.offset.y() * 1e6},
                        {"dz_um", s.offset.z() * 1e6},
                        {"alpha", s.alpha},
                        {"residual", s.residual},
                        {"partner", s.symmetry_partner_index},
                        {"rank_deficient", s.rank_deficient}});
    return {{"matched_cells", res.matched_cells.size()}, {"loci", res.loci}, {"solutions", sols}};
}

budget::ProjectionLedger ledger_of(const config::RunConfig& c) {
    budget::ProjectionLedger l = budget::default_ledger();
    l.base_cq = c.ledger.base_cq;
    if (!c.ledger.factors.empty()) {
        l.factors.clear();
        for (const auto& f : c.ledger.factors) l.factors.push_back({f.name, f.multiplier, "config"});
    }
    return l;
}

json ledger_json(const budget::Projection& p) {
    json rows = json::array();
    for (const auto& r : p.rows)
        rows.push_back({{"step", r.name}, {"multiplier", r.multiplier}, {"cumulative_Cq", r.cumulative}});
    return rows;
}

json cmd_budget(const config::RunConfig& c, const Options&) {
    const auto& B = c.budget;
    const double kappa = hz_to_rad(B.kappa);
    const double omega_m = hz_to_rad(B.mode_freq);

    auto s_imp_of = [&](double kap_hz, double nr) {
        return budget::imprecision_quantum(hz_to_rad(kap_hz), nr, phys::two_pi, omega_m);
    };
    const double s_imp_g2 = s_imp_of(B.kappa, B.photons);
    const double eta_d = budget::detection_efficiency(s_imp_g2, B.detected_imprecision);
    const double eta_cav = budget::cavity_efficiency(hz_to_rad(B.kappa_int), hz_to_rad(B.kappa_ext));
    const double eta_cryo = budget::solve_missing_factor(eta_d, eta_cav, B.eta_warm);
    const double n_hemt = budget::added_photons(B.hemt_temperature, hz_to_rad(B.hemt_frequency));

    const mech::SphereParams sphere(c.sphere.radius, c.sphere.density);
    const auto trap = trap_of(c);
    const double xzpf = mech::zero_point_motion(sphere.mass(), omega_m);
    const double gamma = omega_m / trap.quality;
    const double nth = mech::thermal_occupation(trap.bath_temperature, omega_m);
    const double g0 = hz_to_rad(flux::assemble_g0_from_flux(c.cavity.slope, B.flux_sensitivity, xzpf));
    const double cq = budget::cooperativity(B.photons, g0, kappa, gamma, nth);

    auto eff = budget::with_hemt(budget::budget_assemble(eta_cav, eta_cryo, B.eta_warm), n_hemt);
    eff = budget::with_cooperativity(eff, cq);
    const double n_min = budget::min_phonons(eff.eta);

    const double s_gs = budget::ground_state_density(xzpf, gamma, nth);
    budget::BackActionInputs ba_in;
    ba_in.G_over_2pi = rad_to_hz(g0) / xzpf;
    ba_in.nr = B.photons;
    ba_in.kappa = kappa;
    ba_in.mass = sphere.mass();
    ba_in.omega_m = omega_m;
    ba_in.gamma_m = gamma;
    ba_in.gamma_eff = gamma * nth;
    const auto ba = budget::back_action_densities(ba_in);

    // First-order uncertainties from the measured inputs.
    Eigen::VectorXd x(3), sx(3);
    x << B.kappa, B.photons, B.detected_imprecision;
    sx << 0.0, B.photons_sigma, B.detected_imprecision_sigma;
    // The readout linewidth is the sum of the two partial widths.
    sx[0] = std::hypot(B.kappa_int_sigma, B.kappa_ext_sigma);
    const auto u_simp = budget::propagate([&](const Eigen::VectorXd& v) { return s_imp_of(v[0], v[1]); }, x, sx);
    const auto u_eta_d = budget::propagate(
        [&](const Eigen::VectorXd& v) { return s_imp_of(v[0], v[1]) / v[2]; }, x, sx);
    Eigen::VectorXd k(2), sk(2);
    k << B.kappa_int, B.kappa_ext;
    sk << B.kappa_int_sigma, B.kappa_ext_sigma;
    const auto u_cav = budget::propagate(
        [](const Eigen::VectorXd& v) { return budget::cavity_efficiency(v[0], v[1]); }, k, sk);

    const double eta_up = budget::budget_assemble(B.upgrade_eta_cav, B.upgrade_eta_cryo, B.upgrade_eta_warm).eta_d;
    json upgrade = {{"eta_d", eta_up}};
    if (eta_up > 1.0 / 9.0) {
        const double eta_e = 1.0 / (9.0 * eta_up);
        upgrade["Cq_required_for_eta_one_ninth"] = eta_e / (1.0 - eta_e);
    }

    const auto loop = loop_of(c);
    const double alpha = flux::transformer_efficiency(transformer_of(c));
    const auto sens = flux::flux_sensitivity(loop, mech::gradient_from_current(trap), sphere.radius(), alpha);
    json design = nullptr;
    if (sens.geometric_factor[2]) {
        const auto d = budget::design_cooperativity(trap, sphere, B.photons, kappa, c.cavity.slope, alpha,
                                                    std::abs(*sens.geometric_factor[2]));
        design = {{"closed_form", d.closed_form}, {"assembled", d.assembled}, {"ratio", d.ratio()},
                  {"alpha", alpha}, {"F_z", std::abs(*sens.geometric_factor[2])}};
    }

    const auto proj = budget::project(ledger_of(c));
    return {{"S_imp_quantum_times_G2_Hz", s_imp_g2},
            {"S_imp_quantum_times_G2_sigma_Hz", u_simp.sigma},
            {"S_imp_detected_times_G2_Hz", B.detected_imprecision},
            {"eta_d", eta_d},
            {"eta_d_sigma", u_eta_d.sigma},
            {"eta_cav", eta_cav},
            {"eta_cav_sigma", u_cav.sigma},
            {"eta_warm", B.eta_warm},
            {"eta_cryo", eta_cryo},
            {"n_add_cryo", eff.n_add_cryo},
            {"n_HEMT", n_hemt},
            {"Lambda", eff.transmissivity},
            {"Lambda_dB", 10.0 * std::log10(eff.transmissivity)},
            {"mode_freq_Hz", B.mode_freq},
            {"xzpf_m", xzpf},
            {"nth", nth},
            {"g0_over_2pi_Hz", rad_to_hz(g0)},
            {"Cq", cq},
            {"eta_e", eff.eta_e},
            {"eta", eff.eta},
            {"n_min", n_min},
            {"S_gs_m2_per_Hz", s_gs},
            {"S_ba_th_m2_per_Hz", ba.thermal},
            {"S_ba_gs_m2_per_Hz", ba.ground},
            {"S_FF_N2_per_Hz", ba.force_psd},
            {"upgrade", upgrade},
            {"design_cooperativity", design},
            {"ledger", ledger_json(proj)},
            {"projected_Cq", proj.final_cq}};
}

json cmd_project(const config::RunConfig& c, const Options&) {
    const auto l = ledger_of(c);
    const auto p = budget::project(l);
    return {{"base_Cq", l.base_cq}, {"ledger", ledger_json(p)}, {"projected_Cq", p.final_cq}};
}

}  // namespace

json execute(const std::string& command, const config::RunConfig& cfg, const Options& opts) {
    if (command == "fit-s21") return cmd_fit_s21(cfg, opts);
    if (command == "tuning-curve") return cmd_tuning_curve(cfg, opts);
    if (command == "psd") return cmd_psd(cfg, opts);
    if (command == "calibrate") return cmd_calibrate(cfg, opts);
    if (command == "coupling") return cmd_coupling(cfg, opts);
    if (command == "fluxmap") return cmd_fluxmap(cfg, opts);
    if (command == "locate-pul") return cmd_locate(cfg, opts);
    if (command == "budget") return cmd_budget(cfg, opts);
    if (command == "project") return cmd_project(cfg, opts);
    if (command == "synth") return cmd_synth(cfg, opts);
    throw UsageError("unknown command '" + command + "'");
}

std::string to_csv_lines(const json& j) {
    std::ostringstream os;
    std::function<void(const json&, const std::string&)> walk = [&](const json& v, const std::string& key) {
        if (v.is_object()) {
            for (auto& [k, sub] : v.items()) walk(sub, key.empty() ? k : key + "." + k);
        } else if (v.is_array()) {
            for (std::size_t i = 0; i < v.size(); ++i) walk(v[i], key + "." + std::to_string(i));
        } else {
            os << key << "," << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
        }
    };
    walk(j, "");
    return os.str();
}

int run(const Options& opts, std::ostream& out, std::ostream& err) {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), opts.command) == names.end()) {
        err << "unknown command '" << opts.command << "'\n";
        return kExitUsage;
    }

    auto emit = [&](const json& j) {
        if (opts.format == Format::csv)
            out << to_csv_lines(j);
        else
            out << j.dump(2) << '\n';
    };

    try {
        const config::RunConfig cfg = opts.config ? config::load_config(*opts.config) : config::RunConfig{};
        report::Report rep = report::make_report(opts.command, config::to_json(cfg), opts.seed);

        if (opts.command == "selfcheck") {
            const auto results = selfcheck::run_all();
            bool all = true;
            json lines = json::array();
            for (const auto& r : results) {
                err << selfcheck::format(r) << '\n';
                lines.push_back({{"id", r.id}, {"title", r.title}, {"pass", r.pass}, {"detail", r.detail}});
                all &= r.pass;
            }
            rep.results = {{"checks", lines}, {"all_pass", all}};
            emit(rep.to_json());
            if (auto p = artifact(opts, "selfcheck.json")) report::write_json(*p, rep.to_json());
            return all ? kExitOk : kExitAnalysis;
        }

        rep.results = execute(opts.command, cfg, opts);
        emit(rep.to_json());
        if (auto p = artifact(opts, opts.command + ".json")) report::write_json(*p, rep.to_json());
        return kExitOk;
    } catch (const UsageError& e) {
        err << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        out << report::error_object(opts.command, error_kind(e), e.what()).dump(2) << '\n';
        return kExitAnalysis;
    }
}

}  // namespace levsense::cli
