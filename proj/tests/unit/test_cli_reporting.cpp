#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "levsense/commands.hpp"
#include "levsense/config.hpp"
#include "levsense/report.hpp"
#include "levsense/trace_io.hpp"
#include "oracle.hpp"

using namespace levsense;
using json = nlohmann::json;
using oracle::rel;
namespace fs = std::filesystem;

namespace {

struct ScratchDir {
    fs::path path = fs::temp_directory_path() / ("levsense_test_" + std::to_string(::getpid()));
    ScratchDir() { fs::create_directories(path); }
    ~ScratchDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

fs::path scratch() {
    static const ScratchDir dir;
    return dir.path;
}

fs::path write_file(const std::string& name, const std::string& text) {
    fs::path p = scratch() / name;
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Run {
    int rc;
    std::string out;
};

Run run_cli(const std::string& args) {
    static int n = 0;
    fs::path out = scratch() / ("stdout_" + std::to_string(n++));
    std::string cmd = std::string(LEVSENSE_CLI_PATH) + " " + args + " > " + out.string() + " 2>/dev/null";
    int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

}  // namespace

TEST_SUITE("cli_reporting") {

TEST_CASE("default profile") {
    config::RunConfig c = config::parse_config("");
    CHECK(c.sphere.radius == 50e-6);
    CHECK(c.sphere.density == 1.09e4);
    CHECK(c.trap.quality == 2.6e7);
    CHECK(c.trap.bath_temperature == 15e-3);
    CHECK(c.trap.gradient_per_ampere == Vec3(23.5, 24.2, 48.1));
    CHECK(c.cavity.resonance == 4.44e9);
    CHECK(c.cavity.kappa_ext == 18e6);
    CHECK(c.cavity.kappa_int == 5e6);
    CHECK(c.cavity.critical_current == 0.5e-6);
    CHECK(c.transformer.input_coil == 20.5e-9);
    CHECK(c.transformer.twisted_pair == 100e-9);
    CHECK(c.loop.square_side == 150e-6);
    CHECK(c.schema_version == 1);
}

TEST_CASE("empty file gives defaults") {
    auto p = write_file("empty.ini", "");
    CHECK(config::to_json(config::load_config(p)) == config::to_json(config::RunConfig{}));
    CHECK_THROWS(config::load_config(scratch() / "missing.ini"));
}

TEST_CASE("unit-suffixed keys") {
    auto c = config::parse_config(
        "# comment\n[cavity]\nkappa_ext_kHz = 20000\nresonance_GHz = 4.1\n\n[trap]\nbath_temperature_K = 0.02\n"
        "[loop]\nrotation_deg = 45\n");
    CHECK(c.cavity.kappa_ext == doctest::Approx(20e6));
    CHECK(c.cavity.resonance == doctest::Approx(4.1e9));
    CHECK(c.trap.bath_temperature == doctest::Approx(0.02));
    CHECK(c.loop.rotation == doctest::Approx(oracle::pi / 4));
}

TEST_CASE("unit error names the field") {
    try {
        config::parse_config("[trap]\ngradient_z_T = 48.1\n");
        CHECK(false);
    } catch (const config::UnitError& e) {
        CHECK(e.field() == "trap.gradient_z");
    }
    CHECK_THROWS_AS(config::parse_config("[sphere]\nradius_MHz = 3\n"), config::UnitError);
}

TEST_CASE("parse errors carry line and column") {
    try {
        config::parse_config("[trap]\ncurrent_A = 1\n  unknown_key = 3\n");
        CHECK(false);
    } catch (const config::ParseError& e) {
        CHECK(e.line() == 3);
        CHECK(e.column() == 3);
    }
    try {
        config::parse_config("[trap]\ncurrent_A = abc\n");
        CHECK(false);
    } catch (const config::ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(config::parse_config("[nosuch]\n"), config::ParseError);
    CHECK_THROWS_AS(config::parse_config("[trap\n"), config::ParseError);
    CHECK_THROWS_AS(config::parse_config("{\"trap\": {\"current_A\": }}"), config::ParseError);
    CHECK_THROWS_AS(config::parse_config("schema_version = 2\n"), Error);
}

TEST_CASE("JSON configuration") {
    config::RunConfig c;
    c.cavity.kappa_ext = 25e6;
    c.loop.segments_per_side = 32;
    c.ledger.factors = {{"readout", 200.0}, {"slope", 10.0}};
    json j = config::to_json(c);
    auto back = config::parse_config(j.dump());
    CHECK(config::to_json(back) == j);
    CHECK(back.cavity.kappa_ext == 25e6);
    CHECK(back.ledger.factors.size() == 2);

    auto small = config::parse_config(R"({"cavity": {"kappa_ext_MHz": 30}})");
    CHECK(small.cavity.kappa_ext == doctest::Approx(30e6));
    CHECK(small.cavity.kappa_int == 5e6);
}

TEST_CASE("SHA-256 and report provenance") {
    CHECK(report::sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    json echo = config::to_json(config::RunConfig{});
    auto r = report::make_report("budget", echo, 9);
    CHECK(r.config_hash == report::sha256_hex(echo.dump()));
    json out = r.to_json();
    CHECK(out["provenance"]["seed"] == 9);
    CHECK(out["provenance"]["config_sha256"] == r.config_hash);
    CHECK(out["provenance"]["version"] == std::string(report::version()));
}

TEST_CASE("trace and spectrum files round trip") {
    io::Channels ch;
    ch.sample_rate = 1234.5;
    ch.data = {{1.0, -2.5, 3.25e-300}, {0.1, 0.2, 0.3}};
    auto p = scratch() / "t.levi";
    io::write_levi(p, ch);
    auto back = io::read_channels(p);
    CHECK(back.sample_rate == ch.sample_rate);
    CHECK(back.data == ch.data);
    auto raw = slurp(p);
    CHECK(raw.substr(0, 4) == "LEVI");

    auto c = scratch() / "t.csv";
    io::write_trace_csv(c, ch, {"I_V", "Q_V"});
    auto back_csv = io::read_channels(c);
    CHECK(back_csv.data == ch.data);
    CHECK(rel(back_csv.sample_rate, ch.sample_rate) < 1e-9);

    spectral::SpectrumRecord s;
    s.freq = {0.0, 0.5, 1.0};
    s.psd = {1e-12, 2e-12, 3e-12};
    s.enbw = 0.1136;
    s.units = spectral::Units::m2_per_hz;
    auto sp = scratch() / "s.csv";
    io::write_spectrum_csv(sp, s);
    auto sb = io::read_spectrum_csv(sp);
    CHECK(sb.units == s.units);
    CHECK(sb.psd == s.psd);
    CHECK(sb.enbw == s.enbw);
}

TEST_CASE("CSV flattening") {
    json j = {{"a", 1.5}, {"b", {{"c", 2}, {"d", "x"}}}};
    auto lines = cli::to_csv_lines(j);
    CHECK(lines.find("a,1.5") != std::string::npos);
    CHECK(lines.find("b.c,2") != std::string::npos);
}

TEST_CASE("exit codes") {
    CHECK(run_cli("no-such-command").rc == 2);
    CHECK(run_cli("budget --format xml").rc == 2);
    CHECK(run_cli("").rc == 2);

    auto bad_unit = write_file("bad_unit.ini", "[trap]\ngradient_x_T = 23.5\n");
    Run r = run_cli("budget --config " + bad_unit.string());
    CHECK(r.rc == 1);
    json e = json::parse(r.out);
    CHECK(e["error"]["kind"] == "unit");
    CHECK(e["error"]["message"].get<std::string>().find("trap.gradient_x") != std::string::npos);

    auto bad_key = write_file("bad_key.ini", "[cavity]\nkappa_MHz = 3\n");
    r = run_cli("budget --config " + bad_key.string());
    CHECK(r.rc == 1);
    CHECK(json::parse(r.out)["error"]["kind"] == "parse");

    r = run_cli("coupling " + (scratch() / "nothing.levi").string());
    CHECK(r.rc == 1);
    CHECK(json::parse(r.out).contains("error"));
}

TEST_CASE("budget report") {
    Run r = run_cli("budget");
    REQUIRE(r.rc == 0);
    json res = json::parse(r.out)["results"];
    CHECK(res["S_imp_quantum_times_G2_Hz"].get<double>() == doctest::Approx(26.9e6).epsilon(2e-3));
    CHECK(res["eta_d"].get<double>() == doctest::Approx(4.4e-5).epsilon(0.01));
    CHECK(res["eta_cav"].get<double>() == doctest::Approx(0.185).epsilon(2e-3));
    CHECK(res["eta_cryo"].get<double>() == doctest::Approx(1.83e-2).epsilon(0.01));
    CHECK(res["upgrade"]["eta_d"].get<double>() == doctest::Approx(0.40).epsilon(0.01));
    CHECK(res["upgrade"]["Cq_required_for_eta_one_ninth"].get<double>() == doctest::Approx(0.38).epsilon(0.01));
    CHECK(res["projected_Cq"].get<double>() == doctest::Approx(5.7e4).epsilon(1e-3));
}

TEST_CASE("project command") {
    Run r = run_cli("project");
    REQUIRE(r.rc == 0);
    json res = json::parse(r.out)["results"];
    CHECK(res["projected_Cq"].get<double>() == doctest::Approx(5.7e4).epsilon(1e-6));
    CHECK(res["ledger"].size() == 6);

    auto cfg = write_file("ledger.ini", "[ledger]\nbase_cq = 1e-10\nreadout = 10\nslope = 3\n");
    r = run_cli("project --config " + cfg.string());
    REQUIRE(r.rc == 0);
    CHECK(json::parse(r.out)["results"]["projected_Cq"].get<double>() == doctest::Approx(3e-9));
}

TEST_CASE("synth then coupling") {
    auto dir = scratch() / "synth1";
    Run s = run_cli("synth --seed 1 --out " + dir.string());
    REQUIRE(s.rc == 0);
    json planted = json::parse(s.out)["results"]["modes"][1];
    Run c = run_cli("coupling " + (dir / "trace.levi").string());
    REQUIRE(c.rc == 0);
    json res = json::parse(c.out)["results"];
    CHECK(rel(res["G_over_2pi_Hz_per_m"].get<double>(), planted["G_over_2pi_Hz_per_m"].get<double>()) < 0.02);
    CHECK(rel(res["imprecision_floor_m2_per_Hz"].get<double>(),
              planted["displacement_floor_m2_per_Hz"].get<double>()) < 0.05);
}

TEST_CASE("determinism") {
    auto a = scratch() / "det_a", b = scratch() / "det_b";
    Run ra = run_cli("synth --seed 5 --out " + a.string());
    REQUIRE(ra.rc == 0);
    std::string first = slurp(a / "trace.levi");
    Run again = run_cli("synth --seed 5 --out " + a.string());
    CHECK(ra.out == again.out);
    CHECK(slurp(a / "trace.levi") == first);
    Run rb = run_cli("synth --seed 5 --out " + b.string());
    CHECK(slurp(b / "trace.levi") == first);

    Run fa = run_cli("fit-s21 --seed 3 --out " + a.string());
    Run fb = run_cli("fit-s21 --seed 3 --out " + b.string());
    REQUIRE(fa.rc == 0);
    CHECK(fa.out == fb.out);
    for (const auto& e : fs::directory_iterator(a))
        if (e.path().extension() == ".csv")
            CHECK(slurp(e.path()) == slurp(b / e.path().filename()));

    Run c1 = run_cli("synth --seed 6 --format csv");
    Run c2 = run_cli("synth --seed 6 --format csv");
    CHECK(c1.out == c2.out);
    CHECK(c1.out.find("provenance.seed,6") != std::string::npos);
}

TEST_CASE("numbers carry units in CSV headers") {
    auto dir = scratch() / "units";
    REQUIRE(run_cli("fluxmap --out " + dir.string()).rc == 0);
    std::ifstream in(dir / "fluxmap.csv");
    std::string header;
    while (std::getline(in, header) && header.rfind("#", 0) == 0) {}
    CHECK(header.find("dx_um") != std::string::npos);
    CHECK(header.find("dy_um") != std::string::npos);
}

}
