#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "levsense/commands.hpp"

int main(int argc, char** argv) {
    using namespace levsense;

    CLI::App app{"levsense: levitated-sphere flux readout analysis"};
    app.set_version_flag("--version", std::string(LEVSENSE_VERSION));

    cli::Options opts;
    std::string config, out_dir, format = "json";
    std::string commands;
    for (const auto& n : cli::command_names()) commands += (commands.empty() ? "" : ", ") + n;

    app.add_option("command", opts.command, "one of: " + commands)->required();
    app.add_option("inputs", opts.inputs, "input files (trace, S21 or tuning CSV)");
    app.add_option("--config", config, "run configuration (key = value text or JSON)");
    app.add_option("--out", out_dir, "directory for reports and CSV artifacts");
    app.add_option("--seed", opts.seed, "seed for synthetic data")->capture_default_str();
    app.add_option("--format", format, "stdout format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : cli::kExitUsage;
    }

    if (!config.empty()) opts.config = config;
    if (!out_dir.empty()) opts.out_dir = out_dir;
    opts.format = format == "csv" ? cli::Format::csv : cli::Format::json;
    return cli::run(opts, std::cout, std::cerr);
}
