// commands.hpp - CLI command dispatch. Each command maps onto module
// operations and produces a JSON report plus optional CSV artifacts.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "levsense/config.hpp"

namespace levsense::cli {

enum class Format { json, csv };

struct Options {
    std::string command;
    std::optional<std::filesystem::path> config;
    std::optional<std::filesystem::path> out_dir;
    std::uint64_t seed = 1;
    Format format = Format::json;
    std::vector<std::string> inputs;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitAnalysis = 1;
inline constexpr int kExitUsage = 2;

const std::vector<std::string>& command_names();

/// Runs one command. The report (or an error object) goes to out; exit code
/// follows the 0 / 1 / 2 contract.
int run(const Options& opts, std::ostream& out, std::ostream& err);

/// Results of one command without I/O side effects beyond artifacts in
/// out_dir. Throws on analysis failure.
nlohmann::json execute(const std::string& command, const config::RunConfig& cfg,
                       const Options& opts);

/// Flattens a JSON object into key,value lines (nested keys joined by '.').
std::string to_csv_lines(const nlohmann::json& j);

}  // namespace levsense::cli
