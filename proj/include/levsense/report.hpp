// report.hpp - JSON reports with provenance.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace levsense::report {

std::string sha256_hex(const std::string& data);

struct Report {
    std::string command;
    nlohmann::json inputs = nlohmann::json::object();
    nlohmann::json results = nlohmann::json::object();
    std::string config_hash;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const;
};

/// Hash of the canonical (sorted-key, compact) dump of the config echo.
Report make_report(const std::string& command, const nlohmann::json& config_echo,
                   std::uint64_t seed);

nlohmann::json error_object(const std::string& command, const std::string& kind,
                            const std::string& message);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

const char* version();

}  // namespace levsense::report
