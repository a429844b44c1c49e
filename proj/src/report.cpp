#include "levsense/report.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include <openssl/evp.h>

#include "levsense/common.hpp"

#ifndef LEVSENSE_VERSION
#define LEVSENSE_VERSION "0.0.0"
#endif

namespace levsense::report {

std::string sha256_hex(const std::string& data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr))
        throw Error("SHA-256 digest failed");
    std::string hex;
    hex.reserve(2 * len);
    char buf[3];
    for (unsigned int k = 0; k < len; ++k) {
        std::snprintf(buf, sizeof buf, "%02x", md[k]);
        hex += buf;
    }
    return hex;
}

const char* version() { return LEVSENSE_VERSION; }

nlohmann::json Report::to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["inputs"] = inputs;
    j["results"] = results;
    j["provenance"] = {{"config_sha256", config_hash}, {"version", version()}, {"seed", seed}};
    return j;
}

Report make_report(const std::string& command, const nlohmann::json& config_echo,
                   std::uint64_t seed) {
    Report r;
    r.command = command;
    r.inputs = config_echo;
    r.config_hash = sha256_hex(config_echo.dump());
    r.seed = seed;
    return r;
}

nlohmann::json error_object(const std::string& command, const std::string& kind,
                            const std::string& message) {
    return {{"command", command}, {"error", {{"kind", kind}, {"message", message}}}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

}  // namespace levsense::report
