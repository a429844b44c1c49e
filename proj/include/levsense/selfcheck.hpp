// selfcheck.hpp - golden-number and property checks shared by the
// `selfcheck` command and the acceptance test.

#pragma once

#include <string>
#include <vector>

namespace levsense::selfcheck {

struct CheckResult {
    std::string id;
    std::string title;
    bool pass;
    std::string detail;
};

std::vector<CheckResult> run_all();

/// One "PASS|FAIL <id> <title> | <detail>" line per check.
std::string format(const CheckResult& r);

}  // namespace levsense::selfcheck
