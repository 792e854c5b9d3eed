#pragma once

#include <string>
#include <vector>

namespace cblend {

struct SelftestResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Fast invariant checks that need no trained model (a few seconds at most).
std::vector<SelftestResult> run_selftests();

} // namespace cblend
