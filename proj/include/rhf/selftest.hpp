#pragma once

#include "rhf/config.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rhf {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

// Shipped crystals: isotropic Mathieu (1, 1, 1) and anisotropic Mathieu (3, 1, 1).
RunConfig cubic_preset();
RunConfig aniso_preset();

struct SelftestOptions {
    // Numerics, defect and homogenization settings; the crystals are the shipped presets.
    RunConfig config = cubic_preset();
    std::vector<int> only; // empty: all twelve criteria
    std::function<void(const CriterionResult&)> on_result;
};

std::vector<CriterionResult> run_acceptance(const SelftestOptions& options = {});

// "[PASS] 3 small-q limit: <detail> (1.2 s)"
std::string format_criterion(const CriterionResult& r);

} // namespace rhf
