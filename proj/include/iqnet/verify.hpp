#pragma once

#include <string>
#include <vector>

namespace iqnet {

// Outcome of one acceptance criterion of the verification suite.
struct CriterionResult {
    int index = 0;        // 1-based criterion number
    std::string name;     // short behavioural label
    bool pass = false;
    std::string detail;   // measured values vs pinned thresholds
    double seconds = 0.0; // wall time spent on this criterion
};

inline constexpr int kCriterionCount = 14;

// Runs the selected criteria (1-based indices; empty = all). Results come
// back sorted by index, computed once each, with expensive intermediate
// simulations shared between criteria that use the same setup. A criterion
// that throws is reported as a failure carrying the error text; this never
// throws for in-range indices.
std::vector<CriterionResult> run_criteria(std::vector<int> indices = {});

// Convenience wrapper for a single criterion.
CriterionResult run_criterion(int index);

}  // namespace iqnet
