#pragma once

#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace topostir {

struct CriterionResult {
    int id = 0;
    std::string title;
    bool pass = false;
    std::string detail;
    double seconds = 0;
};

/// Runs the acceptance criteria (all of them when `only` is empty), printing
/// one PASS/FAIL line per criterion to `out`. Returns true when all pass.
bool run_acceptance(std::ostream& out, const std::set<int>& only = {},
                    std::vector<CriterionResult>* results = nullptr);

}  // namespace topostir
