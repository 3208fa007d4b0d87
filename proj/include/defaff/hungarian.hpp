#pragma once

#include <vector>

namespace defaff::percept {

struct Assignment {
    std::vector<int> row_to_col;
    double total_cost = 0.0;
};

// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
// path, O(K^3)). Entries must be finite and non-negative.
Assignment hungarian(const std::vector<std::vector<double>>& cost);

}  // namespace defaff::percept
