#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace defaff::nn {

struct LayerCheckResult {
    std::string layer;
    double max_rel_err = 0.0;
    int compared = 0;
};

// Central finite-difference comparison (eps = 1e-4) of every layer's
// backward pass, plus end-to-end pick/place pipelines on a tiny backbone.
// corrupt_layer >= 0 perturbs that entry's analytic gradient; used as a
// negative control in tests.
std::vector<LayerCheckResult> run_gradient_checks(std::uint64_t seed, int corrupt_layer = -1);

bool gradient_checks_pass(const std::vector<LayerCheckResult>& results, double tol = 1e-3);

}  // namespace defaff::nn
