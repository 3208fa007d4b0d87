#pragma once

#include <stdexcept>

#include "defaff/model.hpp"
#include "defaff/observation.hpp"

namespace defaff::afford {

struct EmptyObjectError : std::runtime_error {
    EmptyObjectError() : std::runtime_error("no object in view") {}
};

struct AffordanceMap {
    enum class Kind { Pick, Place };
    Kind kind = Kind::Pick;
    int rows = 0;
    int cols = 0;
    std::vector<double> scores;
    std::vector<std::uint8_t> valid;
    percept::GridCoord conditioned_on;  // place maps only

    int cells() const { return rows * cols; }
    // Masked maximum; ties broken by lowest row-major index.
    int argmax_index() const;
    double max_score() const;
};

// Observation as network input: channel 0 occupancy, channel 1 height (m).
nn::Tensor make_input_tensor(const percept::Observation& obs);

// Dense pick scores, masked to occupied cells.
AffordanceMap pick_map(const nn::AffordanceNet& pick, const percept::Observation& obs);

// Dense place scores for a fixed pick cell; every cell is a valid placement.
AffordanceMap place_map(const nn::AffordanceNet& place, const percept::Observation& obs,
                        const percept::GridCoord& p_pick);

// Training target for the conditioning pick point: best placing score.
double aggregate_pick_target(const AffordanceMap& place);

struct ValueEstimate {
    double value = 0.0;  // clamped to [0, 1]
    percept::GridCoord argmax_pick;
};

ValueEstimate estimate_value(const nn::AffordanceNet& pick, const percept::Observation& obs);

struct ActionChoice {
    percept::GridCoord pick;
    percept::GridCoord place;
    bool explored = false;
};

// Factorized argmax: best pick cell, then best place cell conditioned on it.
// With probability exploration_eps both cells are drawn uniformly instead.
ActionChoice select_action(const nn::AffordanceNet& pick, const nn::AffordanceNet& place,
                           const percept::Observation& obs, double exploration_eps, Rng& rng);

}  // namespace defaff::afford
