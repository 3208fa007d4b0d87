#pragma once

#include <string>

#include "defaff/nn.hpp"

namespace defaff::nn {

// The two independent affordance networks plus stage lineage. Optimizer state
// lives with the trainer, not the checkpoint.
struct ModelPair {
    AffordanceNet pick;
    AffordanceNet place;
    int stage = 0;
    std::string lineage;
};

ModelPair make_models(int in_channels, double width_factor, std::uint64_t seed);

std::vector<std::uint8_t> checkpoint_bytes(const ModelPair& models);
ModelPair models_from_bytes(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const ModelPair& models);
ModelPair load_checkpoint(const std::string& path);

std::uint64_t models_fingerprint(const ModelPair& models);

}  // namespace defaff::nn
