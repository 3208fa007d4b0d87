#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "defaff/observation.hpp"

namespace defaff::data {

enum class Outcome : std::uint8_t { Normal = 0, NoGrasp = 1 };

struct InteractionRecord {
    percept::Observation obs_before;
    std::vector<std::uint8_t> sim_state_before;  // serialized ParticleSystem
    percept::GridCoord pick;
    percept::GridCoord place;
    percept::Observation obs_after;
    double dist_after = 0.0;
    int stage = 1;
    Outcome outcome = Outcome::Normal;
};

struct CollectionConfig {
    int records_per_stage = 2000;
    double similarity_tau = 0.85;
    int actions_per_state = 8;
    double perturb_radius = 0.0;  // meters; 0 = 4 * object spacing
    double random_failure_fraction = 0.3;
    int num_stages = 5;
    int max_nograsp_retries = 10;
    int max_expand_tries = 200;  // per start slot; exceeding aborts collection
};

struct StageDataset {
    int stage = 1;
    std::uint64_t seed = 0;
    std::uint64_t config_fingerprint = 0;
    std::vector<InteractionRecord> records;
};

std::uint64_t collection_fingerprint(const CollectionConfig& cfg, const std::string& task_name,
                                     int grid_rows, int grid_cols, std::uint64_t seed);

std::vector<std::uint8_t> dataset_bytes(const StageDataset& ds);
StageDataset dataset_from_bytes(const std::vector<std::uint8_t>& bytes);

void save_dataset(const std::string& path, const StageDataset& ds);
StageDataset load_dataset(const std::string& path);

// One JSON object per record; particle state and observations as base64.
void export_dataset_jsonl(const std::string& path, const StageDataset& ds);

}  // namespace defaff::data
