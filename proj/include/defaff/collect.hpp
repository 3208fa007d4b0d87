#pragma once

#include <optional>

#include "defaff/record.hpp"
#include "defaff/task.hpp"

namespace defaff::data {

struct CollectionStarvation : std::runtime_error {
    explicit CollectionStarvation(const std::string& what) : std::runtime_error(what) {}
};

// Fill in defaults that depend on the object (perturb radius).
CollectionConfig resolve_collection_config(CollectionConfig cfg, const task::Task& task);

// Near-target start state: the target layout plus small particle jitter,
// settled.
sim::ParticleSystem gen_near_target_state(const task::Task& task, std::uint64_t rng_seed,
                                          double jitter_scale = 0.2);

struct Expansion {
    sim::ParticleSystem state;       // settled state after the forward action
    percept::GridCoord fwd_pick;     // the action that produced it
    percept::GridCoord fwd_place;
    double similarity = 0.0;         // IoU between restored and original state
};

// One reversed-action probe: fold the state forward with |place - pick| <=
// perturb_radius, undo it with the reversed action, and accept the folded
// state as a harder start iff the restored state matches the original with
// IoU >= similarity_tau.
std::optional<Expansion> fold_to_unfold_expand(const sim::ParticleSystem& state,
                                               const task::Task& task,
                                               const CollectionConfig& cfg, Rng& rng);

// Diverse labeled interactions from one start state: a random_failure_fraction
// of uniformly random actions, the rest biased around the known reverse
// action. NoGrasp draws are retried up to a bound, then recorded flagged.
std::vector<InteractionRecord> sample_interactions(
    const sim::ParticleSystem& start_state, std::optional<percept::GridCoord> reverse_pick,
    std::optional<percept::GridCoord> reverse_place, int count, int stage, const task::Task& task,
    const CollectionConfig& cfg, Rng& rng);

struct StageStats {
    int stage = 0;
    long expand_attempts = 0;
    long expand_accepted = 0;
    double mean_similarity = 0.0;   // over accepted expansions
    double mean_start_dist = 0.0;   // dist-to-target of the stage's start states
    double mean_dist_after = 0.0;   // over the stage's records
};

struct CollectionResult {
    std::vector<StageDataset> datasets;
    std::vector<StageStats> stats;
};

// Stage 1 starts are one expansion away from near-target states; stage i
// starts are one expansion away from accepted stage i-1 starts.
CollectionResult build_stage_datasets(const task::Task& task, const CollectionConfig& cfg,
                                      std::uint64_t seed);

}  // namespace defaff::data
