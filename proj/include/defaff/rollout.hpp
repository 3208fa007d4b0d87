#pragma once

#include "defaff/trainer.hpp"

namespace defaff::rollout {

enum class Variant { Full, OnlyDist, RandPick, NoIST };
std::string to_string(Variant v);

struct StepLog {
    percept::GridCoord pick;
    percept::GridCoord place;
    bool no_grasp = false;
    double value_before = 0.0;
    double dist_after = 0.0;
    double metric_after = 0.0;
    std::vector<std::uint8_t> obs_after_blob;  // serialized Observation, for rendering
};

struct EpisodeResult {
    std::uint64_t seed = 0;
    double metric_initial = 0.0;
    double metric_final = 0.0;
    double metric_goal = 0.0;
    double score_raw = 0.0;
    double score_clamped = 0.0;
    bool success = false;  // cable ring only
    std::vector<StepLog> steps;
    std::vector<std::uint8_t> obs_initial_blob;
};

// Uniform draw over occupied cells; the RandPick pick policy.
percept::GridCoord draw_random_pick(const percept::Observation& obs, Rng& rng);

// perturb_drop init from the seed, then select_action / execute_pick_place
// for max_actions steps. NoGrasp steps count, leave the state unchanged and
// are logged. random_pick replaces the pick policy with a uniform draw over
// occupied cells (the RandPick ablation).
EpisodeResult run_episode(const nn::ModelPair& models, const task::Task& task,
                          std::uint64_t seed, int max_actions, bool random_pick = false);

struct EvalSummary {
    int n = 0;
    double mean = 0.0;
    double std_error = 0.0;
    std::vector<EpisodeResult> episodes;
};

// Mean normalized score over seeds base_seed + 0 .. base_seed + n_seeds - 1.
EvalSummary evaluate(const nn::ModelPair& models, const task::Task& task, int n_seeds,
                     std::uint64_t base_seed, int max_actions, bool random_pick = false);

struct EvalConfig {
    int n_seeds = 20;
    std::uint64_t base_seed = 1000;
    int max_actions = 10;
};

struct AblationCell {
    bool present = false;
    double mean = 0.0;
    double std_error = 0.0;
    std::string gap_reason;
};

struct AblationReport {
    std::vector<Variant> variants;
    int num_stages = 0;
    // matrix[variant][stage-1]
    std::vector<std::vector<AblationCell>> matrix;
    // Per-episode scores at the final stage, for paired comparisons.
    std::vector<double> full_scores;
    std::vector<double> noist_scores;
    std::vector<double> onlydist_scores;
    std::vector<double> randpick_scores;
    std::string text_table() const;
};

// Full ablation grid: the stage schedule (with and without IST), the pooled
// greedy baseline, and random-pick inference, each evaluated per stage.
AblationReport ablate(const std::vector<data::StageDataset>& datasets, const task::Task& task,
                      const train::TrainConfig& tcfg, const EvalConfig& ecfg,
                      train::ScheduleResult* schedule_out = nullptr);

}  // namespace defaff::rollout
