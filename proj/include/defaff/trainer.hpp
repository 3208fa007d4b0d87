#pragma once

#include <optional>

#include "defaff/affordance.hpp"
#include "defaff/collect.hpp"
#include "defaff/model.hpp"

namespace defaff::train {

struct TrainConfig {
    double alpha = 0.5;  // value weight; beta = 1 - alpha
    double lr = 1e-4;
    double ist_lr = 5e-5;
    int batch_size = 20;
    int epochs_per_stage = 20;
    int ist_episodes = 50;
    int ist_max_actions = 10;
    double exploration_eps = 0.1;       // only used while generating IST data
    double ist_last_step_dist = 0.1;    // below this, IST labels drop the value term
    double width_factor = 0.25;
    bool shuffle = true;
    std::uint64_t seed = 1;

    double beta() const { return 1.0 - alpha; }
};

// Last-step label: 1 - dist(o', T).
double label_place_stage1(const data::InteractionRecord& record);

// Value-blended label: alpha * value(o') + beta * (1 - dist(o', T)), where
// value comes from the previous stage's pick model. An empty after-view
// contributes value 0.
double label_place_stage_i(const data::InteractionRecord& record,
                           const nn::AffordanceNet& prev_pick, double alpha);

struct TrainLogEntry {
    int stage = 0;
    std::string model;  // "place" | "pick" | "ist"
    int epoch = 0;
    double mae = 0.0;
    double wall_time_s = 0.0;  // since the enclosing training run started
};

// Supervised MAE regression of one head onto per-record labels. Returns the
// final epoch's training MAE.
double train_head_epochs(nn::AffordanceNet& net, nn::AdamState& opt,
                         const data::StageDataset& dataset, const std::vector<double>& labels,
                         const TrainConfig& cfg, int stage, const char* model_name,
                         std::vector<TrainLogEntry>* log);

std::vector<double> compute_place_labels(const data::StageDataset& dataset,
                                         const nn::AffordanceNet* prev_pick, double alpha);

// Eq-2 style targets: best placing score of this stage's place model for each
// record's (observation, pick). Place maps are evaluated once per distinct
// (observation, pick) pair.
std::vector<double> compute_pick_targets(const data::StageDataset& dataset,
                                         const nn::AffordanceNet& place);

struct ScheduleResult {
    std::vector<nn::ModelPair> stage_checkpoints;  // index 0 = stage 1
    std::vector<TrainLogEntry> log;
    std::vector<double> place_mae;  // final training MAE per stage
    std::vector<double> pick_mae;
};

// Stage-by-stage: train place (stage 1 on distance labels, stage i on
// value-blended labels from the stage i-1 pick checkpoint), then pick on the
// fresh place model's aggregated targets. Networks warm-start across stages;
// every stage checkpoint is retained.
ScheduleResult run_stage_schedule(const std::vector<data::StageDataset>& datasets,
                                  const TrainConfig& cfg);

// Single pooled training pass with distance-only labels (the greedy
// baseline): every stage's records, alpha forced to 0, no staging.
ScheduleResult train_only_dist(const std::vector<data::StageDataset>& datasets,
                               const TrainConfig& cfg);

struct IstTransition {
    int episode = 0;
    int step = 0;
    double dist_after = 0.0;
    double place_label = 0.0;
    double pick_target = 0.0;
    bool skipped = false;
};

struct IstResult {
    nn::ModelPair models;
    std::vector<IstTransition> transitions;
    int episodes = 0;
};

// Online fine-tuning: roll out the composite policy from random initial
// states and update both models on each executed transition at the IST
// learning rate.
IstResult ist(const nn::ModelPair& models, const task::Task& task, const TrainConfig& cfg,
              std::uint64_t seed);

}  // namespace defaff::train
