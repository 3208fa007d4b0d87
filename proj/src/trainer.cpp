#include "defaff/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

namespace defaff::train {

using data::InteractionRecord;
using data::StageDataset;
using percept::GridCoord;
using percept::Observation;

double label_place_stage1(const InteractionRecord& record) {
    if (record.stage != 1)
        throw std::invalid_argument("label_place_stage1: record is not stage 1");
    return percept::clamp01(1.0 - record.dist_after);
}

double label_place_stage_i(const InteractionRecord& record, const nn::AffordanceNet& prev_pick,
                           double alpha) {
    double value = 0.0;
    try {
        value = afford::estimate_value(prev_pick, record.obs_after).value;
    } catch (const afford::EmptyObjectError&) {
        value = 0.0;
    }
    return percept::clamp01(alpha * value + (1.0 - alpha) * (1.0 - record.dist_after));
}

std::vector<double> compute_place_labels(const StageDataset& dataset,
                                         const nn::AffordanceNet* prev_pick, double alpha) {
    std::vector<double> labels(dataset.records.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        labels[i] = (prev_pick == nullptr || alpha == 0.0)
                        ? percept::clamp01(1.0 - dataset.records[i].dist_after)
                        : label_place_stage_i(dataset.records[i], *prev_pick, alpha);
    }
    return labels;
}

std::vector<double> compute_pick_targets(const StageDataset& dataset,
                                         const nn::AffordanceNet& place) {
    if (dataset.records.empty())
        throw std::invalid_argument("compute_pick_targets: empty dataset");
    std::vector<double> targets(dataset.records.size());
    // Records from the same start state are contiguous and share obs_before;
    // evaluate each (observation, pick) place map once.
    std::unordered_map<long long, double> cache;
    const Observation* group_obs = nullptr;
    for (std::size_t i = 0; i < dataset.records.size(); ++i) {
        const InteractionRecord& rec = dataset.records[i];
        if (group_obs == nullptr || rec.obs_before.occupancy != group_obs->occupancy) {
            group_obs = &rec.obs_before;
            cache.clear();
        }
        const long long key =
            static_cast<long long>(rec.pick.row) * rec.obs_before.cols + rec.pick.col;
        auto it = cache.find(key);
        if (it == cache.end()) {
            const double t = afford::aggregate_pick_target(
                afford::place_map(place, rec.obs_before, rec.pick));
            it = cache.emplace(key, t).first;
        }
        targets[i] = it->second;
    }
    return targets;
}

namespace {

// One sample's forward/backward; gradients accumulate into grads. Returns
// the prediction.
double sample_forward_backward(nn::AffordanceNet& net, const InteractionRecord& rec,
                               double d_scale, double label, std::vector<nn::Tensor>& grads,
                               double* abs_err) {
    nn::FcnTape tape;
    nn::fcn_forward(net.backbone, afford::make_input_tensor(rec.obs_before), tape);

    const int F = net.backbone.feature_width();
    std::vector<double> input;
    if (net.kind == nn::HeadKind::Pick) {
        input = nn::feature_at(tape.point_features(), rec.pick.row, rec.pick.col);
    } else {
        input = nn::feature_at(tape.point_features(), rec.pick.row, rec.pick.col);
        const std::vector<double> pf =
            nn::feature_at(tape.point_features(), rec.place.row, rec.place.col);
        input.insert(input.end(), pf.begin(), pf.end());
        input.insert(input.end(), tape.global_feature.v.begin(), tape.global_feature.v.end());
    }

    nn::HeadTape head_tape;
    const double pred = nn::head_forward(net, input, head_tape);
    const double residual = pred - label;
    *abs_err = std::fabs(residual);
    const double d_score = (residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0)) * d_scale;
    const std::vector<double> d_input = nn::head_backward(net, head_tape, d_score, grads);

    nn::Tensor d_feat = nn::Tensor::zeros(tape.point_features().shape);
    std::vector<double> d_global(net.backbone.global_width(), 0.0);
    const int H = d_feat.dim(1), W = d_feat.dim(2);
    auto scatter = [&](const GridCoord& cell, int offset) {
        for (int c = 0; c < F; ++c)
            d_feat.v[(static_cast<std::size_t>(c) * H + cell.row) * W + cell.col] +=
                d_input[offset + c];
    };
    scatter(rec.pick, 0);
    if (net.kind == nn::HeadKind::Place) {
        scatter(rec.place, F);
        for (int g = 0; g < net.backbone.global_width(); ++g) d_global[g] = d_input[2 * F + g];
    }
    nn::fcn_backward(net.backbone, tape, d_feat, d_global, grads);
    return pred;
}

void check_finite(double loss, const char* model_name, int stage, int epoch) {
    if (!std::isfinite(loss))
        throw std::runtime_error(std::string("training diverged (NaN/Inf loss) in ") +
                                 model_name + " at stage " + std::to_string(stage) + " epoch " +
                                 std::to_string(epoch));
}

}  // namespace

double train_head_epochs(nn::AffordanceNet& net, nn::AdamState& opt, const StageDataset& dataset,
                         const std::vector<double>& labels, const TrainConfig& cfg, int stage,
                         const char* model_name, std::vector<TrainLogEntry>* log) {
    if (dataset.records.empty()) throw std::invalid_argument("train: empty dataset");
    if (labels.size() != dataset.records.size())
        throw std::invalid_argument("train: label count mismatch");

    std::vector<nn::Tensor> grads = nn::zero_grads_like(net);
    auto params = nn::net_params(net);
    double last_epoch_mae = 0.0;
    const auto run_start = std::chrono::steady_clock::now();

    std::vector<std::size_t> order(dataset.records.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.epochs_per_stage; ++epoch) {
        if (cfg.shuffle) {
            Rng shuffle_rng(derive_seed(cfg.seed, {(std::uint64_t)stage,
                                                   fnv1a64(std::string(model_name)),
                                                   (std::uint64_t)epoch}));
            std::iota(order.begin(), order.end(), 0);
            shuffle_rng.shuffle(order);
        }

        double epoch_abs = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            const double d_scale = 1.0 / static_cast<double>(end - start);
            for (auto& g : grads) g.zero();
            double batch_abs = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                double abs_err = 0.0;
                sample_forward_backward(net, dataset.records[order[k]], d_scale,
                                        labels[order[k]], grads, &abs_err);
                batch_abs += abs_err;
            }
            check_finite(batch_abs, model_name, stage, epoch);
            nn::adam_step(params, grads, opt);
            epoch_abs += batch_abs;
        }
        last_epoch_mae = epoch_abs / static_cast<double>(order.size());
        if (log) {
            const double wall =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - run_start)
                    .count();
            log->push_back({stage, model_name, epoch, last_epoch_mae, wall});
        }
    }
    for (const nn::Tensor* p : nn::net_params(net))
        if (!p->finite())
            throw std::runtime_error(std::string("non-finite weights after training ") +
                                     model_name);
    return last_epoch_mae;
}

ScheduleResult run_stage_schedule(const std::vector<StageDataset>& datasets,
                                  const TrainConfig& cfg) {
    if (datasets.empty()) throw std::invalid_argument("run_stage_schedule: no datasets");
    ScheduleResult result;

    nn::ModelPair models = nn::make_models(2, cfg.width_factor, derive_seed(cfg.seed, {0x696e69}));
    nn::AdamState place_opt = nn::AdamState::make(nn::net_params(models.place), cfg.lr);
    nn::AdamState pick_opt = nn::AdamState::make(nn::net_params(models.pick), cfg.lr);

    for (std::size_t i = 0; i < datasets.size(); ++i) {
        const int stage = static_cast<int>(i) + 1;
        if (datasets[i].stage != stage)
            throw std::invalid_argument("run_stage_schedule: dataset stage out of order");

        // Stage i place labels may only read the stage i-1 pick checkpoint.
        const nn::AffordanceNet* prev_pick = nullptr;
        if (stage > 1) {
            if (models.stage != stage - 1)
                throw std::logic_error("schedule causality violated: pick checkpoint stage " +
                                       std::to_string(models.stage) + " used for stage " +
                                       std::to_string(stage));
            prev_pick = &models.pick;
        }
        const std::vector<double> labels = compute_place_labels(datasets[i], prev_pick, cfg.alpha);

        result.place_mae.push_back(train_head_epochs(models.place, place_opt, datasets[i], labels,
                                                     cfg, stage, "place", &result.log));

        const std::vector<double> targets = compute_pick_targets(datasets[i], models.place);
        result.pick_mae.push_back(train_head_epochs(models.pick, pick_opt, datasets[i], targets,
                                                    cfg, stage, "pick", &result.log));

        models.stage = stage;
        models.lineage = stage == 1 ? "stage1<-init"
                                    : "stage" + std::to_string(stage) + "<-stage" +
                                          std::to_string(stage - 1);
        result.stage_checkpoints.push_back(models);
    }
    return result;
}

ScheduleResult train_only_dist(const std::vector<StageDataset>& datasets,
                               const TrainConfig& cfg) {
    StageDataset pooled;
    pooled.stage = 1;
    pooled.seed = datasets.empty() ? 0 : datasets.front().seed;
    for (const StageDataset& ds : datasets) {
        pooled.config_fingerprint = ds.config_fingerprint;
        for (const InteractionRecord& rec : ds.records) {
            InteractionRecord copy = rec;
            copy.stage = 1;  // greedy labels ignore staging
            pooled.records.push_back(std::move(copy));
        }
    }
    if (pooled.records.empty()) throw std::invalid_argument("train_only_dist: no records");

    ScheduleResult result;
    nn::ModelPair models = nn::make_models(2, cfg.width_factor, derive_seed(cfg.seed, {0x6f64}));
    nn::AdamState place_opt = nn::AdamState::make(nn::net_params(models.place), cfg.lr);
    nn::AdamState pick_opt = nn::AdamState::make(nn::net_params(models.pick), cfg.lr);

    const std::vector<double> labels = compute_place_labels(pooled, nullptr, 0.0);
    result.place_mae.push_back(
        train_head_epochs(models.place, place_opt, pooled, labels, cfg, 1, "place", &result.log));
    const std::vector<double> targets = compute_pick_targets(pooled, models.place);
    result.pick_mae.push_back(
        train_head_epochs(models.pick, pick_opt, pooled, targets, cfg, 1, "pick", &result.log));

    models.stage = 1;
    models.lineage = "only_dist<-init";
    result.stage_checkpoints.push_back(std::move(models));
    return result;
}

IstResult ist(const nn::ModelPair& input_models, const task::Task& task, const TrainConfig& cfg,
              std::uint64_t seed) {
    IstResult result;
    result.models = input_models;
    nn::ModelPair& models = result.models;

    nn::AdamState place_opt = nn::AdamState::make(nn::net_params(models.place), cfg.ist_lr);
    nn::AdamState pick_opt = nn::AdamState::make(nn::net_params(models.pick), cfg.ist_lr);
    auto place_params = nn::net_params(models.place);
    auto pick_params = nn::net_params(models.pick);
    std::vector<nn::Tensor> place_grads = nn::zero_grads_like(models.place);
    std::vector<nn::Tensor> pick_grads = nn::zero_grads_like(models.pick);

    for (int episode = 0; episode < cfg.ist_episodes; ++episode) {
        const std::uint64_t ep_seed = derive_seed(seed, {0x697374, (std::uint64_t)episode});
        sim::ParticleSystem state = task.initial_state(ep_seed);
        Rng policy_rng(derive_seed(ep_seed, {1}));

        for (int t = 0; t < cfg.ist_max_actions; ++t) {
            IstTransition tr;
            tr.episode = episode;
            tr.step = t;
            try {
                const Observation obs = task.observe(state);
                const afford::ActionChoice action = afford::select_action(
                    models.pick, models.place, obs, cfg.exploration_eps, policy_rng);
                sim::ParticleSystem next = state;
                sim::execute_pick_place(
                    next, {obs.cell_center(action.pick), obs.cell_center(action.place)},
                    task.sim_config());
                const Observation obs_after = task.observe(next);
                const double dist_after = task.dist(next, obs_after);
                tr.dist_after = dist_after;

                // Last-step labels when the result is near the target,
                // value-blended otherwise.
                double label;
                if (dist_after < cfg.ist_last_step_dist) {
                    label = percept::clamp01(1.0 - dist_after);
                } else {
                    double value = 0.0;
                    try {
                        value = afford::estimate_value(models.pick, obs_after).value;
                    } catch (const afford::EmptyObjectError&) {
                        value = 0.0;
                    }
                    label = percept::clamp01(cfg.alpha * value +
                                             cfg.beta() * (1.0 - dist_after));
                }
                tr.place_label = label;

                InteractionRecord rec;
                rec.obs_before = obs;
                rec.pick = action.pick;
                rec.place = action.place;

                for (auto& g : place_grads) g.zero();
                double abs_err = 0.0;
                sample_forward_backward(models.place, rec, 1.0, label, place_grads, &abs_err);
                check_finite(abs_err, "ist-place", models.stage, episode);
                nn::adam_step(place_params, place_grads, place_opt);

                const double pick_target = afford::aggregate_pick_target(
                    afford::place_map(models.place, obs, action.pick));
                tr.pick_target = pick_target;
                for (auto& g : pick_grads) g.zero();
                sample_forward_backward(models.pick, rec, 1.0, pick_target, pick_grads, &abs_err);
                check_finite(abs_err, "ist-pick", models.stage, episode);
                nn::adam_step(pick_params, pick_grads, pick_opt);

                state = std::move(next);
            } catch (const afford::EmptyObjectError&) {
                tr.skipped = true;
            } catch (const std::invalid_argument&) {
                tr.skipped = true;
            }
            result.transitions.push_back(tr);
        }
        ++result.episodes;
    }
    models.lineage += "+ist";
    return result;
}

}  // namespace defaff::train
