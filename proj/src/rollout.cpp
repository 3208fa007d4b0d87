#include "defaff/rollout.hpp"

#include <cmath>
#include <sstream>

namespace defaff::rollout {

using percept::Observation;

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::OnlyDist: return "only_dist";
        case Variant::RandPick: return "rand_pick";
        case Variant::NoIST: return "no_ist";
    }
    return "?";
}

percept::GridCoord draw_random_pick(const Observation& obs, Rng& rng) {
    const std::vector<int> occ = obs.occupied_indices();
    if (occ.empty()) throw afford::EmptyObjectError();
    return obs.coord(occ[rng.bounded(occ.size())]);
}

EpisodeResult run_episode(const nn::ModelPair& models, const task::Task& task,
                          std::uint64_t seed, int max_actions, bool random_pick) {
    EpisodeResult ep;
    ep.seed = seed;
    ep.metric_goal = task.metric_goal();

    sim::ParticleSystem state = task.initial_state(seed);
    Observation obs = task.observe(state);
    ep.metric_initial = task.metric(state, obs);
    ep.metric_final = ep.metric_initial;
    ep.obs_initial_blob = percept::serialize_observation(obs);

    Rng rng(derive_seed(seed, {0x657049}));

    for (int t = 0; t < max_actions; ++t) {
        StepLog step;
        const std::vector<int> occ = obs.occupied_indices();
        if (occ.empty()) break;  // object fully out of view; nothing to do

        step.value_before = afford::estimate_value(models.pick, obs).value;

        percept::GridCoord pick, place;
        if (random_pick) {
            pick = draw_random_pick(obs, rng);
            place = obs.coord(afford::place_map(models.place, obs, pick).argmax_index());
        } else {
            const afford::ActionChoice a =
                afford::select_action(models.pick, models.place, obs, 0.0, rng);
            pick = a.pick;
            place = a.place;
        }
        step.pick = pick;
        step.place = place;

        const sim::ActionResult res = sim::execute_pick_place(
            state, {obs.cell_center(pick), obs.cell_center(place)}, task.sim_config());
        step.no_grasp = !res.grasped;

        obs = task.observe(state);
        step.dist_after = task.dist(state, obs);
        step.metric_after = task.metric(state, obs);
        step.obs_after_blob = percept::serialize_observation(obs);
        ep.metric_final = step.metric_after;
        ep.steps.push_back(std::move(step));
    }

    const double denom = ep.metric_goal - ep.metric_initial;
    ep.score_raw = std::fabs(denom) < 1e-12
                       ? 0.0
                       : percept::normalized_score(ep.metric_initial, ep.metric_final,
                                                   ep.metric_goal);
    ep.score_clamped = percept::clamp01(ep.score_raw);
    ep.success = task.success(state);
    return ep;
}

EvalSummary evaluate(const nn::ModelPair& models, const task::Task& task, int n_seeds,
                     std::uint64_t base_seed, int max_actions, bool random_pick) {
    if (n_seeds < 1) throw std::invalid_argument("evaluate: need n_seeds >= 1");
    EvalSummary s;
    s.n = n_seeds;
    s.episodes.reserve(n_seeds);
    for (int i = 0; i < n_seeds; ++i)
        s.episodes.push_back(run_episode(models, task, base_seed + i, max_actions, random_pick));

    double sum = 0.0;
    for (const EpisodeResult& ep : s.episodes) sum += ep.score_raw;
    s.mean = sum / n_seeds;
    double var = 0.0;
    for (const EpisodeResult& ep : s.episodes) {
        const double d = ep.score_raw - s.mean;
        var += d * d;
    }
    var = n_seeds > 1 ? var / (n_seeds - 1) : 0.0;
    s.std_error = std::sqrt(var / n_seeds);
    return s;
}

std::string AblationReport::text_table() const {
    std::ostringstream os;
    os << "variant";
    for (int k = 1; k <= num_stages; ++k) os << "\tstage" << k;
    os << "\n";
    for (std::size_t v = 0; v < variants.size(); ++v) {
        os << to_string(variants[v]);
        for (int k = 0; k < num_stages; ++k) {
            const AblationCell& cell = matrix[v][k];
            if (cell.present) {
                os << "\t";
                os.setf(std::ios::fixed);
                os.precision(3);
                os << cell.mean;
                os.unsetf(std::ios::fixed);
            } else {
                os << "\t(gap)";
            }
        }
        os << "\n";
    }
    return os.str();
}

AblationReport ablate(const std::vector<data::StageDataset>& datasets, const task::Task& task,
                      const train::TrainConfig& tcfg, const EvalConfig& ecfg,
                      train::ScheduleResult* schedule_out) {
    AblationReport report;
    report.variants = {Variant::Full, Variant::NoIST, Variant::OnlyDist, Variant::RandPick};
    report.num_stages = static_cast<int>(datasets.size());
    report.matrix.assign(report.variants.size(),
                         std::vector<AblationCell>(report.num_stages));

    auto scores_of = [](const EvalSummary& s) {
        std::vector<double> out;
        out.reserve(s.episodes.size());
        for (const EpisodeResult& ep : s.episodes) out.push_back(ep.score_raw);
        return out;
    };
    auto cell_of = [](const EvalSummary& s) {
        AblationCell c;
        c.present = true;
        c.mean = s.mean;
        c.std_error = s.std_error;
        return c;
    };
    auto gap = [](const std::string& why) {
        AblationCell c;
        c.gap_reason = why;
        return c;
    };

    train::ScheduleResult schedule = train::run_stage_schedule(datasets, tcfg);
    if (schedule_out) *schedule_out = schedule;

    // OnlyDist is trained once on the pooled data; its row repeats per stage.
    AblationCell onlydist_cell;
    try {
        train::ScheduleResult od = train::train_only_dist(datasets, tcfg);
        const EvalSummary s = evaluate(od.stage_checkpoints.back(), task, ecfg.n_seeds,
                                       ecfg.base_seed, ecfg.max_actions);
        onlydist_cell = cell_of(s);
        report.onlydist_scores = scores_of(s);
    } catch (const std::exception& e) {
        onlydist_cell = gap(e.what());
    }

    for (int k = 0; k < report.num_stages; ++k) {
        const nn::ModelPair& staged = schedule.stage_checkpoints[k];

        try {
            const EvalSummary s =
                evaluate(staged, task, ecfg.n_seeds, ecfg.base_seed, ecfg.max_actions);
            report.matrix[1][k] = cell_of(s);  // NoIST
            if (k == report.num_stages - 1) report.noist_scores = scores_of(s);
        } catch (const std::exception& e) {
            report.matrix[1][k] = gap(e.what());
        }

        try {
            const train::IstResult tuned =
                train::ist(staged, task, tcfg, derive_seed(tcfg.seed, {0x61626c, (std::uint64_t)k}));
            const EvalSummary full =
                evaluate(tuned.models, task, ecfg.n_seeds, ecfg.base_seed, ecfg.max_actions);
            report.matrix[0][k] = cell_of(full);  // Full
            if (k == report.num_stages - 1) report.full_scores = scores_of(full);

            const EvalSummary rp = evaluate(tuned.models, task, ecfg.n_seeds, ecfg.base_seed,
                                            ecfg.max_actions, /*random_pick=*/true);
            report.matrix[3][k] = cell_of(rp);  // RandPick
            if (k == report.num_stages - 1) report.randpick_scores = scores_of(rp);
        } catch (const std::exception& e) {
            report.matrix[0][k] = gap(e.what());
            report.matrix[3][k] = gap(e.what());
        }

        report.matrix[2][k] = onlydist_cell;
    }
    return report;
}

}  // namespace defaff::rollout
