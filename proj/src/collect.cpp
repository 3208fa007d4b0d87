#include "defaff/collect.hpp"

#include <algorithm>
#include <cmath>

namespace defaff::data {

using percept::GridCoord;
using percept::Observation;

CollectionConfig resolve_collection_config(CollectionConfig cfg, const task::Task& task) {
    if (cfg.similarity_tau <= 0.0 || cfg.similarity_tau >= 1.0)
        throw std::invalid_argument("similarity_tau must be in (0,1)");
    if (cfg.random_failure_fraction < 0.0 || cfg.random_failure_fraction > 1.0)
        throw std::invalid_argument("random_failure_fraction must be in [0,1]");
    if (cfg.num_stages < 1) throw std::invalid_argument("num_stages must be >= 1");
    if (cfg.perturb_radius <= 0.0) cfg.perturb_radius = 4.0 * task.config().spacing;
    return cfg;
}

sim::ParticleSystem gen_near_target_state(const task::Task& task, std::uint64_t rng_seed,
                                          double jitter_scale) {
    return task.near_target_state(rng_seed, jitter_scale);
}

namespace {

// Cells whose center is within radius of the given cell's center, in
// row-major order.
std::vector<int> cells_within(const Observation& obs, const GridCoord& center, double radius) {
    std::vector<int> out;
    const Vec2 c = obs.cell_center(center);
    const int span_r = static_cast<int>(std::ceil(radius / obs.cell_height()));
    const int span_c = static_cast<int>(std::ceil(radius / obs.cell_width()));
    for (int r = std::max(0, center.row - span_r);
         r <= std::min(obs.rows - 1, center.row + span_r); ++r) {
        for (int col = std::max(0, center.col - span_c);
             col <= std::min(obs.cols - 1, center.col + span_c); ++col) {
            if ((obs.cell_center({r, col}) - c).norm() <= radius + 1e-12)
                out.push_back(r * obs.cols + col);
        }
    }
    return out;
}

std::vector<int> occupied_within(const Observation& obs, const GridCoord& center, int span) {
    std::vector<int> out;
    for (int r = std::max(0, center.row - span); r <= std::min(obs.rows - 1, center.row + span);
         ++r)
        for (int c = std::max(0, center.col - span);
             c <= std::min(obs.cols - 1, center.col + span); ++c)
            if (obs.occupied({r, c})) out.push_back(r * obs.cols + c);
    return out;
}

sim::WorldAction to_world(const Observation& obs, const GridCoord& pick, const GridCoord& place) {
    return {obs.cell_center(pick), obs.cell_center(place)};
}

}  // namespace

std::optional<Expansion> fold_to_unfold_expand(const sim::ParticleSystem& state,
                                               const task::Task& task,
                                               const CollectionConfig& cfg, Rng& rng) {
    const Observation obs_i = task.observe(state);
    const std::vector<int> occ = obs_i.occupied_indices();
    if (occ.empty()) return std::nullopt;

    const GridCoord pick = obs_i.coord(occ[rng.bounded(occ.size())]);
    const std::vector<int> near = cells_within(obs_i, pick, cfg.perturb_radius);
    const GridCoord place = obs_i.coord(near[rng.bounded(near.size())]);

    sim::ParticleSystem folded = state;
    if (!sim::execute_pick_place(folded, to_world(obs_i, pick, place), task.sim_config()).grasped)
        return std::nullopt;

    sim::ParticleSystem restored = folded;
    if (!sim::execute_pick_place(restored, to_world(obs_i, place, pick), task.sim_config())
             .grasped)
        return std::nullopt;

    const double similarity = percept::state_similarity(task.observe(restored), obs_i);
    if (similarity < cfg.similarity_tau) return std::nullopt;

    return Expansion{std::move(folded), pick, place, similarity};
}

std::vector<InteractionRecord> sample_interactions(
    const sim::ParticleSystem& start_state, std::optional<GridCoord> reverse_pick,
    std::optional<GridCoord> reverse_place, int count, int stage, const task::Task& task,
    const CollectionConfig& cfg, Rng& rng) {
    std::vector<InteractionRecord> out;
    if (count <= 0) return out;

    const Observation obs_before = task.observe(start_state);
    const std::vector<int> occ = obs_before.occupied_indices();
    if (occ.empty()) return out;
    const std::vector<std::uint8_t> state_blob = sim::serialize_system(start_state);

    auto draw_uniform = [&]() {
        GridCoord pick = obs_before.coord(occ[rng.bounded(occ.size())]);
        GridCoord place = obs_before.coord(static_cast<int>(rng.bounded(obs_before.cells())));
        return std::pair<GridCoord, GridCoord>{pick, place};
    };

    auto draw_biased = [&]() {
        if (!reverse_pick || rng.uniform() < 0.4)
            return std::pair<GridCoord, GridCoord>{reverse_pick.value_or(obs_before.coord(occ[0])),
                                                   reverse_place.value_or(obs_before.coord(occ[0]))};
        const std::vector<int> near_pick = occupied_within(obs_before, *reverse_pick, 2);
        GridCoord pick =
            near_pick.empty() ? *reverse_pick : obs_before.coord(near_pick[rng.bounded(near_pick.size())]);
        const int dr = static_cast<int>(rng.bounded(5)) - 2;
        const int dc = static_cast<int>(rng.bounded(5)) - 2;
        GridCoord place{std::clamp(reverse_place->row + dr, 0, obs_before.rows - 1),
                        std::clamp(reverse_place->col + dc, 0, obs_before.cols - 1)};
        return std::pair<GridCoord, GridCoord>{pick, place};
    };

    for (int k = 0; k < count; ++k) {
        const bool uniform = rng.uniform() < cfg.random_failure_fraction;
        InteractionRecord rec;
        rec.stage = stage;
        rec.obs_before = obs_before;
        rec.sim_state_before = state_blob;

        bool done = false;
        for (int attempt = 0; attempt <= cfg.max_nograsp_retries && !done; ++attempt) {
            auto [pick, place] = uniform ? draw_uniform() : draw_biased();
            sim::ParticleSystem next = start_state;
            const sim::ActionResult res =
                sim::execute_pick_place(next, to_world(obs_before, pick, place), task.sim_config());
            if (!res.grasped && attempt < cfg.max_nograsp_retries) continue;
            rec.pick = pick;
            rec.place = place;
            rec.outcome = res.grasped ? Outcome::Normal : Outcome::NoGrasp;
            rec.obs_after = task.observe(next);
            rec.dist_after = task.dist(next, rec.obs_after);
            done = true;
        }
        out.push_back(std::move(rec));
    }
    return out;
}

namespace {

struct SlotResult {
    bool accepted = false;
    long attempts = 0;
    double similarity = 0.0;
    double start_dist = 0.0;
    sim::ParticleSystem start;
    std::vector<InteractionRecord> records;
    std::string error;
};

}  // namespace

CollectionResult build_stage_datasets(const task::Task& task, const CollectionConfig& raw_cfg,
                                      std::uint64_t seed) {
    const CollectionConfig cfg = resolve_collection_config(raw_cfg, task);
    if (cfg.num_stages < 1 || cfg.records_per_stage < 1 || cfg.actions_per_state < 1)
        throw std::invalid_argument("build_stage_datasets: degenerate collection config");
    const std::uint64_t fingerprint =
        collection_fingerprint(cfg, task::to_string(task.config().kind), task.config().grid_rows,
                               task.config().grid_cols, seed);

    const int n_slots = (cfg.records_per_stage + cfg.actions_per_state - 1) / cfg.actions_per_state;

    CollectionResult result;
    std::vector<sim::ParticleSystem> pool;
    pool.reserve(n_slots);
    for (int s = 0; s < n_slots; ++s)
        pool.push_back(gen_near_target_state(task, derive_seed(seed, {0, (std::uint64_t)s})));

    for (int stage = 1; stage <= cfg.num_stages; ++stage) {
        std::vector<SlotResult> slots(n_slots);

#pragma omp parallel for schedule(dynamic)
        for (int s = 0; s < n_slots; ++s) {
            SlotResult& slot = slots[s];
            try {
                Rng expand_rng(derive_seed(seed, {(std::uint64_t)stage, (std::uint64_t)s, 1}));
                const sim::ParticleSystem& base = pool[s % pool.size()];
                std::optional<Expansion> exp;
                for (int t = 0; t < cfg.max_expand_tries && !exp; ++t) {
                    ++slot.attempts;
                    exp = fold_to_unfold_expand(base, task, cfg, expand_rng);
                }
                if (exp) {  // starvation surfaced after the loop otherwise
                    slot.accepted = true;
                    slot.similarity = exp->similarity;
                    const Observation start_obs = task.observe(exp->state);
                    slot.start_dist = task.dist(exp->state, start_obs);

                    const int remaining = cfg.records_per_stage - s * cfg.actions_per_state;
                    const int take = std::min(cfg.actions_per_state, remaining);
                    Rng act_rng(derive_seed(seed, {(std::uint64_t)stage, (std::uint64_t)s, 2}));
                    slot.records = sample_interactions(exp->state, exp->fwd_place, exp->fwd_pick,
                                                       take, stage, task, cfg, act_rng);
                    slot.start = std::move(exp->state);
                }
            } catch (const std::exception& e) {
                slot.error = e.what();
            }
        }

        StageDataset ds;
        ds.stage = stage;
        ds.seed = seed;
        ds.config_fingerprint = fingerprint;
        StageStats stats;
        stats.stage = stage;

        std::vector<sim::ParticleSystem> next_pool;
        for (int s = 0; s < n_slots; ++s) {
            SlotResult& slot = slots[s];
            if (!slot.error.empty())
                throw std::runtime_error("collection failed at stage " + std::to_string(stage) +
                                         ": " + slot.error);
            stats.expand_attempts += slot.attempts;
            if (!slot.accepted)
                throw CollectionStarvation(
                    "stage " + std::to_string(stage) + " slot " + std::to_string(s) + ": no " +
                    "accepted expansion in " + std::to_string(cfg.max_expand_tries) +
                    " tries (similarity_tau or perturb_radius too strict)");
            stats.expand_accepted += 1;
            stats.mean_similarity += slot.similarity;
            stats.mean_start_dist += slot.start_dist;
            for (InteractionRecord& rec : slot.records) ds.records.push_back(std::move(rec));
            next_pool.push_back(std::move(slot.start));
        }
        stats.mean_similarity /= stats.expand_accepted;
        stats.mean_start_dist /= stats.expand_accepted;
        for (const InteractionRecord& rec : ds.records) stats.mean_dist_after += rec.dist_after;
        stats.mean_dist_after /= static_cast<double>(ds.records.size());

        result.datasets.push_back(std::move(ds));
        result.stats.push_back(stats);
        pool = std::move(next_pool);
    }
    return result;
}

}  // namespace defaff::data
