#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "defaff/rollout.hpp"

using namespace defaff;
using namespace defaff::rollout;

namespace {

task::Task tiny_task() {
    task::TaskConfig tc = task::default_task_config(task::TaskKind::RopeConfiguration);
    tc.grid_rows = tc.grid_cols = 16;
    tc.rope_particles = 12;
    tc.spacing = 0.035;
    return task::Task(tc);
}

nn::ModelPair tiny_models(std::uint64_t seed) { return nn::make_models(2, 0.0625, seed); }

}  // namespace

TEST_CASE("run_episode: zero actions gives score 0") {
    task::Task t = tiny_task();
    nn::ModelPair m = tiny_models(3);
    EpisodeResult ep = run_episode(m, t, 12, 0);
    CHECK(ep.steps.empty());
    CHECK(ep.metric_final == ep.metric_initial);
    CHECK(ep.score_raw == 0.0);
    CHECK(ep.score_clamped == 0.0);
}

TEST_CASE("run_episode: deterministic per seed and leaves weights untouched") {
    task::Task t = tiny_task();
    nn::ModelPair m = tiny_models(5);
    const std::uint64_t before = nn::models_fingerprint(m);

    EpisodeResult a = run_episode(m, t, 7, 4);
    EpisodeResult b = run_episode(m, t, 7, 4);
    CHECK(nn::models_fingerprint(m) == before);

    REQUIRE(a.steps.size() == b.steps.size());
    CHECK(a.score_raw == b.score_raw);
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].pick == b.steps[i].pick);
        CHECK(a.steps[i].place == b.steps[i].place);
        CHECK(a.steps[i].dist_after == b.steps[i].dist_after);
    }

    // Steps carry value estimates and observations for rendering.
    for (const StepLog& s : a.steps) {
        CHECK(s.value_before >= 0.0);
        CHECK(s.value_before <= 1.0);
        CHECK_FALSE(s.obs_after_blob.empty());
    }
}

TEST_CASE("normalized score is recomputable from the logged metrics") {
    task::Task t = tiny_task();
    nn::ModelPair m = tiny_models(9);
    EpisodeResult ep = run_episode(m, t, 21, 4);
    if (std::fabs(ep.metric_goal - ep.metric_initial) > 1e-12) {
        const double again =
            percept::normalized_score(ep.metric_initial, ep.metric_final, ep.metric_goal);
        CHECK(std::fabs(again - ep.score_raw) < 1e-12);
    }
    if (!ep.steps.empty())
        CHECK(ep.metric_final == ep.steps.back().metric_after);
}

TEST_CASE("evaluate: summary statistics over seeds") {
    task::Task t = tiny_task();
    nn::ModelPair m = tiny_models(11);

    EvalSummary one = evaluate(m, t, 1, 100, 2);
    CHECK(one.n == 1);
    CHECK(one.mean == one.episodes[0].score_raw);
    CHECK(one.std_error == 0.0);

    EvalSummary s1 = evaluate(m, t, 3, 100, 2);
    EvalSummary s2 = evaluate(m, t, 3, 100, 2);
    CHECK(s1.mean == s2.mean);
    CHECK(s1.std_error == s2.std_error);
    CHECK(s1.episodes[2].seed == 102);

    CHECK_THROWS_AS(evaluate(m, t, 0, 1, 2), std::invalid_argument);
}

TEST_CASE("random pick draws uniformly over occupied cells") {
    task::Task t = tiny_task();
    sim::ParticleSystem s = t.initial_state(31);
    percept::Observation obs = t.observe(s);
    const std::vector<int> occ = obs.occupied_indices();
    const int k = static_cast<int>(occ.size());
    REQUIRE(k >= 3);

    const int draws = 10000;
    std::vector<int> counts(k, 0);
    Rng rng(77);
    for (int i = 0; i < draws; ++i) {
        const percept::GridCoord c = draw_random_pick(obs, rng);
        const int idx = obs.index(c);
        const auto it = std::find(occ.begin(), occ.end(), idx);
        REQUIRE(it != occ.end());
        counts[static_cast<int>(it - occ.begin())] += 1;
    }
    const double expected = static_cast<double>(draws) / k;
    double chi2 = 0.0;
    for (int c : counts) {
        const double d = c - expected;
        chi2 += d * d / expected;
    }
    // Wilson-Hilferty critical value at p = 0.01.
    const double df = k - 1;
    const double crit =
        df * std::pow(1.0 - 2.0 / (9.0 * df) + 2.3263 * std::sqrt(2.0 / (9.0 * df)), 3.0);
    CHECK(chi2 < crit);
}

TEST_CASE("ablation matrix has the stage-by-variant shape; only-dist row is constant") {
    task::Task t = tiny_task();
    data::CollectionConfig ccfg;
    ccfg.records_per_stage = 8;
    ccfg.actions_per_state = 4;
    ccfg.num_stages = 2;
    ccfg.similarity_tau = 0.5;
    data::CollectionResult coll = data::build_stage_datasets(t, ccfg, 61);

    train::TrainConfig tcfg;
    tcfg.width_factor = 0.0625;
    tcfg.epochs_per_stage = 1;
    tcfg.batch_size = 8;
    tcfg.ist_episodes = 1;
    tcfg.ist_max_actions = 2;
    tcfg.seed = 2;

    EvalConfig ecfg;
    ecfg.n_seeds = 2;
    ecfg.base_seed = 500;
    ecfg.max_actions = 2;

    AblationReport rep = ablate(coll.datasets, t, tcfg, ecfg);
    REQUIRE(rep.num_stages == 2);
    REQUIRE(rep.variants.size() == 4);
    for (const auto& row : rep.matrix) REQUIRE(row.size() == 2);

    // OnlyDist is trained once on pooled data; its row repeats.
    const int od = 2;
    CHECK(rep.matrix[od][0].present);
    CHECK(rep.matrix[od][0].mean == rep.matrix[od][1].mean);

    CHECK(rep.full_scores.size() == 2);
    CHECK(rep.noist_scores.size() == 2);

    const std::string table = rep.text_table();
    CHECK(table.find("stage1") != std::string::npos);
    CHECK(table.find("stage2") != std::string::npos);
    CHECK(table.find("only_dist") != std::string::npos);
}
