#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "defaff/collect.hpp"
#include "defaff/gradcheck.hpp"
#include "defaff/render.hpp"
#include "defaff/rollout.hpp"
#include "defaff/runconfig.hpp"
#include "defaff/serialize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace defaff;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerification = 3;

struct Manifest {
    std::string command;
    config::RunConfig cfg;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    double wall_time_s = 0.0;

    void write(const fs::path& dir) const {
        json j;
        j["command"] = command;
        j["seed"] = cfg.seed;
        j["threads"] = cfg.threads;
        j["config"] = config::config_echo(cfg);
        j["wall_time_s"] = wall_time_s;
        auto files = [](const std::vector<std::string>& paths) {
            json arr = json::array();
            for (const std::string& p : paths) {
                json e;
                e["path"] = p;
                e["fnv64"] = fs::exists(p) ? file_fnv64(p) : 0;
                arr.push_back(e);
            }
            return arr;
        };
        j["inputs"] = files(inputs);
        j["outputs"] = files(outputs);
        std::ofstream out(dir / ("manifest_" + command + ".json"));
        out << j.dump(2) << "\n";
    }
};

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

config::RunConfig load_config(const std::string& config_path, long long seed_flag,
                              const std::string& out_flag, int threads_flag) {
    config::RunConfig cfg = config::load_run_config(config_path);
    config::apply_env_overrides(cfg);
    if (seed_flag >= 0) {
        cfg.seed = static_cast<std::uint64_t>(seed_flag);
        cfg.train.seed = cfg.seed;
    }
    if (!out_flag.empty()) cfg.out_dir = out_flag;
    if (threads_flag > 0) cfg.threads = threads_flag;
    config::apply_thread_cap(cfg.threads);
    fs::create_directories(cfg.out_dir);
    return cfg;
}

std::string stage_dataset_path(const config::RunConfig& cfg, int stage) {
    return (fs::path(cfg.out_dir) / ("stage_" + std::to_string(stage) + ".dds")).string();
}

std::vector<data::StageDataset> load_stage_datasets(const config::RunConfig& cfg) {
    std::vector<data::StageDataset> out;
    std::vector<int> missing;
    for (int k = 1; k <= cfg.collect.num_stages; ++k) {
        const std::string p = stage_dataset_path(cfg, k);
        if (!fs::exists(p)) {
            missing.push_back(k);
            continue;
        }
        out.push_back(data::load_dataset(p));
    }
    if (!missing.empty()) {
        std::string m = "missing stage datasets:";
        for (int k : missing) m += " " + stage_dataset_path(cfg, k);
        throw std::runtime_error(m + " (run `collect` first)");
    }
    return out;
}

json episode_to_json(const rollout::EpisodeResult& ep) {
    json j;
    j["seed"] = ep.seed;
    j["metric_initial"] = ep.metric_initial;
    j["metric_final"] = ep.metric_final;
    j["metric_goal"] = ep.metric_goal;
    j["score_raw"] = ep.score_raw;
    j["score_clamped"] = ep.score_clamped;
    j["success"] = ep.success;
    j["obs_initial_b64"] = base64_encode(ep.obs_initial_blob);
    json steps = json::array();
    for (const rollout::StepLog& s : ep.steps) {
        json sj;
        sj["pick"] = {s.pick.row, s.pick.col};
        sj["place"] = {s.place.row, s.place.col};
        sj["no_grasp"] = s.no_grasp;
        sj["value_before"] = s.value_before;
        sj["dist_after"] = s.dist_after;
        sj["metric_after"] = s.metric_after;
        sj["obs_after_b64"] = base64_encode(s.obs_after_blob);
        steps.push_back(sj);
    }
    j["steps"] = steps;
    return j;
}

int cmd_collect(const config::RunConfig& cfg, bool export_jsonl) {
    Timer timer;
    Manifest man;
    man.command = "collect";
    man.cfg = cfg;

    task::Task t(cfg.task);
    data::CollectionResult result = data::build_stage_datasets(t, cfg.collect, cfg.seed);

    json report;
    report["task"] = task::to_string(cfg.task.kind);
    report["stages"] = json::array();
    for (std::size_t i = 0; i < result.datasets.size(); ++i) {
        const std::string path = stage_dataset_path(cfg, result.datasets[i].stage);
        data::save_dataset(path, result.datasets[i]);
        man.outputs.push_back(path);
        if (export_jsonl) {
            const std::string jpath = path + ".jsonl";
            data::export_dataset_jsonl(jpath, result.datasets[i]);
            man.outputs.push_back(jpath);
        }
        const data::StageStats& st = result.stats[i];
        json sj;
        sj["stage"] = st.stage;
        sj["records"] = result.datasets[i].records.size();
        sj["expand_attempts"] = st.expand_attempts;
        sj["expand_accepted"] = st.expand_accepted;
        sj["acceptance_rate"] =
            st.expand_attempts > 0
                ? static_cast<double>(st.expand_accepted) / st.expand_attempts
                : 0.0;
        sj["mean_similarity"] = st.mean_similarity;
        sj["mean_start_dist"] = st.mean_start_dist;
        sj["mean_dist_after"] = st.mean_dist_after;
        report["stages"].push_back(sj);
        std::cout << "stage " << st.stage << ": " << result.datasets[i].records.size()
                  << " records, acceptance "
                  << (st.expand_attempts ? double(st.expand_accepted) / st.expand_attempts : 0.0)
                  << ", mean dist " << st.mean_dist_after << "\n";
    }
    // A sample start state per stage for the render command.
    for (const data::StageDataset& ds : result.datasets) {
        if (ds.records.empty()) continue;
        const std::string sp =
            (fs::path(cfg.out_dir) / ("stage_" + std::to_string(ds.stage) + "_start.dps"))
                .string();
        write_file_bytes(sp, ds.records.front().sim_state_before);
        man.outputs.push_back(sp);
    }

    const std::string rpath = (fs::path(cfg.out_dir) / "collect_report.json").string();
    std::ofstream(rpath) << report.dump(2) << "\n";
    man.outputs.push_back(rpath);
    man.wall_time_s = timer.seconds();
    man.write(cfg.out_dir);
    return kExitOk;
}

int cmd_train(const config::RunConfig& cfg) {
    Timer timer;
    Manifest man;
    man.command = "train";
    man.cfg = cfg;

    for (int k = 1; k <= cfg.collect.num_stages; ++k)
        man.inputs.push_back(stage_dataset_path(cfg, k));
    std::vector<data::StageDataset> datasets = load_stage_datasets(cfg);

    train::ScheduleResult schedule = train::run_stage_schedule(datasets, cfg.train);

    std::ofstream log((fs::path(cfg.out_dir) / "train_log.jsonl").string());
    for (const train::TrainLogEntry& e : schedule.log) {
        json j;
        j["stage"] = e.stage;
        j["model"] = e.model;
        j["epoch"] = e.epoch;
        j["mae"] = e.mae;
        j["wall_time_s"] = e.wall_time_s;
        log << j.dump() << "\n";
    }
    man.outputs.push_back((fs::path(cfg.out_dir) / "train_log.jsonl").string());

    for (const nn::ModelPair& m : schedule.stage_checkpoints) {
        const std::string p =
            (fs::path(cfg.out_dir) / ("models_stage" + std::to_string(m.stage) + ".dck"))
                .string();
        nn::save_checkpoint(p, m);
        man.outputs.push_back(p);
        std::cout << "stage " << m.stage << ": place MAE "
                  << schedule.place_mae[m.stage - 1] << ", pick MAE "
                  << schedule.pick_mae[m.stage - 1] << " -> " << p << "\n";
    }
    man.wall_time_s = timer.seconds();
    man.write(cfg.out_dir);
    return kExitOk;
}

int cmd_ist(const config::RunConfig& cfg) {
    Timer timer;
    Manifest man;
    man.command = "ist";
    man.cfg = cfg;

    const std::string in_path =
        (fs::path(cfg.out_dir) / ("models_stage" + std::to_string(cfg.collect.num_stages) + ".dck"))
            .string();
    if (!fs::exists(in_path))
        throw std::runtime_error("missing checkpoint " + in_path + " (run `train` first)");
    man.inputs.push_back(in_path);

    task::Task t(cfg.task);
    nn::ModelPair models = nn::load_checkpoint(in_path);
    train::IstResult result = train::ist(models, t, cfg.train, cfg.seed);

    const std::string out_path = (fs::path(cfg.out_dir) / "models_ist.dck").string();
    nn::save_checkpoint(out_path, result.models);
    man.outputs.push_back(out_path);

    std::ofstream log((fs::path(cfg.out_dir) / "ist_log.jsonl").string());
    for (const train::IstTransition& tr : result.transitions) {
        json j;
        j["episode"] = tr.episode;
        j["step"] = tr.step;
        j["dist_after"] = tr.dist_after;
        j["place_label"] = tr.place_label;
        j["pick_target"] = tr.pick_target;
        j["skipped"] = tr.skipped;
        log << j.dump() << "\n";
    }
    man.outputs.push_back((fs::path(cfg.out_dir) / "ist_log.jsonl").string());

    std::cout << "ist: " << result.episodes << " episodes, " << result.transitions.size()
              << " transitions -> " << out_path << "\n";
    man.wall_time_s = timer.seconds();
    man.write(cfg.out_dir);
    return kExitOk;
}

int cmd_eval(const config::RunConfig& cfg, const std::string& checkpoint) {
    Timer timer;
    Manifest man;
    man.command = "eval";
    man.cfg = cfg;

    std::string ck = checkpoint;
    if (ck.empty()) {
        const std::string ist_path = (fs::path(cfg.out_dir) / "models_ist.dck").string();
        const std::string staged =
            (fs::path(cfg.out_dir) /
             ("models_stage" + std::to_string(cfg.collect.num_stages) + ".dck"))
                .string();
        ck = fs::exists(ist_path) ? ist_path : staged;
    }
    if (!fs::exists(ck)) throw std::runtime_error("missing checkpoint " + ck);
    man.inputs.push_back(ck);

    task::Task t(cfg.task);
    nn::ModelPair models = nn::load_checkpoint(ck);
    rollout::EvalSummary summary =
        rollout::evaluate(models, t, cfg.eval.n_seeds, cfg.eval.base_seed, cfg.eval.max_actions);

    const std::string epath = (fs::path(cfg.out_dir) / "episodes.jsonl").string();
    std::ofstream elog(epath);
    for (const rollout::EpisodeResult& ep : summary.episodes)
        elog << episode_to_json(ep).dump() << "\n";
    man.outputs.push_back(epath);

    json j;
    j["checkpoint"] = ck;
    j["n_seeds"] = summary.n;
    j["mean_score"] = summary.mean;
    j["std_error"] = summary.std_error;
    const std::string spath = (fs::path(cfg.out_dir) / "eval_summary.json").string();
    std::ofstream(spath) << j.dump(2) << "\n";
    man.outputs.push_back(spath);

    std::cout << "eval: mean score " << summary.mean << " +/- " << summary.std_error << " over "
              << summary.n << " seeds\n";
    man.wall_time_s = timer.seconds();
    man.write(cfg.out_dir);
    return kExitOk;
}

int cmd_ablate(const config::RunConfig& cfg) {
    Timer timer;
    Manifest man;
    man.command = "ablate";
    man.cfg = cfg;

    for (int k = 1; k <= cfg.collect.num_stages; ++k)
        man.inputs.push_back(stage_dataset_path(cfg, k));
    std::vector<data::StageDataset> datasets = load_stage_datasets(cfg);

    task::Task t(cfg.task);
    rollout::AblationReport report = rollout::ablate(datasets, t, cfg.train, cfg.eval);

    json j;
    j["stages"] = report.num_stages;
    for (std::size_t v = 0; v < report.variants.size(); ++v) {
        json row = json::array();
        for (int k = 0; k < report.num_stages; ++k) {
            const rollout::AblationCell& cell = report.matrix[v][k];
            json cj;
            cj["present"] = cell.present;
            if (cell.present) {
                cj["mean"] = cell.mean;
                cj["std_error"] = cell.std_error;
            } else {
                cj["gap"] = cell.gap_reason;
            }
            row.push_back(cj);
        }
        j[rollout::to_string(report.variants[v])] = row;
    }
    const std::string jpath = (fs::path(cfg.out_dir) / "ablation.json").string();
    std::ofstream(jpath) << j.dump(2) << "\n";
    const std::string tpath = (fs::path(cfg.out_dir) / "ablation.txt").string();
    std::ofstream(tpath) << report.text_table();
    man.outputs.push_back(jpath);
    man.outputs.push_back(tpath);

    std::cout << report.text_table();
    man.wall_time_s = timer.seconds();
    man.write(cfg.out_dir);
    return kExitOk;
}

int cmd_render(const config::RunConfig& cfg, const std::string& checkpoint,
               const std::string& state_file, const std::string& episode_log, int scale) {
    Timer timer;
    Manifest man;
    man.command = "render";
    man.cfg = cfg;

    task::Task t(cfg.task);
    int written = 0;

    if (!checkpoint.empty() && !state_file.empty()) {
        man.inputs.push_back(checkpoint);
        man.inputs.push_back(state_file);
        nn::ModelPair models = nn::load_checkpoint(checkpoint);
        sim::ParticleSystem state = sim::load_system(state_file);
        percept::Observation obs = t.observe(state);

        const auto obs_img = render::render_observation(obs, scale);
        const std::string opath = (fs::path(cfg.out_dir) / "obs.ppm").string();
        render::write_ppm(opath, obs_img);
        man.outputs.push_back(opath);
        ++written;

        const afford::AffordanceMap pmap = afford::pick_map(models.pick, obs);
        const std::string ppath = (fs::path(cfg.out_dir) / "pick_heatmap.ppm").string();
        render::write_ppm(ppath, render::render_heatmap(pmap, scale));
        man.outputs.push_back(ppath);
        ++written;

        const percept::GridCoord best = obs.coord(pmap.argmax_index());
        const afford::AffordanceMap plmap = afford::place_map(models.place, obs, best);
        const std::string lpath = (fs::path(cfg.out_dir) / "place_heatmap.ppm").string();
        render::write_ppm(lpath, render::render_heatmap(plmap, scale, &best));
        man.outputs.push_back(lpath);
        ++written;
    }

    if (!episode_log.empty()) {
        man.inputs.push_back(episode_log);
        std::ifstream in(episode_log);
        if (!in) throw std::runtime_error("cannot open episode log " + episode_log);
        std::string line;
        int ep_idx = 0;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            int step_idx = 0;
            for (const json& sj : j["steps"]) {
                const percept::Observation obs = percept::deserialize_observation(
                    base64_decode(sj["obs_after_b64"].get<std::string>()));
                percept::GridCoord pick{sj["pick"][0].get<int>(), sj["pick"][1].get<int>()};
                percept::GridCoord place{sj["place"][0].get<int>(), sj["place"][1].get<int>()};
                const std::string fpath =
                    (fs::path(cfg.out_dir) / ("ep" + std::to_string(ep_idx) + "_step" +
                                              std::to_string(step_idx) + ".ppm"))
                        .string();
                render::write_ppm(fpath, render::render_action_frame(obs, pick, place, scale));
                man.outputs.push_back(fpath);
                ++written;
                ++step_idx;
            }
            ++ep_idx;
        }
    }

    if (written == 0)
        throw std::runtime_error(
            "render: nothing to do (need --checkpoint with --state, or --episode-log)");
    std::cout << "render: wrote " << written << " images to " << cfg.out_dir << "\n";
    man.wall_time_s = timer.seconds();
    man.write(cfg.out_dir);
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed) {
    const auto results = nn::run_gradient_checks(seed);
    for (const nn::LayerCheckResult& r : results)
        std::cout << r.layer << ": max rel err " << r.max_rel_err << " over " << r.compared
                  << " entries\n";
    if (!nn::gradient_checks_pass(results)) {
        std::cerr << "gradient check FAILED (tolerance 1e-3)\n";
        return kExitVerification;
    }
    std::cout << "all layers pass (tolerance 1e-3)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dense pick-and-place affordance for deformable objects (desk scale)"};
    app.require_subcommand(1);

    std::string config_path;
    long long seed_flag = -1;
    std::string out_flag;
    int threads_flag = 0;

    auto add_common = [&](CLI::App* sub, bool need_config = true) {
        auto* opt = sub->add_option("--config", config_path, "run configuration file");
        if (need_config) opt->required();
        sub->add_option("--seed", seed_flag, "override the run seed");
        sub->add_option("--out", out_flag, "override the output directory");
        sub->add_option("--threads", threads_flag, "cap worker threads");
    };

    CLI::App* collect = app.add_subcommand("collect", "multi-stage reversed-action collection");
    bool export_jsonl = false;
    add_common(collect);
    collect->add_flag("--export-jsonl", export_jsonl, "also write JSON-lines per stage");

    CLI::App* train_cmd = app.add_subcommand("train", "stage-by-stage affordance training");
    add_common(train_cmd);

    CLI::App* ist_cmd = app.add_subcommand("ist", "online fine-tuning of the staged models");
    add_common(ist_cmd);

    CLI::App* eval_cmd = app.add_subcommand("eval", "rollout evaluation");
    std::string eval_checkpoint;
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint to evaluate");

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "variant-by-stage score matrix");
    add_common(ablate_cmd);

    CLI::App* render_cmd = app.add_subcommand("render", "heatmaps and trajectory frames");
    std::string render_checkpoint, render_state, render_episode_log;
    int render_scale = 8;
    add_common(render_cmd);
    render_cmd->add_option("--checkpoint", render_checkpoint, "model checkpoint (.dck)");
    render_cmd->add_option("--state", render_state, "particle state file (.dps)");
    render_cmd->add_option("--episode-log", render_episode_log, "episodes.jsonl from eval");
    render_cmd->add_option("--scale", render_scale, "pixels per grid cell");

    CLI::App* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    std::uint64_t gradcheck_seed = 1;
    gradcheck_cmd->add_option("--seed", gradcheck_seed, "seed for the randomized instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (gradcheck_cmd->parsed()) return cmd_gradcheck(gradcheck_seed);

        const config::RunConfig cfg =
            load_config(config_path, seed_flag, out_flag, threads_flag);
        if (collect->parsed()) return cmd_collect(cfg, export_jsonl);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (ist_cmd->parsed()) return cmd_ist(cfg);
        if (eval_cmd->parsed()) return cmd_eval(cfg, eval_checkpoint);
        if (ablate_cmd->parsed()) return cmd_ablate(cfg);
        if (render_cmd->parsed())
            return cmd_render(cfg, render_checkpoint, render_state, render_episode_log,
                              render_scale);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
