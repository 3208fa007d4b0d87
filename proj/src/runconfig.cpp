#include "defaff/runconfig.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace defaff::config {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Setter {
    RunConfig& cfg;

    void apply(const std::string& key, const std::string& value) {
        auto d = [&]() { return std::stod(value); };
        auto i = [&]() { return std::stoi(value); };
        auto u = [&]() { return static_cast<std::uint64_t>(std::stoull(value)); };

        if (key == "task") cfg.task.kind = task::task_kind_from_string(value);
        else if (key == "seed") cfg.seed = u();
        else if (key == "out") cfg.out_dir = value;
        else if (key == "threads") cfg.threads = i();
        else if (key == "grid.rows") cfg.task.grid_rows = i();
        else if (key == "grid.cols") cfg.task.grid_cols = i();
        else if (key == "grid.splat_radius_cells") cfg.task.splat_radius_cells = d();
        else if (key == "workspace.half_extent") cfg.task.workspace_half_extent = d();
        else if (key == "object.spacing") cfg.task.spacing = d();
        else if (key == "object.rope_particles") cfg.task.rope_particles = i();
        else if (key == "object.ring_particles") cfg.task.ring_particles = i();
        else if (key == "object.cloth_rows") cfg.task.cloth_rows = i();
        else if (key == "object.cloth_cols") cfg.task.cloth_cols = i();
        else if (key == "object.rope_target_keypoints") cfg.task.rope_target_keypoints = i();
        else if (key == "object.perturb_grabs") cfg.task.perturb_grabs = i();
        else if (key == "sim.dt") cfg.task.sim.dt = d();
        else if (key == "sim.substeps") cfg.task.sim.substeps = i();
        else if (key == "sim.solver_iterations") cfg.task.sim.solver_iterations = i();
        else if (key == "sim.gravity") cfg.task.sim.gravity = d();
        else if (key == "sim.damping") cfg.task.sim.damping = d();
        else if (key == "sim.ground_friction") cfg.task.sim.ground_friction = d();
        else if (key == "sim.move_speed") cfg.task.sim.move_speed = d();
        else if (key == "sim.settle_velocity_eps") cfg.task.sim.settle_velocity_eps = d();
        else if (key == "sim.settle_max_steps") cfg.task.sim.settle_max_steps = i();
        else if (key == "collect.records_per_stage") cfg.collect.records_per_stage = i();
        else if (key == "collect.similarity_tau") cfg.collect.similarity_tau = d();
        else if (key == "collect.actions_per_state") cfg.collect.actions_per_state = i();
        else if (key == "collect.perturb_radius") cfg.collect.perturb_radius = d();
        else if (key == "collect.random_failure_fraction")
            cfg.collect.random_failure_fraction = d();
        else if (key == "collect.num_stages") cfg.collect.num_stages = i();
        else if (key == "train.alpha") cfg.train.alpha = d();
        else if (key == "train.lr") cfg.train.lr = d();
        else if (key == "train.ist_lr") cfg.train.ist_lr = d();
        else if (key == "train.batch_size") cfg.train.batch_size = i();
        else if (key == "train.epochs_per_stage") cfg.train.epochs_per_stage = i();
        else if (key == "train.ist_episodes") cfg.train.ist_episodes = i();
        else if (key == "train.ist_max_actions") cfg.train.ist_max_actions = i();
        else if (key == "train.exploration_eps") cfg.train.exploration_eps = d();
        else if (key == "train.ist_last_step_dist") cfg.train.ist_last_step_dist = d();
        else if (key == "train.width_factor") cfg.train.width_factor = d();
        else if (key == "train.shuffle") cfg.train.shuffle = value == "true" || value == "1";
        else if (key == "eval.n_seeds") cfg.eval.n_seeds = i();
        else if (key == "eval.base_seed") cfg.eval.base_seed = u();
        else if (key == "eval.max_actions") cfg.eval.max_actions = i();
        else throw std::invalid_argument("unknown config key: " + key);
    }
};

void validate(const RunConfig& cfg) {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (cfg.task.grid_rows < 8 || cfg.task.grid_cols < 8) fail("grid must be at least 8x8");
    if (cfg.task.grid_rows % 16 != 0 || cfg.task.grid_cols % 16 != 0)
        fail("grid dims must divide by 16 for the backbone");
    if (cfg.task.spacing <= 0.0) fail("object.spacing must be > 0");
    if (cfg.task.sim.dt <= 0.0 || cfg.task.sim.substeps < 1 || cfg.task.sim.solver_iterations < 1)
        fail("sim timestep settings out of range");
    if (cfg.collect.similarity_tau <= 0.0 || cfg.collect.similarity_tau >= 1.0)
        fail("collect.similarity_tau must be in (0,1)");
    if (cfg.collect.random_failure_fraction < 0.0 || cfg.collect.random_failure_fraction > 1.0)
        fail("collect.random_failure_fraction must be in [0,1]");
    if (cfg.collect.num_stages < 1) fail("collect.num_stages must be >= 1");
    if (cfg.train.alpha < 0.0 || cfg.train.alpha > 1.0) fail("train.alpha must be in [0,1]");
    if (cfg.train.lr <= 0.0 || cfg.train.ist_lr <= 0.0) fail("learning rates must be > 0");
    if (cfg.train.batch_size < 1) fail("train.batch_size must be >= 1");
    if (cfg.train.width_factor <= 0.0 || cfg.train.width_factor > 1.0)
        fail("train.width_factor must be in (0,1]");
    if (cfg.eval.n_seeds < 1) fail("eval.n_seeds must be >= 1");
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
    RunConfig cfg;
    Setter setter{cfg};
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            setter.apply(key, value);
        } catch (const std::invalid_argument&) {
            throw;
        } catch (const std::exception&) {
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": bad value for " + key);
        }
    }
    validate(cfg);
    // Seeds default to the run seed unless set explicitly.
    if (cfg.train.seed == 1) cfg.train.seed = cfg.seed;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config_text(buf.str());
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* s = std::getenv("DEFAFF_SEED")) {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(s));
        cfg.train.seed = cfg.seed;
    }
    if (const char* o = std::getenv("DEFAFF_OUT")) cfg.out_dir = o;
}

std::string config_echo(const RunConfig& cfg) {
    std::ostringstream os;
    os << "task = " << task::to_string(cfg.task.kind) << "\n";
    os << "seed = " << cfg.seed << "\n";
    os << "out = " << cfg.out_dir << "\n";
    os << "threads = " << cfg.threads << "\n";
    os << "grid.rows = " << cfg.task.grid_rows << "\n";
    os << "grid.cols = " << cfg.task.grid_cols << "\n";
    os << "grid.splat_radius_cells = " << cfg.task.splat_radius_cells << "\n";
    os << "workspace.half_extent = " << cfg.task.workspace_half_extent << "\n";
    os << "object.spacing = " << cfg.task.spacing << "\n";
    os << "object.rope_particles = " << cfg.task.rope_particles << "\n";
    os << "object.ring_particles = " << cfg.task.ring_particles << "\n";
    os << "object.cloth_rows = " << cfg.task.cloth_rows << "\n";
    os << "object.cloth_cols = " << cfg.task.cloth_cols << "\n";
    os << "object.rope_target_keypoints = " << cfg.task.rope_target_keypoints << "\n";
    os << "object.perturb_grabs = " << cfg.task.perturb_grabs << "\n";
    os << "sim.dt = " << cfg.task.sim.dt << "\n";
    os << "sim.substeps = " << cfg.task.sim.substeps << "\n";
    os << "sim.solver_iterations = " << cfg.task.sim.solver_iterations << "\n";
    os << "sim.gravity = " << cfg.task.sim.gravity << "\n";
    os << "sim.damping = " << cfg.task.sim.damping << "\n";
    os << "sim.ground_friction = " << cfg.task.sim.ground_friction << "\n";
    os << "sim.move_speed = " << cfg.task.sim.move_speed << "\n";
    os << "sim.settle_velocity_eps = " << cfg.task.sim.settle_velocity_eps << "\n";
    os << "sim.settle_max_steps = " << cfg.task.sim.settle_max_steps << "\n";
    os << "collect.records_per_stage = " << cfg.collect.records_per_stage << "\n";
    os << "collect.similarity_tau = " << cfg.collect.similarity_tau << "\n";
    os << "collect.actions_per_state = " << cfg.collect.actions_per_state << "\n";
    os << "collect.perturb_radius = " << cfg.collect.perturb_radius << "\n";
    os << "collect.random_failure_fraction = " << cfg.collect.random_failure_fraction << "\n";
    os << "collect.num_stages = " << cfg.collect.num_stages << "\n";
    os << "train.alpha = " << cfg.train.alpha << "\n";
    os << "train.lr = " << cfg.train.lr << "\n";
    os << "train.ist_lr = " << cfg.train.ist_lr << "\n";
    os << "train.batch_size = " << cfg.train.batch_size << "\n";
    os << "train.epochs_per_stage = " << cfg.train.epochs_per_stage << "\n";
    os << "train.ist_episodes = " << cfg.train.ist_episodes << "\n";
    os << "train.ist_max_actions = " << cfg.train.ist_max_actions << "\n";
    os << "train.exploration_eps = " << cfg.train.exploration_eps << "\n";
    os << "train.ist_last_step_dist = " << cfg.train.ist_last_step_dist << "\n";
    os << "train.width_factor = " << cfg.train.width_factor << "\n";
    os << "train.shuffle = " << (cfg.train.shuffle ? "true" : "false") << "\n";
    os << "eval.n_seeds = " << cfg.eval.n_seeds << "\n";
    os << "eval.base_seed = " << cfg.eval.base_seed << "\n";
    os << "eval.max_actions = " << cfg.eval.max_actions << "\n";
    return os.str();
}

void apply_thread_cap(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

}  // namespace defaff::config
