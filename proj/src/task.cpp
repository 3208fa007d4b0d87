#include "defaff/task.hpp"

#include <cmath>
#include <stdexcept>

namespace defaff::task {

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::SpreadCloth: return "SpreadCloth";
        case TaskKind::RopeConfiguration: return "RopeConfiguration";
        case TaskKind::CableRing: return "CableRing";
    }
    return "?";
}

TaskKind task_kind_from_string(const std::string& name) {
    if (name == "SpreadCloth") return TaskKind::SpreadCloth;
    if (name == "RopeConfiguration") return TaskKind::RopeConfiguration;
    if (name == "CableRing") return TaskKind::CableRing;
    throw std::invalid_argument("unknown task: " + name);
}

TaskConfig default_task_config(TaskKind kind) {
    TaskConfig cfg;
    cfg.kind = kind;
    return cfg;
}

std::vector<Vec2> s_curve_polyline(double rope_length, int samples) {
    // Two stacked semicircles of radius h; total arc length 2*pi*h.
    const double h = rope_length / (2.0 * M_PI);
    std::vector<Vec2> pts;
    pts.reserve(samples);
    const int half = samples / 2;
    // Upper arc: from (0, 2h) down to the origin, bulging +x.
    for (int i = 0; i < half; ++i) {
        double a = M_PI / 2.0 - M_PI * i / (half - 1);  // pi/2 -> -pi/2
        pts.push_back({h * std::cos(a), h + h * std::sin(a)});
    }
    // Lower arc: from the origin down to (0, -2h), bulging -x.
    for (int i = 1; i < half; ++i) {
        double a = M_PI / 2.0 + M_PI * i / (half - 1);  // pi/2 -> 3pi/2
        pts.push_back({h * std::cos(a), -h + h * std::sin(a)});
    }
    return pts;
}

Task::Task(TaskConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.sim.grab_radius == 0.0) {
        sim::SimConfig derived = sim::SimConfig::for_spacing(cfg_.spacing);
        derived.dt = cfg_.sim.dt;
        derived.substeps = cfg_.sim.substeps;
        derived.solver_iterations = cfg_.sim.solver_iterations;
        derived.gravity = cfg_.sim.gravity;
        derived.damping = cfg_.sim.damping;
        derived.ground_friction = cfg_.sim.ground_friction;
        derived.move_speed = cfg_.sim.move_speed;
        derived.settle_velocity_eps = cfg_.sim.settle_velocity_eps;
        derived.settle_max_steps = cfg_.sim.settle_max_steps;
        cfg_.sim = derived;
    }
    cfg_.sim.workspace = Rect::centered_square(cfg_.workspace_half_extent);

    switch (cfg_.kind) {
        case TaskKind::SpreadCloth: {
            sim::ParticleSystem flat = build_object();
            percept::Observation obs = observe(flat);
            target_ = percept::ClothFlat{percept::coverage(obs)};
            break;
        }
        case TaskKind::RopeConfiguration: {
            const double rope_len = (cfg_.rope_particles - 1) * cfg_.spacing;
            std::vector<Vec2> curve = s_curve_polyline(rope_len);
            target_ = percept::RopeShape{
                percept::resample_polyline(curve, cfg_.rope_target_keypoints)};
            break;
        }
        case TaskKind::CableRing: {
            const int n = cfg_.ring_particles;
            const double s = cfg_.spacing;
            target_ = percept::RingHull{n * s * s / (4.0 * std::tan(M_PI / n))};
            break;
        }
    }
}

sim::ParticleSystem Task::build_object() const {
    switch (cfg_.kind) {
        case TaskKind::SpreadCloth:
            return sim::build_cloth(cfg_.cloth_rows, cfg_.cloth_cols, cfg_.spacing);
        case TaskKind::RopeConfiguration:
            return sim::build_rope(cfg_.rope_particles, cfg_.spacing);
        case TaskKind::CableRing:
            return sim::build_ring(cfg_.ring_particles, cfg_.spacing);
    }
    throw std::logic_error("unreachable");
}

std::vector<Vec3> Task::target_layout() const {
    switch (cfg_.kind) {
        case TaskKind::SpreadCloth: {
            return build_object().positions;  // flat grid is the target
        }
        case TaskKind::RopeConfiguration: {
            const double rope_len = (cfg_.rope_particles - 1) * cfg_.spacing;
            std::vector<Vec2> on_curve = percept::resample_polyline(
                s_curve_polyline(rope_len), cfg_.rope_particles);
            std::vector<Vec3> out(on_curve.size());
            for (std::size_t i = 0; i < on_curve.size(); ++i)
                out[i] = {on_curve[i].x, on_curve[i].y, 0.0};
            return out;
        }
        case TaskKind::CableRing: {
            return build_object().positions;  // open polygon is the target
        }
    }
    throw std::logic_error("unreachable");
}

percept::Observation Task::observe(const sim::ParticleSystem& system) const {
    const Rect& b = cfg_.sim.workspace;
    const double cell = b.width() / cfg_.grid_cols;
    return percept::rasterize(system, b, cfg_.grid_rows, cfg_.grid_cols,
                              cfg_.splat_radius_cells * cell);
}

double Task::dist(const sim::ParticleSystem& system, const percept::Observation& obs) const {
    return percept::dist_to_target(system, obs, target_);
}

double Task::metric(const sim::ParticleSystem& system, const percept::Observation& obs) const {
    switch (cfg_.kind) {
        case TaskKind::SpreadCloth:
            return 1.0 - dist(system, obs);
        case TaskKind::RopeConfiguration:
            return -percept::rope_matching_cost(system, bounds(),
                                                std::get<percept::RopeShape>(target_));
        case TaskKind::CableRing:
            return percept::hull_area_ratio(system);
    }
    throw std::logic_error("unreachable");
}

double Task::metric_goal() const {
    return cfg_.kind == TaskKind::RopeConfiguration ? -0.04 : 1.0;
}

bool Task::success(const sim::ParticleSystem& system) const {
    if (cfg_.kind != TaskKind::CableRing) return false;
    return percept::convex_hull_success(system, 0.75);
}

sim::ParticleSystem Task::initial_state(std::uint64_t seed) const {
    sim::ParticleSystem s = build_object();
    sim::perturb_drop(s, cfg_.sim, cfg_.perturb_grabs, seed);
    return s;
}

sim::ParticleSystem Task::near_target_state(std::uint64_t seed, double jitter_scale) const {
    sim::ParticleSystem s = build_object();
    s.positions = target_layout();
    Rng rng(derive_seed(seed, {0x6e74}));
    const double j = jitter_scale * cfg_.spacing;
    for (Vec3& p : s.positions) {
        p.x += rng.uniform(-j, j);
        p.y += rng.uniform(-j, j);
    }
    sim::settle(s, cfg_.sim);
    return s;
}

}  // namespace defaff::task
