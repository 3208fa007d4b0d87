#pragma once

#include <string>

#include "defaff/observation.hpp"
#include "defaff/sim.hpp"
#include "defaff/targets.hpp"

namespace defaff::task {

enum class TaskKind { SpreadCloth, RopeConfiguration, CableRing };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

struct TaskConfig {
    TaskKind kind = TaskKind::SpreadCloth;
    int grid_rows = 64;
    int grid_cols = 64;
    double splat_radius_cells = 0.6;  // splat radius in cell widths
    double workspace_half_extent = 0.35;
    double spacing = 0.025;
    int rope_particles = 24;
    int ring_particles = 24;
    int cloth_rows = 10;
    int cloth_cols = 10;
    int rope_target_keypoints = 10;
    int perturb_grabs = 3;  // lift-and-drop rounds for initial episode states
    sim::SimConfig sim;     // filled by make_task when grab_radius is unset
};

// A manipulation task: the object prototype, its target, the observation
// grid and the episode metric.
class Task {
public:
    explicit Task(TaskConfig cfg);

    const TaskConfig& config() const { return cfg_; }
    const sim::SimConfig& sim_config() const { return cfg_.sim; }
    const percept::TargetSpec& target() const { return target_; }
    const Rect& bounds() const { return cfg_.sim.workspace; }

    sim::ParticleSystem build_object() const;
    // Particle layout at the target state (z = 0).
    std::vector<Vec3> target_layout() const;

    percept::Observation observe(const sim::ParticleSystem& system) const;
    double dist(const sim::ParticleSystem& system, const percept::Observation& obs) const;

    // Episode progress metric and its goal value: normalized coverage
    // (goal 1) for cloth, negative matching cost (goal -0.04) for rope,
    // hull area ratio (goal 1) for the cable ring.
    double metric(const sim::ParticleSystem& system, const percept::Observation& obs) const;
    double metric_goal() const;
    // Success only defined for the cable ring (hull ratio >= 0.75).
    bool success(const sim::ParticleSystem& system) const;

    sim::ParticleSystem initial_state(std::uint64_t seed) const;
    sim::ParticleSystem near_target_state(std::uint64_t seed, double jitter_scale = 0.2) const;

private:
    TaskConfig cfg_;
    percept::TargetSpec target_;
};

// The letter-S polyline used as the rope target, scaled so its arc length
// matches the rope length; densely sampled.
std::vector<Vec2> s_curve_polyline(double rope_length, int samples = 200);

TaskConfig default_task_config(TaskKind kind);

}  // namespace defaff::task
