#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "defaff/geometry.hpp"
#include "defaff/rng.hpp"
#include "defaff/serialize.hpp"

namespace defaff::sim {

struct Rope {
    int n_particles = 0;
};

struct Ring {
    int n_particles = 0;
};

struct Cloth {
    int rows = 0;
    int cols = 0;
};

using Topology = std::variant<Rope, Ring, Cloth>;

struct DistanceConstraint {
    int i = 0;
    int j = 0;
    double rest_length = 0.0;
    double compliance = 0.0;
};

struct ParticleSystem {
    std::vector<Vec3> positions;
    std::vector<Vec3> velocities;
    std::vector<double> inverse_masses;  // 0 = kinematically held
    std::vector<DistanceConstraint> constraints;
    Topology topology;
    double spacing = 0.0;  // builder rest spacing, used for grid splat and grab defaults

    int size() const { return static_cast<int>(positions.size()); }
    int held_index() const;  // -1 when no particle is held
};

struct SimConfig {
    double dt = 0.01;
    int substeps = 1;
    int solver_iterations = 20;
    double gravity = 9.8;
    double damping = 0.02;
    double ground_friction = 0.3;
    double grab_radius = 0.0;     // set from spacing by for_spacing()
    double lift_height = 0.0;
    double release_height = 0.0;
    double move_speed = 0.25;
    double settle_velocity_eps = 0.01;
    int settle_max_steps = 500;
    Rect workspace = Rect::centered_square(0.35);

    // grab = 1.5 spacings, lift = 6 spacings.
    static SimConfig for_spacing(double spacing);
};

struct WorldAction {
    Vec2 pick_point;
    Vec2 place_point;
};

ParticleSystem build_rope(int n_particles, double spacing);
ParticleSystem build_ring(int n_particles, double spacing);
ParticleSystem build_cloth(int rows, int cols, double spacing);

void step(ParticleSystem& system, const SimConfig& cfg);

struct SettleResult {
    bool converged = false;
    int steps = 0;
};

SettleResult settle(ParticleSystem& system, const SimConfig& cfg);

struct ActionResult {
    bool grasped = false;   // false: no particle within grab_radius of the pick point
    bool settled = false;
    int grabbed_particle = -1;
};

// Nearest particle within grab_radius is held, lifted, carried above the
// place point, lowered and released; the system is settled on return. When
// nothing is graspable the system is left settled but otherwise unchanged.
ActionResult execute_pick_place(ParticleSystem& system, const WorldAction& action,
                                const SimConfig& cfg);

// Randomized crumpling initializer: k times, grab a random particle, lift it
// to a random height, translate randomly, release and settle.
void perturb_drop(ParticleSystem& system, const SimConfig& cfg, int k, std::uint64_t rng_seed);

// Nearest particle to a table point within radius; ties broken by lowest
// index. Returns -1 when none qualifies.
int nearest_particle(const ParticleSystem& system, const Vec2& point, double radius);

double max_speed(const ParticleSystem& system);
double max_constraint_violation(const ParticleSystem& system);  // relative to rest length

std::vector<std::uint8_t> serialize_system(const ParticleSystem& system);
ParticleSystem deserialize_system(const std::vector<std::uint8_t>& bytes);

void save_system(const std::string& path, const ParticleSystem& system);
ParticleSystem load_system(const std::string& path);

}  // namespace defaff::sim
