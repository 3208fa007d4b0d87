#include "defaff/sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace defaff::sim {

namespace {
constexpr double kGroundContactEps = 1e-9;
constexpr const char* kStateMagic = "DAFPSYS1";
}  // namespace

int ParticleSystem::held_index() const {
    for (int i = 0; i < size(); ++i)
        if (inverse_masses[i] == 0.0) return i;
    return -1;
}

SimConfig SimConfig::for_spacing(double spacing) {
    SimConfig cfg;
    cfg.grab_radius = 1.5 * spacing;
    cfg.lift_height = 6.0 * spacing;
    cfg.release_height = 0.5 * spacing;
    return cfg;
}

ParticleSystem build_rope(int n_particles, double spacing) {
    if (n_particles < 2 || spacing <= 0.0)
        throw std::invalid_argument("build_rope: need n_particles >= 2 and spacing > 0");
    ParticleSystem s;
    s.topology = Rope{n_particles};
    s.spacing = spacing;
    s.positions.resize(n_particles);
    s.velocities.assign(n_particles, {});
    s.inverse_masses.assign(n_particles, 1.0);
    const double x0 = -0.5 * spacing * (n_particles - 1);
    for (int i = 0; i < n_particles; ++i) s.positions[i] = {x0 + i * spacing, 0.0, 0.0};
    for (int i = 0; i + 1 < n_particles; ++i)
        s.constraints.push_back({i, i + 1, spacing, 0.0});
    return s;
}

ParticleSystem build_ring(int n_particles, double spacing) {
    if (n_particles < 3 || spacing <= 0.0)
        throw std::invalid_argument("build_ring: need n_particles >= 3 and spacing > 0");
    ParticleSystem s;
    s.topology = Ring{n_particles};
    s.spacing = spacing;
    s.positions.resize(n_particles);
    s.velocities.assign(n_particles, {});
    s.inverse_masses.assign(n_particles, 1.0);
    // Regular n-gon with edge length = spacing, lying on the table.
    const double radius = spacing / (2.0 * std::sin(M_PI / n_particles));
    for (int i = 0; i < n_particles; ++i) {
        double a = 2.0 * M_PI * i / n_particles;
        s.positions[i] = {radius * std::cos(a), radius * std::sin(a), 0.0};
    }
    for (int i = 0; i < n_particles; ++i)
        s.constraints.push_back({i, (i + 1) % n_particles, spacing, 0.0});
    return s;
}

ParticleSystem build_cloth(int rows, int cols, double spacing) {
    if (rows < 2 || cols < 2 || spacing <= 0.0)
        throw std::invalid_argument("build_cloth: need rows, cols >= 2 and spacing > 0");
    ParticleSystem s;
    s.topology = Cloth{rows, cols};
    s.spacing = spacing;
    const int n = rows * cols;
    s.positions.resize(n);
    s.velocities.assign(n, {});
    s.inverse_masses.assign(n, 1.0);
    const double x0 = -0.5 * spacing * (cols - 1);
    const double y0 = -0.5 * spacing * (rows - 1);
    auto idx = [cols](int r, int c) { return r * cols + c; };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            s.positions[idx(r, c)] = {x0 + c * spacing, y0 + r * spacing, 0.0};
    // Structural: r*(c-1) horizontal + c*(r-1) vertical.
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c)
            s.constraints.push_back({idx(r, c), idx(r, c + 1), spacing, 0.0});
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c < cols; ++c)
            s.constraints.push_back({idx(r, c), idx(r + 1, c), spacing, 0.0});
    // Shear: both diagonals, 2*(r-1)*(c-1).
    const double diag = spacing * std::sqrt(2.0);
    for (int r = 0; r + 1 < rows; ++r)
        for (int c = 0; c + 1 < cols; ++c) {
            s.constraints.push_back({idx(r, c), idx(r + 1, c + 1), diag, 0.0});
            s.constraints.push_back({idx(r, c + 1), idx(r + 1, c), diag, 0.0});
        }
    return s;
}

void step(ParticleSystem& s, const SimConfig& cfg) {
    const int n = s.size();
    const double h = cfg.dt / cfg.substeps;
    std::vector<Vec3> prev(n);

    for (int sub = 0; sub < cfg.substeps; ++sub) {
        // Velocity-Verlet prediction, so a free particle falls ballistically.
        for (int i = 0; i < n; ++i) {
            prev[i] = s.positions[i];
            if (s.inverse_masses[i] == 0.0) continue;
            Vec3& p = s.positions[i];
            const Vec3& v = s.velocities[i];
            p.x += v.x * h;
            p.y += v.y * h;
            p.z += v.z * h - 0.5 * cfg.gravity * h * h;
        }

        // Gauss-Seidel projection of distance constraints, then ground clamp.
        for (int it = 0; it < cfg.solver_iterations; ++it) {
            for (const DistanceConstraint& c : s.constraints) {
                const double wi = s.inverse_masses[c.i];
                const double wj = s.inverse_masses[c.j];
                double wsum = wi + wj;
                if (wsum == 0.0) continue;
                Vec3 d = s.positions[c.i] - s.positions[c.j];
                double len = d.norm();
                if (len < 1e-12) continue;
                if (c.compliance > 0.0) wsum += c.compliance / (h * h);
                const double corr = (len - c.rest_length) / (len * wsum);
                s.positions[c.i] -= d * (wi * corr);
                s.positions[c.j] += d * (wj * corr);
            }
            for (int i = 0; i < n; ++i)
                if (s.inverse_masses[i] != 0.0 && s.positions[i].z < 0.0) s.positions[i].z = 0.0;
        }

        for (int i = 0; i < n; ++i) {
            if (s.inverse_masses[i] == 0.0) {
                s.velocities[i] = {};
                continue;
            }
            Vec3 v = (s.positions[i] - prev[i]) * (1.0 / h);
            v.z -= 0.5 * cfg.gravity * h;  // complete the Verlet velocity update
            const bool contact = s.positions[i].z <= kGroundContactEps;
            if (contact) {
                if (v.z < 0.0) v.z = 0.0;
                v.x *= 1.0 - cfg.ground_friction;
                v.y *= 1.0 - cfg.ground_friction;
            }
            s.velocities[i] = v * (1.0 - cfg.damping);
        }
    }
}

SettleResult settle(ParticleSystem& s, const SimConfig& cfg) {
    SettleResult r;
    while (r.steps < cfg.settle_max_steps) {
        step(s, cfg);
        ++r.steps;
        if (max_speed(s) < cfg.settle_velocity_eps) {
            r.converged = true;
            break;
        }
    }
    return r;
}

int nearest_particle(const ParticleSystem& s, const Vec2& point, double radius) {
    int best = -1;
    double best_d = radius;
    for (int i = 0; i < s.size(); ++i) {
        double d = (s.positions[i].xy() - point).norm();
        if (d < best_d || (best == -1 && d <= best_d)) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

namespace {

// Carry the held particle toward `target` in move_speed*dt segments, stepping
// the free particles after each segment.
void carry_held(ParticleSystem& s, int held, const Vec3& target, const SimConfig& cfg) {
    const double seg = cfg.move_speed * cfg.dt;
    for (;;) {
        Vec3 d = target - s.positions[held];
        double dist = d.norm();
        if (dist < 1e-12) break;
        if (dist <= seg) {
            s.positions[held] = target;
        } else {
            s.positions[held] += d * (seg / dist);
        }
        step(s, cfg);
        if (dist <= seg) break;
    }
}

}  // namespace

ActionResult execute_pick_place(ParticleSystem& s, const WorldAction& action,
                                const SimConfig& cfg) {
    if (!cfg.workspace.contains(action.pick_point) || !cfg.workspace.contains(action.place_point))
        throw std::invalid_argument("execute_pick_place: action outside workspace");

    ActionResult res;
    int held = nearest_particle(s, action.pick_point, cfg.grab_radius);
    if (held < 0) {
        res.settled = settle(s, cfg).converged;
        return res;
    }
    res.grasped = true;
    res.grabbed_particle = held;

    const double saved_w = s.inverse_masses[held];
    s.inverse_masses[held] = 0.0;
    s.velocities[held] = {};

    // Lift proportionally to the carry distance (capped at lift_height), so
    // short actions stay gentle and approximately reversible.
    const Vec3 p0 = s.positions[held];
    const double travel = (action.place_point - p0.xy()).norm();
    const double lift =
        std::min(cfg.lift_height, std::max(3.0 * cfg.release_height, 0.6 * travel));
    carry_held(s, held, {p0.x, p0.y, lift}, cfg);
    carry_held(s, held, {action.place_point.x, action.place_point.y, lift}, cfg);
    carry_held(s, held, {action.place_point.x, action.place_point.y, cfg.release_height}, cfg);

    s.inverse_masses[held] = saved_w;
    res.settled = settle(s, cfg).converged;
    return res;
}

void perturb_drop(ParticleSystem& s, const SimConfig& cfg, int k, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    settle(s, cfg);
    for (int round = 0; round < k; ++round) {
        const int pick = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(s.size())));
        const double height = cfg.lift_height * rng.uniform(0.75, 1.5);
        const Rect& w = cfg.workspace;
        Vec2 target{rng.uniform(w.xmin + 0.15 * w.width(), w.xmax - 0.15 * w.width()),
                    rng.uniform(w.ymin + 0.15 * w.height(), w.ymax - 0.15 * w.height())};

        const double saved_w = s.inverse_masses[pick];
        s.inverse_masses[pick] = 0.0;
        s.velocities[pick] = {};
        const Vec3 p0 = s.positions[pick];
        carry_held(s, pick, {p0.x, p0.y, height}, cfg);
        carry_held(s, pick, {target.x, target.y, height}, cfg);
        s.inverse_masses[pick] = saved_w;  // release at height: drop
        settle(s, cfg);
    }
}

double max_speed(const ParticleSystem& s) {
    double m = 0.0;
    for (const Vec3& v : s.velocities) m = std::max(m, v.norm());
    return m;
}

double max_constraint_violation(const ParticleSystem& s) {
    double m = 0.0;
    for (const DistanceConstraint& c : s.constraints) {
        double len = (s.positions[c.i] - s.positions[c.j]).norm();
        m = std::max(m, std::fabs(len - c.rest_length) / c.rest_length);
    }
    return m;
}

std::vector<std::uint8_t> serialize_system(const ParticleSystem& s) {
    ByteWriter w;
    w.str(kStateMagic);
    if (std::holds_alternative<Rope>(s.topology)) {
        w.u8(0);
        w.i32(std::get<Rope>(s.topology).n_particles);
        w.i32(0);
    } else if (std::holds_alternative<Ring>(s.topology)) {
        w.u8(1);
        w.i32(std::get<Ring>(s.topology).n_particles);
        w.i32(0);
    } else {
        w.u8(2);
        w.i32(std::get<Cloth>(s.topology).rows);
        w.i32(std::get<Cloth>(s.topology).cols);
    }
    w.f64(s.spacing);
    w.i32(s.size());
    for (int i = 0; i < s.size(); ++i) {
        w.f64(s.positions[i].x);
        w.f64(s.positions[i].y);
        w.f64(s.positions[i].z);
        w.f64(s.velocities[i].x);
        w.f64(s.velocities[i].y);
        w.f64(s.velocities[i].z);
        w.f64(s.inverse_masses[i]);
    }
    w.i32(static_cast<std::int32_t>(s.constraints.size()));
    for (const DistanceConstraint& c : s.constraints) {
        w.i32(c.i);
        w.i32(c.j);
        w.f64(c.rest_length);
        w.f64(c.compliance);
    }
    return w.take();
}

ParticleSystem deserialize_system(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    if (r.str() != kStateMagic) throw std::runtime_error("bad particle state magic");
    ParticleSystem s;
    const std::uint8_t kind = r.u8();
    const int a = r.i32();
    const int b = r.i32();
    if (kind == 0)
        s.topology = Rope{a};
    else if (kind == 1)
        s.topology = Ring{a};
    else if (kind == 2)
        s.topology = Cloth{a, b};
    else
        throw std::runtime_error("bad topology tag");
    s.spacing = r.f64();
    const int n = r.i32();
    s.positions.resize(n);
    s.velocities.resize(n);
    s.inverse_masses.resize(n);
    for (int i = 0; i < n; ++i) {
        s.positions[i] = {r.f64(), r.f64(), r.f64()};
        s.velocities[i] = {r.f64(), r.f64(), r.f64()};
        s.inverse_masses[i] = r.f64();
    }
    const int nc = r.i32();
    s.constraints.resize(nc);
    for (int i = 0; i < nc; ++i) {
        s.constraints[i].i = r.i32();
        s.constraints[i].j = r.i32();
        s.constraints[i].rest_length = r.f64();
        s.constraints[i].compliance = r.f64();
    }
    return s;
}

void save_system(const std::string& path, const ParticleSystem& s) {
    write_file_bytes(path, serialize_system(s));
}

ParticleSystem load_system(const std::string& path) {
    return deserialize_system(read_file_bytes(path));
}

}  // namespace defaff::sim
