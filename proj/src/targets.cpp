#include "defaff/targets.hpp"

#include <cmath>
#include <stdexcept>

#include "defaff/convex_hull.hpp"
#include "defaff/hungarian.hpp"

namespace defaff::percept {

std::vector<Vec2> resample_polyline(const std::vector<Vec2>& points, int k) {
    if (points.size() < 2 || k < 2)
        throw std::invalid_argument("resample_polyline: need >= 2 points and k >= 2");
    std::vector<double> cum(points.size(), 0.0);
    for (std::size_t i = 1; i < points.size(); ++i)
        cum[i] = cum[i - 1] + (points[i] - points[i - 1]).norm();
    const double total = cum.back();

    std::vector<Vec2> out(k);
    std::size_t seg = 0;
    for (int j = 0; j < k; ++j) {
        const double t = total * j / (k - 1);
        while (seg + 2 < points.size() && cum[seg + 1] < t) ++seg;
        const double span = cum[seg + 1] - cum[seg];
        const double a = span > 1e-12 ? (t - cum[seg]) / span : 0.0;
        out[j] = points[seg] + (points[seg + 1] - points[seg]) * a;
    }
    return out;
}

namespace {

std::vector<Vec2> rope_keypoints(const sim::ParticleSystem& system, int k) {
    std::vector<Vec2> pts(system.size());
    for (int i = 0; i < system.size(); ++i) pts[i] = system.positions[i].xy();
    return resample_polyline(pts, k);
}

// The 8 poses of the dihedral group: 90-degree rotations about the workspace
// center, with and without mirroring.
Vec2 dihedral_pose(const Vec2& p, const Vec2& center, int pose) {
    Vec2 q = p - center;
    if (pose >= 4) q.y = -q.y;
    switch (pose % 4) {
        case 1: q = {-q.y, q.x}; break;
        case 2: q = {-q.x, -q.y}; break;
        case 3: q = {q.y, -q.x}; break;
        default: break;
    }
    return q + center;
}

}  // namespace

double rope_matching_cost(const sim::ParticleSystem& system, const Rect& bounds,
                          const RopeShape& target) {
    const int k = static_cast<int>(target.keypoints.size());
    if (k < 2) throw std::invalid_argument("rope target needs >= 2 keypoints");
    const std::vector<Vec2> rope = rope_keypoints(system, k);
    const Vec2 center = bounds.center();

    double best = std::numeric_limits<double>::infinity();
    for (int pose = 0; pose < 8; ++pose) {
        std::vector<std::vector<double>> cost(k, std::vector<double>(k));
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j)
                cost[i][j] = (rope[i] - dihedral_pose(target.keypoints[j], center, pose)).norm();
        best = std::min(best, hungarian(cost).total_cost);
    }
    return best;
}

double dist_to_target(const sim::ParticleSystem& system, const Observation& obs,
                      const TargetSpec& target) {
    if (std::holds_alternative<ClothFlat>(target)) {
        if (!std::holds_alternative<sim::Cloth>(system.topology))
            throw std::invalid_argument("dist_to_target: cloth target on non-cloth object");
        const double flat = std::get<ClothFlat>(target).flat_coverage;
        if (flat <= 0.0 || flat > 1.0)
            throw std::invalid_argument("dist_to_target: flat_coverage must be in (0,1]");
        return clamp01(1.0 - coverage(obs) / flat);
    }
    if (std::holds_alternative<RopeShape>(target)) {
        if (!std::holds_alternative<sim::Rope>(system.topology))
            throw std::invalid_argument("dist_to_target: rope target on non-rope object");
        const RopeShape& shape = std::get<RopeShape>(target);
        const double d_max = obs.world_bounds.diagonal() * shape.keypoints.size();
        return clamp01(rope_matching_cost(system, obs.world_bounds, shape) / d_max);
    }
    if (!std::holds_alternative<sim::Ring>(system.topology))
        throw std::invalid_argument("dist_to_target: ring target on non-ring object");
    return clamp01(1.0 - hull_area_ratio(system));
}

double normalized_score(double metric_initial, double metric_final, double metric_goal) {
    const double denom = metric_goal - metric_initial;
    if (std::fabs(denom) < 1e-12)
        throw std::invalid_argument("normalized_score: goal equals initial metric");
    return (metric_final - metric_initial) / denom;
}

namespace {

double ideal_loop_area(const sim::ParticleSystem& system) {
    int n = 0;
    if (std::holds_alternative<sim::Ring>(system.topology))
        n = std::get<sim::Ring>(system.topology).n_particles;
    else if (std::holds_alternative<sim::Rope>(system.topology))
        n = std::get<sim::Rope>(system.topology).n_particles;
    else
        throw std::invalid_argument("hull ratio undefined for cloth");
    // Regular n-gon with edge length = spacing.
    return n * system.spacing * system.spacing / (4.0 * std::tan(M_PI / n));
}

}  // namespace

double hull_area_ratio(const sim::ParticleSystem& system) {
    if (system.size() < 3) throw std::invalid_argument("hull ratio needs >= 3 particles");
    std::vector<Vec2> pts(system.size());
    for (int i = 0; i < system.size(); ++i) pts[i] = system.positions[i].xy();
    return polygon_area(convex_hull(pts)) / ideal_loop_area(system);
}

bool convex_hull_success(const sim::ParticleSystem& system, double threshold) {
    return hull_area_ratio(system) >= threshold;
}

}  // namespace defaff::percept
