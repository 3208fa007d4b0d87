#pragma once

#include <variant>
#include <vector>

#include "defaff/observation.hpp"

namespace defaff::percept {

struct ClothFlat {
    double flat_coverage = 0.0;  // grid coverage of the fully flattened cloth, in (0,1]
};

struct RopeShape {
    std::vector<Vec2> keypoints;  // K >= 2 distinct points, world coordinates
};

struct RingHull {
    double ideal_area = 0.0;  // area of the fully opened ring polygon
};

using TargetSpec = std::variant<ClothFlat, RopeShape, RingHull>;

// Task distance in [0, 1]; 0 at the target state.
//  - ClothFlat: 1 - coverage/flat_coverage.
//  - RopeShape: Hungarian matching cost between K arc-length rope keypoints
//    and the target keypoints, minimized over the target's 4 axis-aligned
//    rotations and their mirror images, normalized by workspace diagonal * K.
//  - RingHull: 1 - hull area ratio.
double dist_to_target(const sim::ParticleSystem& system, const Observation& obs,
                      const TargetSpec& target);

// Raw matching cost (meters, summed over K keypoints), minimized over the
// target's symmetry poses. Used both by dist_to_target and as the rope
// episode metric.
double rope_matching_cost(const sim::ParticleSystem& system, const Rect& bounds,
                          const RopeShape& target);

// K points at even arc length along a polyline (endpoints included).
std::vector<Vec2> resample_polyline(const std::vector<Vec2>& points, int k);

// (metric_final - metric_initial) / (metric_goal - metric_initial).
double normalized_score(double metric_initial, double metric_final, double metric_goal);

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Hull area of the particles divided by the ideal (regular polygon) area for
// the rope/ring length.
double hull_area_ratio(const sim::ParticleSystem& system);
bool convex_hull_success(const sim::ParticleSystem& system, double threshold);

}  // namespace defaff::percept
