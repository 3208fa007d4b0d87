#pragma once

#include <vector>

#include "defaff/geometry.hpp"

namespace defaff::percept {

// Monotone-chain convex hull, counter-clockwise without the closing point.
// Collinear input collapses to a degenerate (zero-area) hull.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

// Shoelace area of a simple polygon.
double polygon_area(const std::vector<Vec2>& polygon);

}  // namespace defaff::percept
