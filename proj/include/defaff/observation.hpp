#pragma once

#include <cstdint>
#include <vector>

#include "defaff/geometry.hpp"
#include "defaff/sim.hpp"

namespace defaff::percept {

struct GridCoord {
    int row = 0;
    int col = 0;
    bool operator==(const GridCoord&) const = default;
};

// Top-down m x n grid view of a particle system: binary occupancy plus a
// max-height channel. Rows map to y, columns to x.
struct Observation {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> occupancy;  // row-major, 0/1
    std::vector<double> height_map;       // meters; 0 wherever occupancy is 0
    Rect world_bounds;
    bool clipped = false;  // some particle projected outside world_bounds

    int cells() const { return rows * cols; }
    int index(const GridCoord& c) const { return c.row * cols + c.col; }
    GridCoord coord(int idx) const { return {idx / cols, idx % cols}; }
    bool occupied(const GridCoord& c) const { return occupancy[index(c)] != 0; }
    double cell_width() const { return world_bounds.width() / cols; }
    double cell_height() const { return world_bounds.height() / rows; }

    Vec2 cell_center(const GridCoord& c) const {
        return {world_bounds.xmin + (c.col + 0.5) * cell_width(),
                world_bounds.ymin + (c.row + 0.5) * cell_height()};
    }
    // Nearest cell containing the point; points outside bounds are clamped.
    GridCoord world_to_cell(const Vec2& p) const;

    std::vector<int> occupied_indices() const;
};

// A cell is occupied iff some particle's xy projection lies within
// splat_radius of the cell rectangle; its height is the max z among those
// particles.
Observation rasterize(const sim::ParticleSystem& system, const Rect& bounds, int rows, int cols,
                      double splat_radius);

double coverage(const Observation& obs);

// Occupancy IoU; 1 when both grids are empty.
double state_similarity(const Observation& a, const Observation& b);

std::vector<std::uint8_t> serialize_observation(const Observation& obs);
Observation deserialize_observation(const std::vector<std::uint8_t>& bytes);

}  // namespace defaff::percept
