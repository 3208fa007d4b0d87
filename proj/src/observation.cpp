#include "defaff/observation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace defaff::percept {

GridCoord Observation::world_to_cell(const Vec2& p) const {
    int col = static_cast<int>(std::floor((p.x - world_bounds.xmin) / cell_width()));
    int row = static_cast<int>(std::floor((p.y - world_bounds.ymin) / cell_height()));
    col = std::clamp(col, 0, cols - 1);
    row = std::clamp(row, 0, rows - 1);
    return {row, col};
}

std::vector<int> Observation::occupied_indices() const {
    std::vector<int> out;
    for (int i = 0; i < cells(); ++i)
        if (occupancy[i]) out.push_back(i);
    return out;
}

Observation rasterize(const sim::ParticleSystem& system, const Rect& bounds, int rows, int cols,
                      double splat_radius) {
    if (bounds.width() <= 0.0 || bounds.height() <= 0.0)
        throw std::invalid_argument("rasterize: degenerate bounds");
    if (rows < 8 || cols < 8) throw std::invalid_argument("rasterize: grid must be at least 8x8");

    Observation obs;
    obs.rows = rows;
    obs.cols = cols;
    obs.world_bounds = bounds;
    obs.occupancy.assign(static_cast<std::size_t>(rows) * cols, 0);
    obs.height_map.assign(static_cast<std::size_t>(rows) * cols, 0.0);

    const double cw = obs.cell_width();
    const double ch = obs.cell_height();

    for (int p = 0; p < system.size(); ++p) {
        const Vec2 xy = system.positions[p].xy();
        if (!bounds.contains(xy)) obs.clipped = true;

        const int c_lo = std::max(0, static_cast<int>(std::floor((xy.x - splat_radius - bounds.xmin) / cw)));
        const int c_hi = std::min(cols - 1, static_cast<int>(std::floor((xy.x + splat_radius - bounds.xmin) / cw)));
        const int r_lo = std::max(0, static_cast<int>(std::floor((xy.y - splat_radius - bounds.ymin) / ch)));
        const int r_hi = std::min(rows - 1, static_cast<int>(std::floor((xy.y + splat_radius - bounds.ymin) / ch)));

        for (int r = r_lo; r <= r_hi; ++r) {
            for (int c = c_lo; c <= c_hi; ++c) {
                // Distance from the particle to the cell rectangle.
                const double x0 = bounds.xmin + c * cw, x1 = x0 + cw;
                const double y0 = bounds.ymin + r * ch, y1 = y0 + ch;
                const double dx = std::max({x0 - xy.x, 0.0, xy.x - x1});
                const double dy = std::max({y0 - xy.y, 0.0, xy.y - y1});
                if (dx * dx + dy * dy > splat_radius * splat_radius) continue;
                const int idx = r * cols + c;
                obs.occupancy[idx] = 1;
                obs.height_map[idx] = std::max(obs.height_map[idx], system.positions[p].z);
            }
        }
    }
    return obs;
}

double coverage(const Observation& obs) {
    long occ = std::count_if(obs.occupancy.begin(), obs.occupancy.end(),
                             [](std::uint8_t v) { return v != 0; });
    return static_cast<double>(occ) / obs.cells();
}

double state_similarity(const Observation& a, const Observation& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw std::invalid_argument("state_similarity: dimension mismatch");
    long inter = 0, uni = 0;
    for (int i = 0; i < a.cells(); ++i) {
        const bool oa = a.occupancy[i] != 0;
        const bool ob = b.occupancy[i] != 0;
        inter += oa && ob;
        uni += oa || ob;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::uint8_t> serialize_observation(const Observation& obs) {
    ByteWriter w;
    w.i32(obs.rows);
    w.i32(obs.cols);
    w.f64(obs.world_bounds.xmin);
    w.f64(obs.world_bounds.ymin);
    w.f64(obs.world_bounds.xmax);
    w.f64(obs.world_bounds.ymax);
    w.u8(obs.clipped ? 1 : 0);
    for (std::uint8_t v : obs.occupancy) w.u8(v);
    for (double h : obs.height_map) w.f64(h);
    return w.take();
}

Observation deserialize_observation(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes);
    Observation obs;
    obs.rows = r.i32();
    obs.cols = r.i32();
    obs.world_bounds.xmin = r.f64();
    obs.world_bounds.ymin = r.f64();
    obs.world_bounds.xmax = r.f64();
    obs.world_bounds.ymax = r.f64();
    obs.clipped = r.u8() != 0;
    obs.occupancy.resize(obs.cells());
    for (int i = 0; i < obs.cells(); ++i) obs.occupancy[i] = r.u8();
    obs.height_map.resize(obs.cells());
    for (int i = 0; i < obs.cells(); ++i) obs.height_map[i] = r.f64();
    return obs;
}

}  // namespace defaff::percept
