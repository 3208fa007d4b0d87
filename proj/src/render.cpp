#include "defaff/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace defaff::render {

void Image::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
}

void heat_color(double t, std::uint8_t* rgb) {
    t = std::clamp(t, 0.0, 1.0);
    // blue -> cyan -> yellow -> red
    double r, g, b;
    if (t < 1.0 / 3.0) {
        const double u = 3.0 * t;
        r = 0.0;
        g = u;
        b = 1.0;
    } else if (t < 2.0 / 3.0) {
        const double u = 3.0 * t - 1.0;
        r = u;
        g = 1.0;
        b = 1.0 - u;
    } else {
        const double u = 3.0 * t - 2.0;
        r = 1.0;
        g = 1.0 - u;
        b = 0.0;
    }
    rgb[0] = static_cast<std::uint8_t>(std::lround(255.0 * r));
    rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * g));
    rgb[2] = static_cast<std::uint8_t>(std::lround(255.0 * b));
}

namespace {

Image blank(int rows, int cols, int scale) {
    Image img;
    img.width = cols * scale;
    img.height = rows * scale;
    img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);
    return img;
}

void fill_cell(Image& img, int row, int col, int scale, std::uint8_t r, std::uint8_t g,
               std::uint8_t b) {
    for (int y = row * scale; y < (row + 1) * scale; ++y)
        for (int x = col * scale; x < (col + 1) * scale; ++x) img.set(x, y, r, g, b);
}

void outline_cell(Image& img, int row, int col, int scale, std::uint8_t r, std::uint8_t g,
                  std::uint8_t b) {
    for (int y = row * scale; y < (row + 1) * scale; ++y) {
        for (int x = col * scale; x < (col + 1) * scale; ++x) {
            const bool edge = y == row * scale || y == (row + 1) * scale - 1 ||
                              x == col * scale || x == (col + 1) * scale - 1;
            if (edge) img.set(x, y, r, g, b);
        }
    }
}

}  // namespace

Image render_observation(const percept::Observation& obs, int scale) {
    Image img = blank(obs.rows, obs.cols, scale);
    double hmax = 0.0;
    for (double h : obs.height_map) hmax = std::max(hmax, h);
    for (int r = 0; r < obs.rows; ++r) {
        for (int c = 0; c < obs.cols; ++c) {
            const int idx = r * obs.cols + c;
            if (!obs.occupancy[idx]) {
                fill_cell(img, r, c, scale, 16, 16, 24);
                continue;
            }
            // Brighter with height.
            const double h = hmax > 0.0 ? obs.height_map[idx] / hmax : 0.0;
            const auto v = static_cast<std::uint8_t>(std::lround(150.0 + 105.0 * h));
            fill_cell(img, r, c, scale, v, v, static_cast<std::uint8_t>(v * 0.85));
        }
    }
    return img;
}

Image render_heatmap(const afford::AffordanceMap& map, int scale,
                     const percept::GridCoord* mark_cell) {
    Image img = blank(map.rows, map.cols, scale);
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (int i = 0; i < map.cells(); ++i) {
        if (!map.valid[i]) continue;
        if (first || map.scores[i] < lo) lo = first ? map.scores[i] : std::min(lo, map.scores[i]);
        hi = first ? map.scores[i] : std::max(hi, map.scores[i]);
        first = false;
    }
    const double span = hi - lo;
    for (int r = 0; r < map.rows; ++r) {
        for (int c = 0; c < map.cols; ++c) {
            const int idx = r * map.cols + c;
            if (!map.valid[idx]) {
                fill_cell(img, r, c, scale, 40, 40, 40);
                continue;
            }
            const double t = span > 0.0 ? (map.scores[idx] - lo) / span : 0.5;
            std::uint8_t rgb[3];
            heat_color(t, rgb);
            fill_cell(img, r, c, scale, rgb[0], rgb[1], rgb[2]);
        }
    }
    if (mark_cell) outline_cell(img, mark_cell->row, mark_cell->col, scale, 255, 255, 255);
    return img;
}

Image render_action_frame(const percept::Observation& obs, const percept::GridCoord& pick,
                          const percept::GridCoord& place, int scale) {
    Image img = render_observation(obs, scale);
    fill_cell(img, pick.row, pick.col, scale, 255, 255, 255);
    fill_cell(img, place.row, place.col, scale, 0, 0, 0);
    outline_cell(img, place.row, place.col, scale, 255, 0, 0);
    return img;
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()),
              static_cast<std::streamsize>(img.rgb.size()));
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error("not a P6 ppm: " + path);
    Image img;
    int maxval = 0;
    in >> img.width >> img.height >> maxval;
    in.get();
    img.rgb.resize(static_cast<std::size_t>(img.width) * img.height * 3);
    in.read(reinterpret_cast<char*>(img.rgb.data()),
            static_cast<std::streamsize>(img.rgb.size()));
    if (!in) throw std::runtime_error("truncated ppm: " + path);
    return img;
}

}  // namespace defaff::render
