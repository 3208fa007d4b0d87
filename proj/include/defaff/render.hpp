#pragma once

#include <string>
#include <vector>

#include "defaff/affordance.hpp"

namespace defaff::render {

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

// Low scores map to blue, high to red.
void heat_color(double t, std::uint8_t* rgb);

Image render_observation(const percept::Observation& obs, int scale);

// Scores normalized over valid cells; invalid cells are dark gray. mark_cell
// (if non-null) is outlined in white.
Image render_heatmap(const afford::AffordanceMap& map, int scale,
                     const percept::GridCoord* mark_cell = nullptr);

// Observation frame with the executed action drawn: white pick, black place.
Image render_action_frame(const percept::Observation& obs, const percept::GridCoord& pick,
                          const percept::GridCoord& place, int scale);

void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

}  // namespace defaff::render
