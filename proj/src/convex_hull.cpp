#include "defaff/convex_hull.hpp"

#include <algorithm>

namespace defaff::percept {

static double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
    const std::size_t n = pts.size();
    if (n < 3) return pts;

    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        if (a.x != b.x) return a.x < b.x;
        return a.y < b.y;
    });

    std::vector<Vec2> hull;
    hull.reserve(2 * n);
    // Lower hull.
    for (const Vec2& p : pts) {
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) <= 0.0)
            hull.pop_back();
        hull.push_back(p);
    }
    // Upper hull.
    const std::size_t lower = hull.size() + 1;
    for (std::size_t i = n - 1; i-- > 0;) {
        const Vec2& p = pts[i];
        while (hull.size() >= lower && cross(hull[hull.size() - 2], hull.back(), p) <= 0.0)
            hull.pop_back();
        hull.push_back(p);
    }
    hull.pop_back();
    return hull;
}

double polygon_area(const std::vector<Vec2>& poly) {
    if (poly.size() < 3) return 0.0;
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::fabs(a);
}

}  // namespace defaff::percept
