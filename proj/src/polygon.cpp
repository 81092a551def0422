#include "tofmap/polygon.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tofmap {

double signed_area(std::span<const Point> ring) {
    if (ring.size() < 3) return 0.0;
    // Shifting to the first vertex keeps the cross products small for
    // large map coordinates.
    const Point o = ring[0];
    double twice = 0.0;
    for (std::size_t i = 1; i + 1 < ring.size(); ++i) {
        const double ax = ring[i].x - o.x, ay = ring[i].y - o.y;
        const double bx = ring[i + 1].x - o.x, by = ring[i + 1].y - o.y;
        twice += ax * by - bx * ay;
    }
    return 0.5 * twice;
}

double ring_perimeter(std::span<const Point> ring) {
    double p = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i)
        p += std::hypot(ring[i + 1].x - ring[i].x, ring[i + 1].y - ring[i].y);
    return p;
}

bool is_closed(std::span<const Point> ring) {
    return ring.size() >= 2 && ring.front().x == ring.back().x && ring.front().y == ring.back().y;
}

double polygon_area(const PolygonGeom& poly) {
    double a = std::abs(signed_area(poly.exterior));
    for (const auto& h : poly.holes) a -= std::abs(signed_area(h));
    return a;
}

double polygon_perimeter(const PolygonGeom& poly) {
    double p = ring_perimeter(poly.exterior);
    for (const auto& h : poly.holes) p += ring_perimeter(h);
    return p;
}

bool point_in_ring(const Point& p, std::span<const Point> ring) {
    bool inside = false;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const Point& a = ring[i];
        const Point& b = ring[i + 1];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

bool point_in_polygon(const Point& p, const PolygonGeom& poly) {
    if (!point_in_ring(p, poly.exterior)) return false;
    for (const auto& h : poly.holes)
        if (point_in_ring(p, h)) return false;
    return true;
}

double point_segment_distance(const Point& p, const Point& a, const Point& b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

double point_ring_distance(const Point& p, std::span<const Point> ring) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < ring.size(); ++i)
        best = std::min(best, point_segment_distance(p, ring[i], ring[i + 1]));
    return best;
}

PolygonGeom transformed(const PolygonGeom& poly, double angle_rad, double dx, double dy,
                        double scale) {
    const double c = std::cos(angle_rad), s = std::sin(angle_rad);
    auto map_ring = [&](const Ring& r) {
        Ring out;
        out.reserve(r.size());
        for (const Point& p : r)
            out.push_back({scale * (p.x * c - p.y * s) + dx, scale * (p.x * s + p.y * c) + dy});
        return out;
    };
    PolygonGeom out{map_ring(poly.exterior), {}};
    for (const auto& h : poly.holes) out.holes.push_back(map_ring(h));
    return out;
}

}  // namespace tofmap
