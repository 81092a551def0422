#include "tofmap/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tofmap/errors.hpp"

namespace tofmap {
namespace {

double cross(const Point& o, const Point& a, const Point& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

std::vector<Point> convex_hull(std::span<const Point> points) {
    std::vector<Point> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(),
              [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const Point& a, const Point& b) { return a.x == b.x && a.y == b.y; }),
              pts.end());
    if (pts.size() < 3) return pts;

    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

RotatedRect min_rotated_rect(std::span<const Point> points) {
    const std::vector<Point> raw_hull = convex_hull(points);
    if (raw_hull.size() < 3) {
        throw DegenerateGeometryError("enclosing rectangle needs three non-collinear vertices");
    }
    // Work relative to the first hull vertex to keep projections well scaled.
    const Point o = raw_hull[0];
    std::vector<Point> p(raw_hull.size());
    std::transform(raw_hull.begin(), raw_hull.end(), p.begin(),
                   [&](const Point& q) { return Point{q.x - o.x, q.y - o.y}; });
    const std::size_t n = p.size();
    auto at = [&](std::size_t i) -> const Point& { return p[i % n]; };
    auto dot_from = [&](const Point& base, double ux, double uy, const Point& q) {
        return (q.x - base.x) * ux + (q.y - base.y) * uy;
    };

    double best_area = std::numeric_limits<double>::infinity();
    RotatedRect best;
    std::size_t j = 1, k = 1, m = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = at(i);
        const Point& b = at(i + 1);
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        const double ux = (b.x - a.x) / len, uy = (b.y - a.y) / len;
        const double nx = -uy, ny = ux;  // inward normal of a CCW hull

        if (j < i + 1) j = i + 1;
        while (dot_from(a, ux, uy, at(j + 1)) > dot_from(a, ux, uy, at(j))) ++j;
        if (k < i + 1) k = i + 1;
        while (dot_from(a, nx, ny, at(k + 1)) > dot_from(a, nx, ny, at(k))) ++k;
        if (i == 0) m = k;
        if (m < k) m = k;
        while (dot_from(a, ux, uy, at(m + 1)) < dot_from(a, ux, uy, at(m))) ++m;

        const double max_u = dot_from(a, ux, uy, at(j));
        const double min_u = dot_from(a, ux, uy, at(m));
        const double height = dot_from(a, nx, ny, at(k));
        const double along = max_u - min_u;
        const double area = along * height;
        if (area < best_area) {
            best_area = area;
            auto corner = [&](double s, double t) {
                return Point{o.x + a.x + s * ux + t * nx, o.y + a.y + s * uy + t * ny};
            };
            best.corners = {corner(min_u, 0.0), corner(max_u, 0.0), corner(max_u, height),
                            corner(min_u, height)};
            double angle;
            if (along >= height) {
                best.length = along;
                best.width = height;
                angle = std::atan2(uy, ux);
            } else {
                best.length = height;
                best.width = along;
                angle = std::atan2(ny, nx);
            }
            double deg = angle * 180.0 / std::numbers::pi;
            deg = std::fmod(deg, 180.0);
            if (deg < 0.0) deg += 180.0;
            if (deg >= 180.0 - 1e-9) deg = 0.0;
            best.angle_deg = deg;
        }
    }
    if (!(best.width > 0.0)) throw DegenerateGeometryError("enclosing rectangle has zero width");
    return best;
}

RotatedRect min_rotated_rect(const PolygonGeom& poly) { return min_rotated_rect(poly.exterior); }

ShapeDescriptors shape_descriptors(const PolygonGeom& poly) {
    const RotatedRect rect = min_rotated_rect(poly);
    ShapeDescriptors d;
    d.area = polygon_area(poly);
    d.rect_length = rect.length;
    d.rect_width = rect.width;
    d.elongation = rect.length / rect.width;
    d.rect_angle = rect.angle_deg;
    if (!(d.area > 0.0)) throw DegenerateGeometryError("polygon has non-positive area");
    return d;
}

}  // namespace tofmap
