#pragma once

#include <span>
#include <vector>

#include "tofmap/raster.hpp"

namespace tofmap {

using Point = MapPoint;

/// Closed ring: the first vertex is repeated as the last one.
using Ring = std::vector<Point>;

/// Polygon in map coordinates (metres). Exterior counterclockwise, holes
/// clockwise.
struct PolygonGeom {
    Ring exterior;
    std::vector<Ring> holes;
};

/// Shoelace signed area; positive for counterclockwise rings.
double signed_area(std::span<const Point> ring);
double ring_perimeter(std::span<const Point> ring);
bool is_closed(std::span<const Point> ring);

/// |exterior| minus the sum of |holes|.
double polygon_area(const PolygonGeom& poly);
double polygon_perimeter(const PolygonGeom& poly);

/// Even-odd test against one ring (points on the boundary are unspecified).
bool point_in_ring(const Point& p, std::span<const Point> ring);
/// Inside the exterior and outside every hole.
bool point_in_polygon(const Point& p, const PolygonGeom& poly);

double point_segment_distance(const Point& p, const Point& a, const Point& b);
/// Distance from p to the closest edge of a ring.
double point_ring_distance(const Point& p, std::span<const Point> ring);

/// Applies x' = x*cos - y*sin + dx etc. to every vertex.
PolygonGeom transformed(const PolygonGeom& poly, double angle_rad, double dx, double dy,
                        double scale = 1.0);

}  // namespace tofmap
