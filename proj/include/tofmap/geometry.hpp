#pragma once

#include <array>
#include <span>
#include <vector>

#include "tofmap/polygon.hpp"

namespace tofmap {

/// Convex hull (Andrew's monotone chain), counterclockwise, no repeated
/// closing vertex, collinear points dropped.
std::vector<Point> convex_hull(std::span<const Point> points);

struct RotatedRect {
    double length = 0.0;     // longer side
    double width = 0.0;      // shorter side
    double angle_deg = 0.0;  // direction of the longer side, [0, 180)
    std::array<Point, 4> corners{};
    double area() const noexcept { return length * width; }
};

/// Minimum-area enclosing rectangle of a point set via rotating calipers over
/// the convex hull; one side is collinear with a hull edge. Throws
/// DegenerateGeometryError when the points are collinear.
RotatedRect min_rotated_rect(std::span<const Point> points);

/// Uses the exterior ring only; holes do not change the enclosing rectangle.
RotatedRect min_rotated_rect(const PolygonGeom& poly);

struct ShapeDescriptors {
    double area = 0.0;        // m², holes subtracted
    double rect_length = 0.0;  // m
    double rect_width = 0.0;   // m
    double elongation = 1.0;   // rect_length / rect_width
    double rect_angle = 0.0;   // degrees
};

ShapeDescriptors shape_descriptors(const PolygonGeom& poly);

}  // namespace tofmap
