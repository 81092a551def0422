#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tofmap/polygon.hpp"
#include "tofmap/raster.hpp"

namespace tofmap {

struct PixelIndex {
    int row = 0;
    int col = 0;
    bool operator==(const PixelIndex&) const = default;
    auto operator<=>(const PixelIndex&) const = default;  // row-major
};

/// One 8-connected set of foreground pixels, sorted row-major.
struct PixelComponent {
    std::vector<PixelIndex> pixels;
};

/// 8-connected components ordered by their first pixel in row-major order.
std::vector<PixelComponent> extract_components(const BinaryMask& mask);

/// Traces the pixel-exact outline of an 8-connected pixel set: one
/// counterclockwise exterior ring and one clockwise ring per enclosed
/// background region, every unit pixel edge contributing one vertex. Where two
/// pixels of the set touch only at a corner the outline passes through that
/// corner, so the exterior stays a single ring. Throws ParameterError for an
/// empty or disconnected set.
PolygonGeom polygonize(const PixelComponent& component, const GeoTransform& transform);

/// Removes holes whose area is below `min_area` (m²).
PolygonGeom drop_small_holes(const PolygonGeom& poly, double min_area);

/// Douglas-Peucker on an open polyline; endpoints are always kept.
std::vector<Point> simplify_polyline(std::span<const Point> line, double tolerance);

/// Douglas-Peucker applied to every ring independently. A ring that would
/// drop below three distinct vertices (or flip orientation) is kept as is.
/// Tolerance 0 returns the input unchanged.
PolygonGeom simplify_dp(const PolygonGeom& poly, double tolerance);

struct VectorizeOptions {
    double dp_tolerance = 0.4;   // metres
    double min_hole_area = 1.0;  // m²
    unsigned workers = 0;        // 0: worker_count()
};

/// extract_components -> polygonize -> drop_small_holes -> simplify_dp, in
/// component order.
std::vector<PolygonGeom> vectorize_mask(const BinaryMask& mask, const VectorizeOptions& options);

}  // namespace tofmap
