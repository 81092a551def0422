#include "tofmap/vectorizer.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include "tofmap/errors.hpp"
#include "tofmap/parallel.hpp"

namespace tofmap {

std::vector<PixelComponent> extract_components(const BinaryMask& mask) {
    std::vector<PixelComponent> out;
    std::vector<std::uint8_t> seen(mask.bits.size(), 0);
    std::vector<PixelIndex> stack;
    for (int r = 0; r < mask.height; ++r) {
        for (int c = 0; c < mask.width; ++c) {
            const std::size_t i = mask.index(r, c);
            if (!mask.bits[i] || seen[i]) continue;
            PixelComponent comp;
            seen[i] = 1;
            stack.push_back({r, c});
            while (!stack.empty()) {
                const PixelIndex p = stack.back();
                stack.pop_back();
                comp.pixels.push_back(p);
                for (int dr = -1; dr <= 1; ++dr) {
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int nr = p.row + dr, nc = p.col + dc;
                        if ((dr == 0 && dc == 0) || nr < 0 || nc < 0 || nr >= mask.height ||
                            nc >= mask.width)
                            continue;
                        const std::size_t j = mask.index(nr, nc);
                        if (mask.bits[j] && !seen[j]) {
                            seen[j] = 1;
                            stack.push_back({nr, nc});
                        }
                    }
                }
            }
            std::sort(comp.pixels.begin(), comp.pixels.end());
            out.push_back(std::move(comp));
        }
    }
    return out;
}

namespace {

// Edge directions on the vertex lattice, y pointing up (north = row - 1).
enum Dir : std::uint8_t { kEast = 0, kNorth = 1, kWest = 2, kSouth = 3 };
constexpr std::array<int, 4> kDRow = {0, -1, 0, 1};
constexpr std::array<int, 4> kDCol = {1, 0, -1, 0};
constexpr Dir right_of(Dir d) { return static_cast<Dir>((d + 3) % 4); }

}  // namespace

PolygonGeom polygonize(const PixelComponent& component, const GeoTransform& transform) {
    if (component.pixels.empty()) throw ParameterError("cannot polygonize an empty component");
    transform.validate();

    int r0 = component.pixels.front().row, r1 = r0;
    int c0 = component.pixels.front().col, c1 = c0;
    for (const auto& p : component.pixels) {
        r0 = std::min(r0, p.row);
        r1 = std::max(r1, p.row);
        c0 = std::min(c0, p.col);
        c1 = std::max(c1, p.col);
    }
    // Local grid with a one-pixel false border.
    const int h = r1 - r0 + 3, w = c1 - c0 + 3;
    std::vector<std::uint8_t> in(static_cast<std::size_t>(h) * w, 0);
    auto cell = [&](int r, int c) -> std::uint8_t& {
        return in[static_cast<std::size_t>(r) * w + c];
    };
    for (const auto& p : component.pixels) cell(p.row - r0 + 1, p.col - c0 + 1) = 1;

    // Vertex (vr, vc) is the top-left corner of local pixel (vr, vc).
    const int vw = w + 1;
    auto vid = [vw](int vr, int vc) { return static_cast<std::size_t>(vr) * vw + vc; };
    const std::size_t nv = static_cast<std::size_t>(h + 1) * vw;
    std::vector<std::uint8_t> out_mask(nv, 0);  // bit d set: outgoing edge in direction d
    std::vector<std::size_t> starts;

    // Foreground on the left of each directed edge.
    for (int r = 1; r < h - 1; ++r) {
        for (int c = 1; c < w - 1; ++c) {
            if (!cell(r, c)) continue;
            if (!cell(r + 1, c)) {
                out_mask[vid(r + 1, c)] |= 1u << kEast;
                starts.push_back(vid(r + 1, c) * 4 + kEast);
            }
            if (!cell(r, c + 1)) {
                out_mask[vid(r + 1, c + 1)] |= 1u << kNorth;
                starts.push_back(vid(r + 1, c + 1) * 4 + kNorth);
            }
            if (!cell(r - 1, c)) {
                out_mask[vid(r, c + 1)] |= 1u << kWest;
                starts.push_back(vid(r, c + 1) * 4 + kWest);
            }
            if (!cell(r, c - 1)) {
                out_mask[vid(r, c)] |= 1u << kSouth;
                starts.push_back(vid(r, c) * 4 + kSouth);
            }
        }
    }

    auto to_map = [&](std::size_t v) {
        const int vr = static_cast<int>(v / vw), vc = static_cast<int>(v % vw);
        return transform.pixel_to_map(static_cast<double>(c0 + vc - 1),
                                      static_cast<double>(r0 + vr - 1));
    };

    std::vector<std::uint8_t> used(nv, 0);
    std::vector<Ring> exteriors;
    std::vector<Ring> holes;
    for (std::size_t key : starts) {
        const std::size_t start_v = key / 4;
        const auto start_d = static_cast<Dir>(key % 4);
        if (used[start_v] & (1u << start_d)) continue;
        Ring ring;
        std::size_t v = start_v;
        Dir d = start_d;
        do {
            used[v] |= static_cast<std::uint8_t>(1u << d);
            ring.push_back(to_map(v));
            v = vid(static_cast<int>(v / vw) + kDRow[d], static_cast<int>(v % vw) + kDCol[d]);
            if (std::popcount(static_cast<unsigned>(out_mask[v])) == 2) {
                d = right_of(d);  // corner-touching pixels stay on one outline
            } else {
                d = static_cast<Dir>(std::countr_zero(static_cast<unsigned>(out_mask[v])));
            }
            if (!(out_mask[v] & (1u << d)) ||
                ((used[v] & (1u << d)) && !(v == start_v && d == start_d))) {
                throw std::logic_error("boundary tracing lost the outline");
            }
        } while (!(v == start_v && d == start_d));
        ring.push_back(ring.front());
        if (signed_area(ring) > 0.0)
            exteriors.push_back(std::move(ring));
        else
            holes.push_back(std::move(ring));
    }

    if (exteriors.size() != 1) {
        throw ParameterError("pixel set is not 8-connected (" + std::to_string(exteriors.size()) +
                             " outer boundaries)");
    }
    return PolygonGeom{std::move(exteriors.front()), std::move(holes)};
}

PolygonGeom drop_small_holes(const PolygonGeom& poly, double min_area) {
    PolygonGeom out{poly.exterior, {}};
    for (const auto& h : poly.holes)
        if (std::abs(signed_area(h)) >= min_area) out.holes.push_back(h);
    return out;
}

std::vector<Point> simplify_polyline(std::span<const Point> line, double tolerance) {
    if (line.size() <= 2 || tolerance <= 0.0) return {line.begin(), line.end()};
    std::vector<std::uint8_t> keep(line.size(), 0);
    keep.front() = keep.back() = 1;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, line.size() - 1}};
    while (!stack.empty()) {
        const auto [a, b] = stack.back();
        stack.pop_back();
        double worst = -1.0;
        std::size_t worst_i = a;
        for (std::size_t i = a + 1; i < b; ++i) {
            const double d = point_segment_distance(line[i], line[a], line[b]);
            if (d > worst) {
                worst = d;
                worst_i = i;
            }
        }
        if (worst > tolerance) {
            keep[worst_i] = 1;
            stack.emplace_back(a, worst_i);
            stack.emplace_back(worst_i, b);
        }
    }
    std::vector<Point> out;
    for (std::size_t i = 0; i < line.size(); ++i)
        if (keep[i]) out.push_back(line[i]);
    return out;
}

namespace {

Ring simplify_ring(const Ring& ring, double tolerance) {
    if (tolerance <= 0.0 || ring.size() < 5 || !is_closed(ring)) return ring;
    const std::size_t n = ring.size() - 1;  // distinct vertices
    // Anchor at the lowest (x, y) vertex, a hull corner that must survive,
    // and split the ring at the vertex farthest from it.
    std::size_t start = 0;
    for (std::size_t i = 1; i < n; ++i) {
        if (ring[i].x < ring[start].x || (ring[i].x == ring[start].x && ring[i].y < ring[start].y))
            start = i;
    }
    Ring rotated;
    rotated.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) rotated.push_back(ring[(start + i) % n]);
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double d = std::hypot(rotated[i].x - rotated[0].x, rotated[i].y - rotated[0].y);
        if (d > far_d) {
            far_d = d;
            far = i;
        }
    }
    const std::span<const Point> all(rotated);
    auto first = simplify_polyline(all.subspan(0, far + 1), tolerance);
    auto second = simplify_polyline(all.subspan(far, n - far + 1), tolerance);
    Ring out = std::move(first);
    out.insert(out.end(), second.begin() + 1, second.end());
    const double before = signed_area(ring);
    const double after = signed_area(out);
    if (out.size() < 4 || after == 0.0 || (after > 0.0) != (before > 0.0)) return ring;
    return out;
}

}  // namespace

PolygonGeom simplify_dp(const PolygonGeom& poly, double tolerance) {
    if (tolerance < 0.0) throw ParameterError("Douglas-Peucker tolerance must be >= 0");
    if (tolerance == 0.0) return poly;
    PolygonGeom out{simplify_ring(poly.exterior, tolerance), {}};
    out.holes.reserve(poly.holes.size());
    for (const auto& h : poly.holes) out.holes.push_back(simplify_ring(h, tolerance));
    return out;
}

std::vector<PolygonGeom> vectorize_mask(const BinaryMask& mask, const VectorizeOptions& options) {
    if (options.dp_tolerance < 0.0) throw ParameterError("Douglas-Peucker tolerance must be >= 0");
    const auto components = extract_components(mask);
    std::vector<PolygonGeom> polys(components.size());
    parallel_for(
        components.size(),
        [&](std::size_t i) {
            PolygonGeom p = polygonize(components[i], mask.transform);
            p = drop_small_holes(p, options.min_hole_area);
            polys[i] = simplify_dp(p, options.dp_tolerance);
        },
        options.workers);
    return polys;
}

}  // namespace tofmap
