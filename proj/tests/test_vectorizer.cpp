#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "test_util.hpp"
#include "tofmap/errors.hpp"
#include "tofmap/vectorizer.hpp"

using namespace tofmap;

namespace {

// Union-find labelling over 8-neighbours, independent of the flood fill.
std::vector<std::vector<PixelIndex>> union_find_components(const BinaryMask& m) {
    const std::size_t n = m.pixel_count();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) {
            if (!m.at(r, c)) continue;
            for (auto [dr, dc] : {std::pair{0, 1}, {1, -1}, {1, 0}, {1, 1}}) {
                const int rr = r + dr, cc = c + dc;
                if (rr < m.height && cc >= 0 && cc < m.width && m.at(rr, cc))
                    parent[find(m.index(r, c))] = find(m.index(rr, cc));
            }
        }
    std::map<std::size_t, std::vector<PixelIndex>> groups;
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c)
            if (m.at(r, c)) groups[find(m.index(r, c))].push_back({r, c});
    std::vector<std::vector<PixelIndex>> out;
    for (auto& [root, px] : groups) out.push_back(px);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

BinaryMask mask_from(const std::vector<std::string>& rows) {
    auto m = BinaryMask::create(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()),
                                testutil::utm_grid());
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) m.set(r, c, rows[r][c] == '#');
    return m;
}

double ring_to_ring_max_distance(const Ring& from, const Ring& to, int samples_per_edge) {
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < from.size(); ++i)
        for (int s = 0; s <= samples_per_edge; ++s) {
            const double t = static_cast<double>(s) / samples_per_edge;
            const Point p{from[i].x + t * (from[i + 1].x - from[i].x), from[i].y + t * (from[i + 1].y - from[i].y)};
            worst = std::max(worst, point_ring_distance(p, to));
        }
    return worst;
}

}  // namespace

TEST(Components, DiagonalTouchIsOneComponent) {
    EXPECT_EQ(extract_components(mask_from({"#.", ".#"})).size(), 1u);
}

TEST(Components, EmptyMask) {
    EXPECT_TRUE(extract_components(BinaryMask::create(8, 8, testutil::utm_grid())).empty());
}

TEST(Components, ThreeDisjointSquares) {
    const auto m = mask_from({"##..##", "##..##", "......", "..##..", "..##.."});
    const auto comps = extract_components(m);
    ASSERT_EQ(comps.size(), 3u);
    EXPECT_EQ(comps[0].pixels.front(), (PixelIndex{0, 0}));
    EXPECT_EQ(comps[1].pixels.front(), (PixelIndex{0, 4}));
    EXPECT_EQ(comps[2].pixels.front(), (PixelIndex{3, 2}));
}

TEST(Components, MatchUnionFindOracle) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = testutil::random_mask(50, 40, 0.1 + 0.02 * trial, rng);
        const auto got = extract_components(m);
        const auto want = union_find_components(m);
        ASSERT_EQ(got.size(), want.size());
        for (std::size_t i = 0; i < got.size(); ++i) ASSERT_EQ(got[i].pixels, want[i]);
    }
}

TEST(Polygonize, SinglePixel) {
    const auto t = testutil::utm_grid();
    const auto p = polygonize({{{0, 0}}}, t);
    EXPECT_EQ(p.exterior.size(), 5u);
    EXPECT_TRUE(p.holes.empty());
    EXPECT_NEAR(polygon_area(p), 0.04, 1e-9);
    EXPECT_GT(signed_area(p.exterior), 0.0);
    double minx = 1e18, maxy = -1e18;
    for (const auto& q : p.exterior) {
        minx = std::min(minx, q.x);
        maxy = std::max(maxy, q.y);
    }
    EXPECT_NEAR(minx, t.origin_x, 1e-9);
    EXPECT_NEAR(maxy, t.origin_y, 1e-9);
}

TEST(Polygonize, DonutHasOneHole) {
    const auto comps = extract_components(mask_from({"###", "#.#", "###"}));
    ASSERT_EQ(comps.size(), 1u);
    const auto p = polygonize(comps[0], testutil::utm_grid());
    ASSERT_EQ(p.holes.size(), 1u);
    EXPECT_EQ(p.exterior.size(), 13u);
    EXPECT_EQ(p.holes[0].size(), 5u);
    EXPECT_LT(signed_area(p.holes[0]), 0.0);
    EXPECT_NEAR(polygon_area(p), 0.32, 1e-9);
}

TEST(Polygonize, LTrominoHasEightVertices) {
    const auto comps = extract_components(mask_from({"#.", "##"}));
    const auto p = polygonize(comps[0], testutil::utm_grid());
    EXPECT_EQ(p.exterior.size(), 9u);
    EXPECT_TRUE(is_closed(p.exterior));
    EXPECT_NEAR(polygon_area(p), 0.12, 1e-9);
}

TEST(Polygonize, DiagonalPairStaysOneRing) {
    const auto comps = extract_components(mask_from({"#.", ".#"}));
    const auto p = polygonize(comps[0], testutil::utm_grid());
    EXPECT_TRUE(p.holes.empty());
    EXPECT_NEAR(polygon_area(p), 0.08, 1e-9);
}

TEST(Polygonize, RandomComponentsAreExact) {
    std::mt19937_64 rng(33);
    const auto t = testutil::utm_grid();
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = testutil::random_mask(40, 40, 0.45 + 0.02 * trial, rng);
        for (const auto& comp : extract_components(m)) {
            const auto p = polygonize(comp, t);
            ASSERT_NEAR(polygon_area(p), comp.pixels.size() * 0.04, 1e-6);
            ASSERT_GT(signed_area(p.exterior), 0.0);
            for (const auto& h : p.holes) ASSERT_LT(signed_area(h), 0.0);
            for (const auto& px : comp.pixels) {
                const MapPoint c = t.pixel_to_map(px.col + 0.5, px.row + 0.5);
                ASSERT_TRUE(point_in_polygon(c, p));
            }
        }
    }
}

TEST(Polygonize, RejectsEmptyAndDisconnected) {
    EXPECT_THROW(polygonize({}, testutil::utm_grid()), ParameterError);
    EXPECT_THROW(polygonize({{{0, 0}, {0, 5}}}, testutil::utm_grid()), ParameterError);
}

TEST(Holes, SmallHolesDropped) {
    const auto comps = extract_components(mask_from({"###", "#.#", "###"}));
    const auto p = polygonize(comps[0], testutil::utm_grid());
    EXPECT_TRUE(drop_small_holes(p, 1.0).holes.empty());
    EXPECT_EQ(drop_small_holes(p, 0.01).holes.size(), 1u);
}

TEST(DouglasPeucker, CollinearKeepsEndpoints) {
    std::vector<Point> line;
    for (int i = 0; i <= 10; ++i) line.push_back({i * 0.5, i * 0.25});
    const auto out = simplify_polyline(line, 0.01);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_DOUBLE_EQ(out.front().x, 0.0);
    EXPECT_DOUBLE_EQ(out.back().x, 5.0);
}

TEST(DouglasPeucker, ZeroToleranceIsIdentity) {
    const auto comps = extract_components(mask_from({"##.", "###", ".##"}));
    const auto p = polygonize(comps[0], testutil::utm_grid());
    const auto s = simplify_dp(p, 0.0);
    ASSERT_EQ(s.exterior.size(), p.exterior.size());
    for (std::size_t i = 0; i < p.exterior.size(); ++i) {
        EXPECT_EQ(s.exterior[i].x, p.exterior[i].x);
        EXPECT_EQ(s.exterior[i].y, p.exterior[i].y);
    }
}

TEST(DouglasPeucker, StaircaseCollapsesToOneSegment) {
    std::vector<Point> stair{{0, 0}};
    for (int i = 0; i < 10; ++i) {
        stair.push_back({stair.back().x + 0.2, stair.back().y});
        stair.push_back({stair.back().x, stair.back().y + 0.2});
    }
    const auto out = simplify_polyline(stair, 0.3);
    ASSERT_EQ(out.size(), 2u);
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < stair.size(); ++i)
        for (int s = 0; s <= 100; ++s) {
            const double t = s / 100.0;
            const Point p{stair[i].x + t * (stair[i + 1].x - stair[i].x), stair[i].y + t * (stair[i + 1].y - stair[i].y)};
            worst = std::max(worst, point_segment_distance(p, out[0], out[1]));
        }
    EXPECT_LE(worst, 0.3);
}

TEST(DouglasPeucker, HausdorffAndAreaBounds) {
    std::mt19937_64 rng(44);
    for (double tol : {0.1, 0.4, 1.0}) {
        const auto m = testutil::random_mask(60, 60, 0.55, rng);
        for (const auto& comp : extract_components(m)) {
            const auto p = polygonize(comp, testutil::utm_grid());
            const auto s = simplify_dp(p, tol);
            ASSERT_TRUE(is_closed(s.exterior));
            ASSERT_GE(s.exterior.size(), 4u);
            ASSERT_GT(signed_area(s.exterior), 0.0);
            ASSERT_EQ(s.holes.size(), p.holes.size());
            ASSERT_LE(ring_to_ring_max_distance(p.exterior, s.exterior, 20), tol + 1e-9);
            ASSERT_LE(ring_to_ring_max_distance(s.exterior, p.exterior, 20), tol + 1e-9);
            for (std::size_t h = 0; h < p.holes.size(); ++h)
                ASSERT_LE(ring_to_ring_max_distance(p.holes[h], s.holes[h], 20), tol + 1e-9);
            ASSERT_LE(std::abs(polygon_area(s) - polygon_area(p)), polygon_perimeter(p) * tol);
        }
    }
}

TEST(DouglasPeucker, AxisAlignedRectangleKeepsCorners) {
    auto m = BinaryMask::create(30, 20, testutil::utm_grid());
    for (int r = 3; r < 15; ++r)
        for (int c = 4; c < 26; ++c) m.set(r, c, true);
    const auto polys = vectorize_mask(m, {});
    ASSERT_EQ(polys.size(), 1u);
    EXPECT_EQ(polys[0].exterior.size(), 5u);
    EXPECT_NEAR(polygon_area(polys[0]), 12 * 22 * 0.04, 1e-6);
}

TEST(DouglasPeucker, NegativeToleranceRejected) {
    EXPECT_THROW(simplify_dp(PolygonGeom{}, -0.1), ParameterError);
}

TEST(Vectorize, IndependentOfWorkerCount) {
    std::mt19937_64 rng(55);
    const auto m = testutil::random_mask(120, 90, 0.4, rng);
    const auto a = vectorize_mask(m, {0.4, 1.0, 1});
    const auto b = vectorize_mask(m, {0.4, 1.0, 4});
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        ASSERT_EQ(a[i].exterior.size(), b[i].exterior.size());
        for (std::size_t k = 0; k < a[i].exterior.size(); ++k) {
            ASSERT_EQ(a[i].exterior[k].x, b[i].exterior[k].x);
            ASSERT_EQ(a[i].exterior[k].y, b[i].exterior[k].y);
        }
    }
}
