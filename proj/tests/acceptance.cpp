// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include "tofmap/dataset_splitter.hpp"
#include "tofmap/evaluator.hpp"
#include "tofmap/fixture.hpp"
#include "tofmap/geometry.hpp"
#include "tofmap/geotiff.hpp"
#include "tofmap/inference_merger.hpp"
#include "tofmap/mask_builder.hpp"
#include "tofmap/pipeline.hpp"
#include "tofmap/tof_classifier.hpp"

using namespace tofmap;

namespace {

// Tolerances and budgets.
constexpr double kRowSumTol = 0.01;          // criterion 2, percentage points
constexpr double kMergeProbTol = 1e-12;      // criterion 4
constexpr double kSweepAreaTol = 1e-3;       // criterion 6, relative
constexpr double kSweepStepDeg = 0.01;       // criterion 6
constexpr double kRigidElongationTol = 1e-6; // criterion 6, relative
constexpr double kClosureIouClean = 0.99;    // criterion 7
constexpr double kClosureIouNoisy = 0.95;    // criterion 7
constexpr double kClosureNoiseSigma = 0.05;  // criterion 7
constexpr double kKMeansCenterTol = 1e-6;    // criterion 8
constexpr double kSplitMaxDevPp = 1.0;       // criterion 9

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
        o.pass = false;
        o.detail += " [over runtime budget " + std::to_string(budget_s) + " s]";
    }
    if (!o.pass) ++failures;
    std::printf("%s criterion %d: %s (%.2f s) %s\n", o.pass ? "PASS" : "FAIL", id, title, secs, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---- 1 ----
Outcome macro_arithmetic() {
    MetricsReport r;
    const double iou[4] = {0.952, 0.606, 0.774, 0.626};
    const double f1[4] = {0.975, 0.754, 0.872, 0.770};
    for (int i = 0; i < 4; ++i) {
        r.per_class[i + 1].iou = iou[i];
        r.per_class[i + 1].f1 = f1[i];
    }
    const auto m = macro_summary(r);
    const double miou = std::round(m.miou * 1000) / 1000, mf1 = std::round(m.mf1 * 1000) / 1000;
    return {miou == 0.739 && mf1 == 0.843, "mIoU " + fmt("%.3f", miou) + ", mF1 " + fmt("%.3f", mf1)};
}

// ---- 2 ----
Outcome row_normalization() {
    auto worst_row = [](const ConfusionMatrix& cm) {
        const auto r = rounded_percentages(normalized_matrix(cm));
        double worst = 0;
        for (int i = 0; i < kClassCount; ++i) {
            if (cm.row_sum(i) == 0) continue;
            double s = 0;
            for (int j = 0; j < kClassCount; ++j) s += r[i][j];
            worst = std::max(worst, std::abs(s - 100.0));
        }
        return worst;
    };
    ConfusionMatrix table;
    const std::uint64_t patch[5] = {561, 811, 7319, 916, 393};
    for (int j = 0; j < 5; ++j) table.add(2, j, patch[j]);
    const auto rounded = rounded_percentages(normalized_matrix(table));
    const double want[5] = {5.61, 8.11, 73.19, 9.16, 3.93};
    bool row_ok = true;
    for (int j = 0; j < 5; ++j) row_ok = row_ok && std::abs(rounded[2][j] - want[j]) < 1e-9;
    double worst = worst_row(table);

    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 2000; ++trial) {
        ConfusionMatrix cm;
        const std::uint64_t scale = std::uint64_t{1} << (trial % 40);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j) cm.add(i, j, rng() % (scale + 1));
        worst = std::max(worst, worst_row(cm));
    }
    return {row_ok && worst <= kRowSumTol,
            "Patch row reproduced: " + std::string(row_ok ? "yes" : "no") + ", worst |row sum - 100| " +
                fmt("%.3g", worst) + " over 2001 matrices"};
}

// ---- 3 ----
Outcome patch_counts() {
    const auto o = window_origins(5000, 1024, 1024);
    const std::size_t train = 90 * 4 * patch_count(5000, 5000, {1024, 1024, true});
    const std::size_t val = 5 * 4 * patch_count(5000, 5000, {1024, 1024, false});
    const bool ok = o == std::vector<int>{0, 1024, 2048, 3072, 3976} && train == 27000 && val == 500;
    return {ok, std::to_string(o.size()) + " offsets, " + std::to_string(train) + " training / " +
                    std::to_string(val) + " validation patches"};
}

// ---- 4 ----
Outcome merge_oracle() {
    constexpr int kExtent = 64, kWindow = 16, kStride = 4, kPatches = 200;
    std::mt19937_64 rng(4);
    std::gamma_distribution<double> g(0.7, 1.0);
    std::uniform_int_distribution<int> pos(0, kExtent - kWindow);
    std::vector<std::pair<int, int>> origins;
    for (int r : window_origins(kExtent, kWindow, kStride))
        for (int c : window_origins(kExtent, kWindow, kStride)) origins.emplace_back(r, c);
    while (origins.size() < static_cast<std::size_t>(kPatches)) origins.emplace_back(pos(rng), pos(rng));

    std::vector<SoftmaxPatch> patches;
    for (auto [r, c] : origins) {
        SoftmaxPatch p{r, c, kWindow, kWindow, kClassCount, {}};
        for (int i = 0; i < kWindow * kWindow; ++i) {
            double v[kClassCount], s = 0;
            for (double& x : v) s += (x = g(rng));
            for (double x : v) p.probs.push_back(static_cast<float>(x / s));
        }
        patches.push_back(std::move(p));
    }
    std::shuffle(patches.begin(), patches.end(), rng);
    SoftmaxAccumulator acc(kExtent, kExtent);
    for (const auto& p : patches) acc.accumulate(p);
    const auto res = acc.finalize();

    double worst = 0;
    std::size_t label_mismatch = 0;
    for (int y = 0; y < kExtent; ++y)
        for (int x = 0; x < kExtent; ++x) {
            long double sum[kClassCount] = {};
            int n = 0;
            for (const auto& p : patches) {
                if (y < p.row || y >= p.row + kWindow || x < p.col || x >= p.col + kWindow) continue;
                ++n;
                for (int k = 0; k < kClassCount; ++k) sum[k] += p.prob(y - p.row, x - p.col, k);
            }
            int best = 0;
            for (int k = 0; k < kClassCount; ++k) {
                const double mean = static_cast<double>(sum[k] / n);
                worst = std::max(worst, std::abs(res.mean[(y * kExtent + x) * kClassCount + k] - mean));
                if (mean > static_cast<double>(sum[best] / n)) best = k;
            }
            label_mismatch += res.labels[y * kExtent + x] != best;
        }
    return {worst <= kMergeProbTol && label_mismatch == 0,
            std::to_string(patches.size()) + " patches, max |dp| " + fmt("%.3g", worst) + ", label mismatches " +
                std::to_string(label_mismatch)};
}

// ---- 5 ----
Ring random_convex(std::mt19937_64& rng, double max_len, double max_wid, int n) {
    std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi), len(1, max_len), wid(0.5, max_wid),
        off(-1e4, 1e4);
    const double a = len(rng), b = wid(rng), rot = u(rng), cx = off(rng), cy = off(rng);
    std::vector<double> t(static_cast<std::size_t>(n));
    for (auto& x : t) x = u(rng);
    std::sort(t.begin(), t.end());
    Ring r;
    for (double th : t) {
        const double x = a * std::cos(th), y = b * std::sin(th);
        r.push_back({cx + x * std::cos(rot) - y * std::sin(rot), cy + x * std::sin(rot) + y * std::cos(rot)});
    }
    r.push_back(r.front());
    return r;
}

Outcome classifier_boundaries() {
    struct Case {
        double area, width, elongation;
        TofClass want;
    };
    const Case cases[12] = {
        {499, 10, 2.99, TofClass::Tree},      {499, 5, 3.01, TofClass::Tree},
        {500, 10, 2.99, TofClass::Patch},     {500, 5, 3.01, TofClass::Linear},
        {5000, 20.1, 2.99, TofClass::Patch},  {5001, 20.1, 2.99, TofClass::Forest},
        {5001, 19.9, 3.01, TofClass::Linear}, {5001, 20.1, 3.01, TofClass::Forest},
        {5000, 20.1, 3.01, TofClass::Linear}, {5001, 19.9, 2.99, TofClass::Patch},
        {499, 20.1, 2.99, TofClass::Tree},    {5000, 19.9, 2.99, TofClass::Patch},
    };
    int wrong = 0;
    for (const auto& c : cases) {
        const ShapeDescriptors d{c.area, c.width * c.elongation, c.width, c.elongation, 0};
        wrong += classify_feature(d) != c.want;
    }
    std::mt19937_64 rng(5);
    int violations = 0, large_narrow = 0;
    for (int i = 0; i < 10000; ++i) {
        const auto d = shape_descriptors(PolygonGeom{random_convex(rng, 800, 40, 12), {}});
        if (d.area > 5000 && d.rect_width <= 20) ++large_narrow;
        if (d.area > 5000 && d.rect_width <= 20 && d.elongation <= 3) ++violations;
        if (classify_feature(d) == TofClass::Patch && d.area > 5000 && d.elongation <= 3) ++violations;
    }
    return {wrong == 0 && violations == 0 && large_narrow > 0,
            std::to_string(12 - wrong) + "/12 boundary tuples, " + std::to_string(violations) +
                " unreachable-branch hits in 10000 polygons (" + std::to_string(large_narrow) +
                " large narrow ones)"};
}

// ---- 6 ----
Outcome geometry_oracle() {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi), off(-1e5, 1e5);
    double worst_rel = 0, worst_rigid = 0;
    bool below_sweep = true;
    const int steps = static_cast<int>(std::lround(180.0 / kSweepStepDeg));
    for (int i = 0; i < 100; ++i) {
        const auto ring = random_convex(rng, 80, 60, 20);
        const double calipers = min_rotated_rect(ring).area();
        double sweep = std::numeric_limits<double>::infinity();
        for (int k = 0; k < steps; ++k) {
            const double a = k * kSweepStepDeg * std::numbers::pi / 180, c = std::cos(a), s = std::sin(a);
            double u0 = 1e300, u1 = -1e300, v0 = 1e300, v1 = -1e300;
            for (const auto& p : ring) {
                const double u = p.x * c + p.y * s, v = -p.x * s + p.y * c;
                u0 = std::min(u0, u);
                u1 = std::max(u1, u);
                v0 = std::min(v0, v);
                v1 = std::max(v1, v);
            }
            const double area = (u1 - u0) * (v1 - v0);
            below_sweep = below_sweep && calipers <= area * (1 + 1e-12);
            sweep = std::min(sweep, area);
        }
        worst_rel = std::max(worst_rel, std::abs(sweep - calipers) / calipers);

        const PolygonGeom p{ring, {}};
        const double e0 = shape_descriptors(p).elongation;
        const double e1 = shape_descriptors(transformed(p, ang(rng), off(rng), off(rng))).elongation;
        worst_rigid = std::max(worst_rigid, std::abs(e1 - e0) / e0);
    }
    return {worst_rel <= kSweepAreaTol && worst_rigid <= kRigidElongationTol && below_sweep,
            "max area gap to sweep " + fmt("%.3g", worst_rel) + ", max elongation drift " +
                fmt("%.3g", worst_rigid)};
}

// ---- 7 ----
std::array<double, kClassCount> closure_iou(double noise, const std::filesystem::path& dir) {
    const auto fx = generate_fixture(four_class_scene(noise), 7);
    std::filesystem::create_directories(dir);
    write_geotiff(dir / "ndsm.tif", fx.ndsm);
    write_geotiff(dir / "dop.tif", fx.dop);
    PipelineConfig cfg;
    cfg.tiles = {{"scene", dir / "ndsm.tif", dir / "dop.tif"}};
    cfg.output_dir = dir / "out";
    run_pipeline(cfg);
    const auto pred = read_geotiff(cfg.output_dir / "scene_labels.tif");
    std::array<double, kClassCount> iou{};
    for (int c = 0; c < kClassCount; ++c) {
        std::size_t inter = 0, uni = 0;
        for (std::size_t i = 0; i < pred.pixel_count(); ++i) {
            const bool g = fx.labels.bands[0][i] == c, p = pred.bands[0][i] == c;
            inter += g && p;
            uni += g || p;
        }
        iou[c] = uni ? static_cast<double>(inter) / uni : 1.0;
    }
    return iou;
}

Outcome fixture_closure() {
    const auto dir = std::filesystem::temp_directory_path() / ("tofmap_acceptance_" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    const auto clean = closure_iou(0.0, dir / "clean");
    const auto noisy = closure_iou(kClosureNoiseSigma, dir / "noisy");
    std::filesystem::remove_all(dir);
    bool ok = true;
    std::string detail = "IoU clean/noisy:";
    for (int c = 0; c < kClassCount; ++c) {
        ok = ok && clean[c] >= kClosureIouClean && noisy[c] >= kClosureIouNoisy;
        detail += " " + std::string(class_name(static_cast<TofClass>(c))) + " " + fmt("%.4f", clean[c]) + "/" +
                  fmt("%.4f", noisy[c]);
    }
    return {ok, detail};
}

// ---- 8 ----
Outcome kmeans_oracle() {
    std::mt19937_64 rng(8);
    double worst = 0;
    for (int s = 0; s < 50; ++s) {
        std::uniform_int_distribution<int> size(100, 10000);
        std::uniform_real_distribution<double> lo(-0.3, 0.3), gap(0.25, 0.8), sd(0.01, 0.08), mix(0.2, 0.8);
        const double m0 = lo(rng), m1 = m0 + gap(rng), s0 = sd(rng), s1 = sd(rng);
        std::bernoulli_distribution pick(mix(rng));
        std::normal_distribution<float> a(static_cast<float>(m0), static_cast<float>(s0)),
            b(static_cast<float>(m1), static_cast<float>(s1));
        std::vector<float> v(static_cast<std::size_t>(size(rng)));
        for (auto& x : v) x = pick(rng) ? b(rng) : a(rng);

        const auto got = kmeans_1d_two_clusters(v, MaskParams{});

        // Dynamic programme over sorted values: D1[j] is the cost of one cluster
        // over the first j values, D2 = min_j D1[j] + cost(j, n).
        std::vector<float> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t n = sorted.size();
        std::vector<long double> ps(n + 1, 0), pq(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ps[i + 1] = ps[i] + sorted[i];
            pq[i + 1] = pq[i] + static_cast<long double>(sorted[i]) * sorted[i];
        }
        auto cost = [&](std::size_t i, std::size_t j) {
            const long double cnt = j - i, sum = ps[j] - ps[i];
            return pq[j] - pq[i] - sum * sum / cnt;
        };
        long double best = std::numeric_limits<long double>::infinity();
        std::size_t arg = 1;
        for (std::size_t j = 1; j < n; ++j) {
            const long double d2 = cost(0, j) + cost(j, n);
            if (d2 < best) {
                best = d2;
                arg = j;
            }
        }
        const double c0 = static_cast<double>(ps[arg] / arg);
        const double c1 = static_cast<double>((ps[n] - ps[arg]) / (n - arg));
        worst = std::max({worst, std::abs(got.centers[0] - c0), std::abs(got.centers[1] - c1)});
    }
    return {worst <= kKMeansCenterTol, "50 samples, max center error " + fmt("%.3g", worst)};
}

// ---- 9 ----
Outcome split_determinism() {
    std::mt19937_64 rng(9);
    std::vector<TileManifest> tiles;
    const char* areas[4] = {"SH", "BB", "NRW_N", "NRW_S"};
    for (int a = 0; a < 4; ++a) {
        std::uniform_real_distribution<double> forest(0, 0.4), small(0, 0.05);
        for (int i = 0; i < 25; ++i) {
            TileManifest t;
            t.tile_id = std::string(areas[a]) + "_" + std::to_string(i);
            t.study_area = areas[a];
            t.fractions = {0, forest(rng), small(rng), small(rng), small(rng)};
            t.fractions[0] = 1 - t.fractions[1] - t.fractions[2] - t.fractions[3] - t.fractions[4];
            tiles.push_back(t);
        }
    }
    const auto plan = select_validation_test(tiles, 42);
    bool same = true;
    for (int k = 0; k < 3; ++k) same = same && select_validation_test(tiles, 42) == plan;

    // recompute per-area deviations from scratch
    double worst = 0;
    for (const char* area : areas) {
        auto frac = [&](const std::vector<std::string>* ids) {
            std::array<double, kClassCount> acc{};
            double px = 0;
            for (const auto& t : tiles) {
                if (t.study_area != area) continue;
                if (ids && std::find(ids->begin(), ids->end(), t.tile_id) == ids->end()) continue;
                for (int c = 0; c < kClassCount; ++c) acc[c] += t.fractions[c] * t.pixel_count();
                px += t.pixel_count();
            }
            for (auto& x : acc) x /= px;
            return acc;
        };
        const auto ref = frac(nullptr), val = frac(&plan.val), test = frac(&plan.test);
        for (int c = 1; c < kClassCount; ++c)
            worst = std::max({worst, 100 * std::abs(val[c] - ref[c]), 100 * std::abs(test[c] - ref[c])});
    }
    const bool sizes = plan.val.size() == 20 && plan.test.size() == 20 && plan.train.size() == 60;
    return {same && sizes && worst <= kSplitMaxDevPp,
            "max deviation " + fmt("%.3f", worst) + " pp, repeat runs identical: " + (same ? "yes" : "no")};
}

}  // namespace

int main() {
    criterion(1, "macro means reproduce 0.739 / 0.843", 1, macro_arithmetic);
    criterion(2, "normalized rows sum to 100.00", 1, row_normalization);
    criterion(3, "patch-count identities 5 / 27000 / 500", 1, patch_counts);
    criterion(4, "merge equals brute-force mean/argmax", 10, merge_oracle);
    criterion(5, "classifier boundary suite + unreachable branch", 10, classifier_boundaries);
    criterion(6, "min rotated rectangle vs 0.01 deg sweep", 30, geometry_oracle);
    criterion(7, "fixture closure IoU >= 0.99 clean, >= 0.95 noisy", 60, fixture_closure);
    criterion(8, "1-D 2-means vs exact DP oracle", 30, kmeans_oracle);
    criterion(9, "split determinism and <= 1 pp deviation", 30, split_determinism);
    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
