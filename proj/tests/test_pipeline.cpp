#include <fstream>
#include <iterator>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "test_util.hpp"
#include "tofmap/errors.hpp"
#include "tofmap/fixture.hpp"
#include "tofmap/geojson.hpp"
#include "tofmap/geotiff.hpp"
#include "tofmap/pipeline.hpp"

using namespace tofmap;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

PipelineConfig fixture_config(const testutil::TempDir& dir, const Fixture& f, const std::string& out) {
    write_geotiff(dir / "ndsm.tif", f.ndsm);
    write_geotiff(dir / "dop.tif", f.dop);
    PipelineConfig c;
    c.tiles = {{"t1", dir / "ndsm.tif", dir / "dop.tif"}};
    c.output_dir = dir / out;
    return c;
}

}  // namespace

TEST(Fixture, DeterministicPerSeed) {
    const auto spec = four_class_scene(0.05);
    const auto a = generate_fixture(spec, 5);
    const auto b = generate_fixture(spec, 5);
    const auto c = generate_fixture(spec, 6);
    EXPECT_EQ(a.dop.bands, b.dop.bands);
    EXPECT_EQ(a.ndsm.bands, b.ndsm.bands);
    EXPECT_EQ(a.labels.bands, b.labels.bands);
    EXPECT_NE(a.dop.bands, c.dop.bands);
    EXPECT_EQ(a.labels.bands, c.labels.bands);
}

TEST(Fixture, EmptySceneIsBackground) {
    SceneSpec s;
    s.width = 50;
    s.height = 40;
    const auto f = generate_fixture(s, 1);
    for (float v : f.labels.bands[0]) ASSERT_EQ(v, 0.0f);
    for (float v : f.ndsm.bands[0]) ASSERT_EQ(v, 0.0f);
}

TEST(Fixture, ForestSquareLabelledAnalytically) {
    SceneSpec s;
    s.width = 500;
    s.height = 500;
    s.shapes = {{"forest", ShapeKind::Rect, 50, 50, 80, 80, 0, 0, 15, 0.8, true}};
    const auto f = generate_fixture(s, 1);
    ASSERT_EQ(f.shape_classes[0], TofClass::Forest);
    for (int r = 0; r < 500; ++r)
        for (int c = 0; c < 500; ++c) {
            const bool inside = r >= 50 && r < 450 && c >= 50 && c < 450;
            ASSERT_EQ(f.labels.at(0, r, c), inside ? 1.0f : 0.0f);
        }
}

TEST(Fixture, FourClassSceneAndOverlapNotes) {
    auto spec = four_class_scene();
    const auto f = generate_fixture(spec, 1);
    EXPECT_EQ(f.shape_classes, (std::vector<TofClass>{TofClass::Forest, TofClass::Linear, TofClass::Patch,
                                                      TofClass::Tree, TofClass::Background}));
    EXPECT_TRUE(f.notes.empty());
    spec.shapes.push_back({"overlap", ShapeKind::Disk, 50, 50, 0, 0, 5, 0, 5, 0.8, true});
    EXPECT_EQ(generate_fixture(spec, 1).notes.size(), 1u);
    EXPECT_EQ(scene_to_json(scene_from_json(scene_to_json(spec))), scene_to_json(spec));
}

TEST(Rasterize, PixelCentreRule) {
    const GeoTransform t{0, 10, 1, 1};
    TofFeature f;
    f.tof_class = TofClass::Patch;
    f.geometry.exterior = {{1, 2}, {4, 2}, {4, 8}, {1, 8}, {1, 2}};  // cols 1..3, rows 2..7
    f.geometry.holes = {{{2, 4}, {2, 5}, {3, 5}, {3, 4}, {2, 4}}};   // pixel (5, 2)
    const auto g = rasterize_features(std::vector<TofFeature>{f}, 6, 10, t);
    for (int r = 0; r < 10; ++r)
        for (int c = 0; c < 6; ++c) {
            const bool in = c >= 1 && c <= 3 && r >= 2 && r <= 7 && !(r == 5 && c == 2);
            ASSERT_EQ(g.at(0, r, c), in ? 2.0f : 0.0f) << r << "," << c;
        }
}

TEST(Pipeline, FixtureSceneGivesOneFeaturePerClass) {
    const auto f = generate_fixture(four_class_scene(), 1);
    PipelineConfig c;
    c.workers = 1;
    const auto run = process_tile("t", f.ndsm, f.dop, c);
    for (TofClass cls : kWoodyClasses) EXPECT_EQ(run.class_counts[static_cast<int>(cls)], 1u);
    EXPECT_EQ(run.features.size(), 4u);
    ASSERT_EQ(run.timings.size(), 5u);
    EXPECT_EQ(run.timings.front().stage, "build-mask");
}

TEST(Pipeline, EmptyMaskSceneWritesValidEmptyOutputs) {
    testutil::TempDir dir("pipe");
    SceneSpec s;
    s.width = s.height = 64;
    s.origin_x = 560000;
    s.origin_y = 5930000;
    const auto cfg = fixture_config(dir, generate_fixture(s, 1), "out");
    const auto report = run_pipeline(cfg);
    EXPECT_TRUE(report.tiles[0].features.empty());
    const auto j = nlohmann::json::parse(slurp(cfg.output_dir / "t1_tof.geojson"));
    EXPECT_EQ(j["type"], "FeatureCollection");
    EXPECT_TRUE(j["features"].empty());
    const auto labels = read_geotiff(cfg.output_dir / "t1_labels.tif");
    for (float v : labels.bands[0]) ASSERT_EQ(v, 0.0f);
    EXPECT_TRUE(std::filesystem::exists(cfg.output_dir / "run_report.json"));
}

TEST(Pipeline, MissingInputFailsBeforeCompute) {
    testutil::TempDir dir("pipe");
    PipelineConfig c;
    c.tiles = {{"t1", dir / "nope.tif", dir / "dop.tif"}};
    c.output_dir = dir / "out";
    EXPECT_THROW(run_pipeline(c), ConfigError);
    EXPECT_FALSE(std::filesystem::exists(c.output_dir));
}

TEST(Pipeline, StageErrorKeepsEarlierArtifacts) {
    testutil::TempDir dir("pipe");
    const auto f = generate_fixture(four_class_scene(), 1);
    auto cfg = fixture_config(dir, f, "out");
    auto dop3 = f.dop;
    dop3.bands.resize(3);
    dop3.nodata.resize(3);
    write_geotiff(dir / "dop3.tif", dop3);
    cfg.tiles.push_back({"t2", dir / "ndsm.tif", dir / "dop3.tif"});
    cfg.kmeans_scope = KMeansScope::Tile;
    cfg.workers = 1;
    try {
        run_pipeline(cfg);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "build-mask");
        EXPECT_EQ(e.cause(), ErrorKind::MissingBand);
        EXPECT_EQ(e.completed_artifacts().size(), 3u);
        for (const auto& a : e.completed_artifacts()) EXPECT_TRUE(std::filesystem::exists(a));
    }
}

TEST(Pipeline, OutputsBitIdenticalAcrossRunsAndWorkerCounts) {
    testutil::TempDir dir("pipe");
    const auto f = generate_fixture(four_class_scene(0.05), 9);
    auto a = fixture_config(dir, f, "a");
    a.tiles.push_back({"t2", dir / "ndsm.tif", dir / "dop.tif"});
    a.workers = 1;
    auto b = a;
    b.output_dir = dir / "b";
    b.workers = 3;
    run_pipeline(a);
    run_pipeline(b);
    for (const char* name : {"t1_mask.tif", "t1_tof.geojson", "t1_labels.tif", "t2_labels.tif"})
        EXPECT_EQ(slurp(a.output_dir / name), slurp(b.output_dir / name)) << name;
}

TEST(Pipeline, AreaScopeSharesOneSplit) {
    testutil::TempDir dir("pipe");
    auto cfg = fixture_config(dir, generate_fixture(four_class_scene(0.05), 2), "out");
    write_geotiff(dir / "ndsm2.tif", generate_fixture(four_class_scene(0.05), 3).ndsm);
    write_geotiff(dir / "dop2.tif", generate_fixture(four_class_scene(0.05), 3).dop);
    cfg.tiles.push_back({"t2", dir / "ndsm2.tif", dir / "dop2.tif"});
    const auto area = run_pipeline(cfg);
    ASSERT_TRUE(area.area_split.has_value());
    EXPECT_EQ(area.tiles[0].kmeans->threshold(), area.tiles[1].kmeans->threshold());
    cfg.kmeans_scope = KMeansScope::Tile;
    cfg.output_dir = dir / "tile";
    const auto tile = run_pipeline(cfg);
    EXPECT_FALSE(tile.area_split.has_value());
    EXPECT_NE(tile.tiles[0].kmeans->threshold(), tile.tiles[1].kmeans->threshold());
}

TEST(Config, JsonRoundTripIsLossless) {
    PipelineConfig c;
    c.tiles = {{"a", "/x/a_ndsm.tif", "/x/a_dop.tif"}, {"b", "b1.tif", "b2.tif"}};
    c.labels = "/labels";
    c.patches = "/patches";
    c.output_dir = "/out";
    c.mask.height_threshold = 2.75;
    c.mask.closing_window = {7, 3};
    c.mask.kmeans_max_iter = 33;
    c.mask.kmeans_tol = 1.0 / 3.0 * 1e-5;
    c.dp_tolerance = 0.1 + 0.2;
    c.min_hole_area = 2.5;
    c.rules.linear_first = true;
    c.rules.tree_max_area = 450.125;
    c.kmeans_scope = KMeansScope::Tile;
    c.split_seed = 0xFFFFFFFFFFFFFFFFull;
    c.window = 512;
    c.stride = 64;
    c.workers = 3;
    EXPECT_EQ(config_from_json(config_to_json(c)), c);
}

TEST(Config, PartialFileKeepsDefaultsAndValidates) {
    const auto c = config_from_json(R"({"vectorize": {"dp_tolerance": 0.2}, "kmeans_scope": "tile"})");
    EXPECT_EQ(c.dp_tolerance, 0.2);
    EXPECT_EQ(c.kmeans_scope, KMeansScope::Tile);
    EXPECT_EQ(c.mask, MaskParams{});
    EXPECT_THROW(config_from_json(R"({"mask": {"closing_window": [4, 4]}})"), ConfigError);
    EXPECT_THROW(config_from_json(R"({"kmeans_scope": "region"})"), ConfigError);
    EXPECT_THROW(config_from_json("{not json"), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(GeoJson, RoundTripKeepsClassesAndHoles) {
    TofFeature f;
    f.id = "x";
    f.tof_class = TofClass::Linear;
    f.geometry.exterior = {{0, 0}, {10, 0}, {10, 10}, {0, 10}, {0, 0}};
    f.geometry.holes = {{{2, 2}, {2, 4}, {4, 4}, {4, 2}, {2, 2}}};
    f.descriptors = shape_descriptors(f.geometry);
    const auto back = from_geojson(to_geojson(std::vector<TofFeature>{f}));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].id, "x");
    EXPECT_EQ(back[0].tof_class, TofClass::Linear);
    ASSERT_EQ(back[0].geometry.holes.size(), 1u);
    EXPECT_NEAR(polygon_area(back[0].geometry), 96, 1e-12);
    const auto j = nlohmann::json::parse(to_geojson(std::vector<TofFeature>{f}));
    const auto& props = j["features"][0]["properties"];
    EXPECT_EQ(props["class"], 3);
    EXPECT_EQ(props["class_name"], "Linear");
    EXPECT_NEAR(props["area_m2"].get<double>(), 96, 1e-12);
    for (const char* k : {"width_m", "length_m", "elongation"}) EXPECT_TRUE(props.contains(k));
}
