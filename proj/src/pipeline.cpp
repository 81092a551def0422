#include "tofmap/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "tofmap/errors.hpp"
#include "tofmap/geojson.hpp"
#include "tofmap/geotiff.hpp"
#include "tofmap/parallel.hpp"

namespace tofmap {

using nlohmann::json;

void PipelineConfig::validate() const {
    try {
        mask.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(e.what());
    }
    if (dp_tolerance < 0.0) throw ConfigError("dp_tolerance must be >= 0");
    if (min_hole_area < 0.0) throw ConfigError("min_hole_area must be >= 0");
    if (!(rules.forest_min_width > 0.0) || !(rules.forest_min_area > 0.0) ||
        !(rules.tree_max_area > 0.0) || !(rules.linear_min_elongation >= 1.0)) {
        throw ConfigError("classifier thresholds out of range");
    }
    if (window < 1) throw ConfigError("window must be >= 1");
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (workers < 0) throw ConfigError("workers must be >= 0");
    for (const auto& t : tiles) {
        if (t.id.empty()) throw ConfigError("tile id must not be empty");
    }
}

void PipelineConfig::validate_inputs() const {
    validate();
    if (tiles.empty()) throw ConfigError("no input tiles configured");
    for (const auto& t : tiles) {
        if (t.ndsm.empty() || !std::filesystem::exists(t.ndsm))
            throw ConfigError("tile '" + t.id + "': nDSM not found: '" + t.ndsm.string() + "'");
        if (t.dop.empty() || !std::filesystem::exists(t.dop))
            throw ConfigError("tile '" + t.id + "': DOP not found: '" + t.dop.string() + "'");
    }
}

std::string config_to_json(const PipelineConfig& c) {
    json tiles = json::array();
    for (const auto& t : c.tiles)
        tiles.push_back({{"id", t.id}, {"ndsm", t.ndsm.string()}, {"dop", t.dop.string()}});
    json j = {
        {"tiles", tiles},
        {"labels", c.labels.string()},
        {"patches", c.patches.string()},
        {"output_dir", c.output_dir.string()},
        {"mask",
         {{"height_threshold", c.mask.height_threshold},
          {"kmeans_k", c.mask.kmeans_k},
          {"closing_window", {c.mask.closing_window.width, c.mask.closing_window.height}},
          {"kmeans_max_iter", c.mask.kmeans_max_iter},
          {"kmeans_tol", c.mask.kmeans_tol}}},
        {"vectorize", {{"dp_tolerance", c.dp_tolerance}, {"min_hole_area", c.min_hole_area}}},
        {"classifier",
         {{"forest_min_width", c.rules.forest_min_width},
          {"forest_min_area", c.rules.forest_min_area},
          {"tree_max_area", c.rules.tree_max_area},
          {"linear_min_elongation", c.rules.linear_min_elongation},
          {"linear_first", c.rules.linear_first}}},
        {"kmeans_scope", c.kmeans_scope == KMeansScope::Tile ? "tile" : "area"},
        {"split_seed", c.split_seed},
        {"window", c.window},
        {"stride", c.stride},
        {"workers", c.workers},
    };
    return j.dump(2);
}

PipelineConfig config_from_json(const std::string& text, const PipelineConfig& base) {
    PipelineConfig c = base;
    try {
        const json j = json::parse(text);
        if (j.contains("tiles")) {
            c.tiles.clear();
            for (const auto& t : j["tiles"]) {
                c.tiles.push_back({t.at("id").get<std::string>(), t.at("ndsm").get<std::string>(),
                                   t.at("dop").get<std::string>()});
            }
        }
        if (j.contains("labels")) c.labels = j["labels"].get<std::string>();
        if (j.contains("patches")) c.patches = j["patches"].get<std::string>();
        if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("mask")) {
            const json& m = j["mask"];
            c.mask.height_threshold = m.value("height_threshold", c.mask.height_threshold);
            c.mask.kmeans_k = m.value("kmeans_k", c.mask.kmeans_k);
            if (m.contains("closing_window")) {
                c.mask.closing_window = {m["closing_window"].at(0).get<int>(),
                                         m["closing_window"].at(1).get<int>()};
            }
            c.mask.kmeans_max_iter = m.value("kmeans_max_iter", c.mask.kmeans_max_iter);
            c.mask.kmeans_tol = m.value("kmeans_tol", c.mask.kmeans_tol);
        }
        if (j.contains("vectorize")) {
            c.dp_tolerance = j["vectorize"].value("dp_tolerance", c.dp_tolerance);
            c.min_hole_area = j["vectorize"].value("min_hole_area", c.min_hole_area);
        }
        if (j.contains("classifier")) {
            const json& r = j["classifier"];
            c.rules.forest_min_width = r.value("forest_min_width", c.rules.forest_min_width);
            c.rules.forest_min_area = r.value("forest_min_area", c.rules.forest_min_area);
            c.rules.tree_max_area = r.value("tree_max_area", c.rules.tree_max_area);
            c.rules.linear_min_elongation =
                r.value("linear_min_elongation", c.rules.linear_min_elongation);
            c.rules.linear_first = r.value("linear_first", c.rules.linear_first);
        }
        if (j.contains("kmeans_scope")) {
            const auto s = j["kmeans_scope"].get<std::string>();
            if (s != "tile" && s != "area") throw ConfigError("kmeans_scope must be 'tile' or 'area'");
            c.kmeans_scope = s == "tile" ? KMeansScope::Tile : KMeansScope::Area;
        }
        c.split_seed = j.value("split_seed", c.split_seed);
        c.window = j.value("window", c.window);
        c.stride = j.value("stride", c.stride);
        c.workers = j.value("workers", c.workers);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid configuration: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_config(const std::filesystem::path& path, const PipelineConfig& base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read configuration '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str(), base);
}

RasterGrid rasterize_features(std::span<const TofFeature> features, int width, int height,
                              const GeoTransform& transform) {
    RasterGrid out = make_label_raster(width, height, transform);
    auto dst = out.band(0);
    std::vector<double> xs;
    for (const auto& f : features) {
        const Ring& ext = f.geometry.exterior;
        if (ext.size() < 4) continue;
        double min_y = ext[0].y, max_y = ext[0].y;
        for (const Point& p : ext) {
            min_y = std::min(min_y, p.y);
            max_y = std::max(max_y, p.y);
        }
        const int r_begin = std::max(0, static_cast<int>(std::floor(transform.map_to_pixel(0, max_y).row)));
        const int r_end = std::min(height, static_cast<int>(std::ceil(transform.map_to_pixel(0, min_y).row)) + 1);
        const float value = static_cast<float>(code(f.tof_class));
        for (int r = r_begin; r < r_end; ++r) {
            const double y = transform.pixel_to_map(0.0, r + 0.5).y;
            xs.clear();
            auto crossings = [&](const Ring& ring) {
                for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
                    const Point& a = ring[i];
                    const Point& b = ring[i + 1];
                    if ((a.y > y) != (b.y > y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
                }
            };
            crossings(ext);
            for (const auto& h : f.geometry.holes) crossings(h);
            std::sort(xs.begin(), xs.end());
            for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
                // columns whose centre x satisfies xs[k] <= x < xs[k+1]
                const double c0 = transform.map_to_pixel(xs[k], y).col - 0.5;
                const double c1 = transform.map_to_pixel(xs[k + 1], y).col - 0.5;
                const int first = std::max(0, static_cast<int>(std::ceil(c0)));
                const int last = std::min(width - 1, static_cast<int>(std::ceil(c1)) - 1);
                for (int c = first; c <= last; ++c) dst[out.index(r, c)] = value;
            }
        }
    }
    return out;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
auto timed_stage(const std::string& name, std::vector<StageTiming>& timings,
                 const std::vector<std::string>& artifacts, F&& fn) {
    const auto start = Clock::now();
    try {
        if constexpr (std::is_void_v<decltype(fn())>) {
            fn();
            timings.push_back({name, std::chrono::duration<double, std::milli>(Clock::now() - start).count()});
        } else {
            auto result = fn();
            timings.push_back({name, std::chrono::duration<double, std::milli>(Clock::now() - start).count()});
            return result;
        }
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e.kind(), e.what(), artifacts);
    } catch (const std::exception& e) {
        throw StageError(name, ErrorKind::Io, e.what(), artifacts);
    }
}

json counts_json(const std::array<std::size_t, kClassCount>& counts) {
    json j = json::object();
    for (TofClass c : kWoodyClasses) j[std::string(class_name(c))] = counts[static_cast<std::size_t>(c)];
    return j;
}

}  // namespace

TileRun process_tile(const std::string& id, const RasterGrid& ndsm, const RasterGrid& dop,
                     const PipelineConfig& config, const KMeansResult* shared_split) {
    TileRun run;
    run.id = id;
    const std::vector<std::string> no_artifacts;
    const unsigned workers = static_cast<unsigned>(config.workers);

    auto woody = timed_stage("build-mask", run.timings, no_artifacts, [&] {
        return build_woody_mask_detailed(ndsm, dop, config.mask, shared_split);
    });
    run.kmeans = woody.kmeans;
    run.mask = std::move(woody.woody);

    auto polys = timed_stage("vectorize", run.timings, no_artifacts, [&] {
        return vectorize_mask(run.mask, {config.dp_tolerance, config.min_hole_area, workers});
    });

    run.features.resize(polys.size());
    timed_stage("descriptors", run.timings, no_artifacts, [&] {
        parallel_for(
            polys.size(),
            [&](std::size_t i) {
                auto& f = run.features[i];
                f.id = id + "_" + std::to_string(i + 1);
                f.geometry = std::move(polys[i]);
                try {
                    f.descriptors = shape_descriptors(f.geometry);
                } catch (const DegenerateGeometryError& e) {
                    throw DegenerateGeometryError("feature '" + f.id + "': " + e.what());
                }
            },
            workers);
    });

    timed_stage("classify", run.timings, no_artifacts, [&] {
        for (auto& f : run.features) {
            f.tof_class = classify_feature(f.descriptors, config.rules);
            ++run.class_counts[static_cast<std::size_t>(f.tof_class)];
        }
    });

    run.labels = timed_stage("rasterize", run.timings, no_artifacts, [&] {
        RasterGrid labels = rasterize_features(run.features, ndsm.width, ndsm.height, ndsm.transform);
        labels.epsg = dop.epsg ? dop.epsg : ndsm.epsg;
        return labels;
    });
    return run;
}

std::string RunReport::to_json() const {
    json tiles_json = json::array();
    for (const auto& t : tiles) {
        json timings = json::object();
        for (const auto& s : t.timings) timings[s.stage] = s.milliseconds;
        json tile = {{"id", t.id},
                     {"features", t.features.size()},
                     {"class_counts", counts_json(t.class_counts)},
                     {"timings_ms", timings}};
        if (t.kmeans) {
            tile["kmeans"] = {{"centers", t.kmeans->centers},
                              {"threshold", t.kmeans->threshold()},
                              {"iterations", t.kmeans->iterations}};
        }
        tiles_json.push_back(tile);
    }
    json j = {{"tiles", tiles_json},
              {"class_counts", counts_json(class_counts)},
              {"artifacts", artifacts}};
    if (area_split) {
        j["area_split"] = {{"centers", area_split->centers}, {"threshold", area_split->threshold()}};
    }
    return j.dump(2);
}

RunReport run_pipeline(const PipelineConfig& config) {
    config.validate_inputs();
    std::filesystem::create_directories(config.output_dir);

    RunReport report;
    std::mutex mutex;
    const std::size_t n = config.tiles.size();
    const unsigned outer = n > 1 ? static_cast<unsigned>(config.workers) : 1u;
    PipelineConfig tile_config = config;
    if (n > 1) tile_config.workers = 1;  // parallel over tiles, not inside them

    auto artifacts_snapshot = [&] {
        std::lock_guard lock(mutex);
        return report.artifacts;
    };

    if (config.kmeans_scope == KMeansScope::Area && n > 1) {
        std::vector<RasterGrid> ndvi(n);
        std::vector<BinaryMask> masks(n);
        std::vector<StageTiming> ignored;
        timed_stage("kmeans-area", ignored, {}, [&] {
            parallel_for(
                n,
                [&](std::size_t i) {
                    const RasterGrid ndsm = read_geotiff(config.tiles[i].ndsm);
                    const RasterGrid dop = read_geotiff(config.tiles[i].dop);
                    masks[i] = build_height_mask(ndsm, config.mask);
                    ndvi[i] = compute_ndvi(dop, masks[i]);
                },
                outer);
            std::vector<const RasterGrid*> nv;
            std::vector<const BinaryMask*> mv;
            for (std::size_t i = 0; i < n; ++i) {
                nv.push_back(&ndvi[i]);
                mv.push_back(&masks[i]);
            }
            try {
                report.area_split = split_ndvi_kmeans_pooled(nv, mv, config.mask);
            } catch (const DegenerateInputError&) {
                // fall back to per-tile handling
            }
        });
    }

    report.tiles.resize(n);
    parallel_for(
        n,
        [&](std::size_t i) {
            const TileInput& in = config.tiles[i];
            std::vector<StageTiming> read_timing;
            const auto rasters = timed_stage("read", read_timing, artifacts_snapshot(), [&] {
                return std::pair{read_geotiff(in.ndsm), read_geotiff(in.dop)};
            });
            TileRun run;
            try {
                run = process_tile(in.id, rasters.first, rasters.second, tile_config,
                                   report.area_split ? &*report.area_split : nullptr);
            } catch (const StageError& e) {
                throw StageError(e.stage(), e.cause(),
                                 "tile '" + in.id + "': " + std::string(e.what()),
                                 artifacts_snapshot());
            }
            run.timings.insert(run.timings.begin(), read_timing.begin(), read_timing.end());

            const auto dir = config.output_dir;
            const auto mask_path = dir / (in.id + "_mask.tif");
            const auto geojson_path = dir / (in.id + "_tof.geojson");
            const auto labels_path = dir / (in.id + "_labels.tif");
            timed_stage("write", run.timings, artifacts_snapshot(), [&] {
                write_mask_geotiff(mask_path, run.mask);
                {
                    std::lock_guard lock(mutex);
                    report.artifacts.push_back(mask_path.string());
                }
                write_geojson(geojson_path, run.features, {true, true, rasters.second.epsg});
                {
                    std::lock_guard lock(mutex);
                    report.artifacts.push_back(geojson_path.string());
                }
                write_geotiff(labels_path, run.labels);
                std::lock_guard lock(mutex);
                report.artifacts.push_back(labels_path.string());
            });
            run.mask = BinaryMask{};
            run.labels = RasterGrid{};
            report.tiles[i] = std::move(run);
        },
        outer);

    for (const auto& t : report.tiles)
        for (int c = 0; c < kClassCount; ++c) report.class_counts[c] += t.class_counts[c];
    std::sort(report.artifacts.begin(), report.artifacts.end());

    const auto report_path = config.output_dir / "run_report.json";
    std::ofstream out(report_path);
    if (!out) throw StageError("report", ErrorKind::Io, "cannot write " + report_path.string(), report.artifacts);
    out << report.to_json() << '\n';
    return report;
}

}  // namespace tofmap
