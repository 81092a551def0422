#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tofmap/dataset_splitter.hpp"
#include "tofmap/errors.hpp"
#include "tofmap/evaluator.hpp"
#include "tofmap/fixture.hpp"
#include "tofmap/geojson.hpp"
#include "tofmap/geotiff.hpp"
#include "tofmap/inference_merger.hpp"
#include "tofmap/mask_builder.hpp"
#include "tofmap/pipeline.hpp"
#include "tofmap/tof_classifier.hpp"
#include "tofmap/vectorizer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tofmap;

namespace {

// "5x5" / "5000x5000" -> (first, second)
std::pair<int, int> parse_pair(const std::string& text, const char* what) {
    const auto x = text.find_first_of("xX");
    try {
        if (x == std::string::npos) {
            const int v = std::stoi(text);
            return {v, v};
        }
        return {std::stoi(text.substr(0, x)), std::stoi(text.substr(x + 1))};
    } catch (const std::exception&) {
        throw ParameterError(std::string("cannot parse ") + what + " '" + text + "' (expected AxB)");
    }
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

void print_result(const json& j) { std::cout << j.dump(2) << '\n'; }

json counts_json(const std::array<std::size_t, kClassCount>& counts) {
    json j = json::object();
    for (TofClass c : kWoodyClasses) j[std::string(class_name(c))] = counts[static_cast<std::size_t>(c)];
    return j;
}

KMeansScope parse_scope(const std::string& s) {
    if (s == "tile") return KMeansScope::Tile;
    if (s == "area") return KMeansScope::Area;
    throw ParameterError("--kmeans-scope must be 'tile' or 'area'");
}

std::vector<fs::path> tif_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        const auto ext = e.path().extension().string();
        if (e.is_regular_file() && (ext == ".tif" || ext == ".tiff")) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

struct MaskArgs {
    double height_threshold = 3.0;
    std::string closing = "5x5";
    std::string kmeans_scope = "area";
};

void add_mask_options(CLI::App* cmd, MaskArgs& a) {
    cmd->add_option("--height-threshold", a.height_threshold, "Minimum nDSM height in metres")
        ->capture_default_str();
    cmd->add_option("--closing", a.closing, "Closing window, WxH pixels")->capture_default_str();
    cmd->add_option("--kmeans-scope", a.kmeans_scope, "NDVI split per 'tile' or per 'area'")
        ->check(CLI::IsMember({"tile", "area"}))
        ->capture_default_str();
}

MaskParams mask_params(const MaskArgs& a) {
    MaskParams p;
    p.height_threshold = a.height_threshold;
    const auto [w, h] = parse_pair(a.closing, "closing window");
    p.closing_window = {w, h};
    p.validate();
    return p;
}

struct RuleArgs {
    bool linear_first = false;
    ClassifierRules rules;
};

void add_rule_options(CLI::App* cmd, RuleArgs& a) {
    cmd->add_flag("--linear-first", a.linear_first, "Test elongation before the small-area rule");
    cmd->add_option("--forest-min-width", a.rules.forest_min_width)->capture_default_str();
    cmd->add_option("--forest-min-area", a.rules.forest_min_area)->capture_default_str();
    cmd->add_option("--tree-max-area", a.rules.tree_max_area)->capture_default_str();
    cmd->add_option("--linear-min-elongation", a.rules.linear_min_elongation)->capture_default_str();
}

ClassifierRules rules_from(const RuleArgs& a) {
    ClassifierRules r = a.rules;
    r.linear_first = a.linear_first;
    return r;
}

// ---- eval helpers ----

std::string group_of(const fs::path& file, const fs::path& root, const std::string& group_by,
                     const std::map<std::string, std::string>& tile_area) {
    const std::string stem = file.stem().string();
    if (group_by == "none") return "all";
    if (group_by == "tile") return stem;
    if (auto it = tile_area.find(stem); it != tile_area.end()) return it->second;
    const auto rel = fs::relative(file, root);
    if (rel.has_parent_path()) return rel.begin()->string();
    throw DataError("no study area known for tile '" + stem +
                    "' (pass --manifest or use one subdirectory per area)");
}

fs::path matching_prediction(const fs::path& gt_file, const fs::path& gt_root,
                             const fs::path& pred_root) {
    const auto rel = fs::relative(gt_file, gt_root);
    const std::string stem = gt_file.stem().string();
    for (const fs::path& candidate :
         {pred_root / rel, pred_root / rel.parent_path() / (stem + "_labels.tif"),
          pred_root / (stem + ".tif"), pred_root / (stem + "_labels.tif")}) {
        if (fs::exists(candidate)) return candidate;
    }
    throw DataError("no prediction found for '" + rel.string() + "'");
}

int run(int argc, char** argv) {
    CLI::App app{"Trees-outside-forests mapping toolkit"};
    app.require_subcommand(1);
    int workers = 0;
    app.add_option("--workers", workers, "Worker threads (0: TOFMAP_THREADS or all cores)");

    // build-mask
    auto* bm = app.add_subcommand("build-mask", "Woody vegetation mask from nDSM + DOP");
    std::string bm_ndsm, bm_dop, bm_out;
    MaskArgs bm_args;
    bm->add_option("--ndsm", bm_ndsm)->required();
    bm->add_option("--dop", bm_dop, "4-band R,G,B,NIR image")->required();
    bm->add_option("--out", bm_out)->required();
    add_mask_options(bm, bm_args);

    // vectorize
    auto* vz = app.add_subcommand("vectorize", "Mask GeoTIFF to simplified polygons");
    std::string vz_mask, vz_out;
    double vz_tol = 0.4, vz_hole = 1.0;
    vz->add_option("--mask", vz_mask)->required();
    vz->add_option("--out", vz_out)->required();
    vz->add_option("--dp-tolerance", vz_tol, "Douglas-Peucker tolerance in metres")->capture_default_str();
    vz->add_option("--min-hole-area", vz_hole, "Drop holes smaller than this (m²)")->capture_default_str();

    // classify
    auto* cl = app.add_subcommand("classify", "Assign Forest/Patch/Linear/Tree to polygons");
    std::string cl_in, cl_out;
    RuleArgs cl_rules;
    cl->add_option("--in", cl_in)->required();
    cl->add_option("--out", cl_out)->required();
    add_rule_options(cl, cl_rules);

    // split
    auto* sp = app.add_subcommand("split", "Choose validation and test tiles per study area");
    std::string sp_manifest, sp_labels, sp_out, sp_scope = "per-area", sp_write_manifest;
    std::uint64_t sp_seed = 42;
    SplitOptions sp_opts;
    auto* sp_m = sp->add_option("--manifest", sp_manifest, "CSV of tile class fractions");
    auto* sp_l = sp->add_option("--labels", sp_labels, "Label directory, one subdirectory per area");
    sp_m->excludes(sp_l);
    sp->add_option("--seed", sp_seed)->capture_default_str();
    sp->add_option("--scope", sp_scope)->check(CLI::IsMember({"per-area", "global"}))->capture_default_str();
    sp->add_option("--val", sp_opts.val_per_area)->capture_default_str();
    sp->add_option("--test", sp_opts.test_per_area)->capture_default_str();
    sp->add_option("--max-deviation", sp_opts.max_deviation_pp, "Percentage points")->capture_default_str();
    sp->add_option("--attempts", sp_opts.max_attempts)->capture_default_str();
    sp->add_option("--write-manifest", sp_write_manifest, "Also save the computed manifest CSV");
    sp->add_option("--out", sp_out)->required();

    // extract-patches
    auto* ep = app.add_subcommand("extract-patches", "Cut image/label pairs into training windows");
    std::string ep_image, ep_labels, ep_out, ep_tile;
    int ep_window = 1024, ep_stride = 1024;
    bool ep_no_augment = false;
    ep->add_option("--image", ep_image)->required();
    ep->add_option("--labels", ep_labels)->required();
    ep->add_option("--out", ep_out, "Output directory")->required();
    ep->add_option("--tile-id", ep_tile, "Name prefix (default: image file stem)");
    ep->add_option("--window", ep_window)->capture_default_str();
    ep->add_option("--stride", ep_stride)->capture_default_str();
    ep->add_flag("--no-augment", ep_no_augment, "Skip the flipped copies");

    // merge
    auto* mg = app.add_subcommand("merge", "Merge overlapping softmax windows into a label map");
    std::string mg_patches, mg_extent, mg_out, mg_probs, mg_vote = "soft", mg_like;
    std::optional<int> mg_stride;
    mg->add_option("--patches", mg_patches)->required();
    mg->add_option("--extent", mg_extent, "HxW in pixels")->required();
    mg->add_option("--stride", mg_stride, "Require the complete window grid for this stride");
    mg->add_option("--vote", mg_vote)->check(CLI::IsMember({"soft", "hard"}))->capture_default_str();
    mg->add_option("--like", mg_like, "GeoTIFF whose georeferencing the output copies");
    mg->add_option("--out", mg_out)->required();
    mg->add_option("--probs", mg_probs, "Optional mean-probability GeoTIFF");

    // eval
    auto* ev = app.add_subcommand("eval", "Pixel-wise metrics of predictions against reference labels");
    std::string ev_gt, ev_pred, ev_group = "study_area", ev_manifest, ev_out, ev_csv, ev_matrix;
    ev->add_option("--gt", ev_gt, "Label GeoTIFF or directory")->required();
    ev->add_option("--pred", ev_pred, "Prediction GeoTIFF or directory")->required();
    ev->add_option("--group-by", ev_group)
        ->check(CLI::IsMember({"study_area", "tile", "none"}))
        ->capture_default_str();
    ev->add_option("--manifest", ev_manifest, "Manifest CSV mapping tiles to study areas");
    ev->add_option("--out", ev_out, "JSON report")->required();
    ev->add_option("--csv", ev_csv, "Per-class CSV report");
    ev->add_option("--matrix-csv", ev_matrix, "Row-normalized confusion matrix CSV");

    // fixture
    auto* fx = app.add_subcommand("fixture", "Render a synthetic scene with analytic labels");
    std::string fx_scene, fx_out;
    double fx_noise = 0.0;
    std::uint64_t fx_seed = 1;
    RuleArgs fx_rules;
    fx->add_option("--scene", fx_scene, "Scene JSON (default: built-in four-class scene)");
    fx->add_option("--ndvi-noise", fx_noise, "NDVI noise sigma for the built-in scene")->capture_default_str();
    fx->add_option("--seed", fx_seed)->capture_default_str();
    fx->add_option("--out", fx_out, "Output directory")->required();
    add_rule_options(fx, fx_rules);

    // run
    auto* rn = app.add_subcommand("run", "Full mask -> polygons -> classes -> labels pipeline");
    std::string rn_config, rn_ndsm, rn_dop, rn_tile = "tile", rn_out, rn_dump;
    MaskArgs rn_mask;
    double rn_tol = 0.4, rn_hole = 1.0;
    RuleArgs rn_rules;
    std::uint64_t rn_seed = 42;
    rn->add_option("--config", rn_config, "JSON configuration file");
    rn->add_option("--ndsm", rn_ndsm, "Single-tile nDSM (adds to the configured tiles)");
    rn->add_option("--dop", rn_dop, "Single-tile DOP");
    rn->add_option("--tile-id", rn_tile)->capture_default_str();
    rn->add_option("--out-dir", rn_out);
    add_mask_options(rn, rn_mask);
    rn->add_option("--dp-tolerance", rn_tol)->capture_default_str();
    rn->add_option("--min-hole-area", rn_hole)->capture_default_str();
    add_rule_options(rn, rn_rules);
    rn->add_option("--seed", rn_seed, "Split seed")->capture_default_str();
    rn->add_option("--dump-config", rn_dump, "Write the effective configuration here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    if (*bm) {
        const MaskParams p = mask_params(bm_args);
        const RasterGrid ndsm = read_geotiff(bm_ndsm);
        const RasterGrid dop = read_geotiff(bm_dop);
        const auto r = build_woody_mask_detailed(ndsm, dop, p);
        write_mask_geotiff(bm_out, r.woody);
        json j = {{"out", bm_out},
                  {"height_pixels", r.height_mask.count()},
                  {"woody_pixels", r.woody.count()},
                  {"degenerate_ndvi", r.degenerate_ndvi}};
        if (r.kmeans) j["ndvi_threshold"] = r.kmeans->threshold();
        print_result(j);
    } else if (*vz) {
        const BinaryMask mask = read_mask_geotiff(vz_mask);
        auto polys = vectorize_mask(mask, {vz_tol, vz_hole, static_cast<unsigned>(workers)});
        std::vector<TofFeature> features(polys.size());
        for (std::size_t i = 0; i < polys.size(); ++i) {
            features[i].id = std::to_string(i + 1);
            features[i].geometry = std::move(polys[i]);
            features[i].descriptors = shape_descriptors(features[i].geometry);
        }
        write_geojson(vz_out, features, {true, false, 0});
        print_result({{"out", vz_out}, {"features", features.size()}});
    } else if (*cl) {
        auto layer = classify_layer(read_geojson(cl_in), rules_from(cl_rules));
        write_geojson(cl_out, layer.features);
        print_result({{"out", cl_out}, {"class_counts", counts_json(layer.counts)}});
    } else if (*sp) {
        std::vector<TileManifest> tiles;
        if (!sp_manifest.empty()) {
            tiles = read_manifest_csv(sp_manifest);
        } else if (!sp_labels.empty()) {
            for (const auto& f : tif_files(sp_labels)) {
                const auto rel = fs::relative(f, sp_labels);
                if (!rel.has_parent_path())
                    throw DataError("label '" + rel.string() + "' is not inside a study-area directory");
                const RasterGrid labels = read_geotiff(f);
                tiles.push_back({f.stem().string(), rel.begin()->string(), labels.width,
                                 labels.height, tile_distribution(labels)});
            }
        } else {
            throw ParameterError("split needs --manifest or --labels");
        }
        if (!sp_write_manifest.empty()) write_manifest_csv(sp_write_manifest, tiles);
        sp_opts.scope = sp_scope == "global" ? SelectionScope::Global : SelectionScope::PerArea;
        const SplitPlan plan = select_validation_test(tiles, sp_seed, sp_opts);
        write_text(sp_out, split_plan_to_json(plan));
        print_result({{"out", sp_out},
                      {"train", plan.train.size()},
                      {"val", plan.val.size()},
                      {"test", plan.test.size()},
                      {"max_deviation_pp", plan.achieved_max_deviation_pp}});
    } else if (*ep) {
        const RasterGrid image = read_geotiff(ep_image);
        const RasterGrid labels = read_geotiff(ep_labels);
        const std::string tile = ep_tile.empty() ? fs::path(ep_image).stem().string() : ep_tile;
        fs::create_directories(ep_out);
        std::size_t written = 0;
        extract_patches_augmented(image, labels, {ep_window, ep_stride, !ep_no_augment},
                                  [&](const PatchPair& p) {
                                      const std::string base = tile + "_" + std::to_string(p.row) + "_" +
                                                               std::to_string(p.col) + "_" +
                                                               std::string(augmentation_name(p.augmentation));
                                      write_geotiff(fs::path(ep_out) / (base + ".tif"), p.image);
                                      write_geotiff(fs::path(ep_out) / (base + "_label.tif"), p.labels);
                                      ++written;
                                  });
        print_result({{"out", ep_out}, {"patches", written}});
    } else if (*mg) {
        const auto [h, w] = parse_pair(mg_extent, "extent");
        MergeOptions opts{h, w, mg_stride, mg_vote == "hard" ? VoteMode::Hard : VoteMode::Soft};
        const MergeResult r = merge_patch_directory(mg_patches, opts);
        GeoTransform t;
        int epsg = 0;
        if (!mg_like.empty()) {
            const RasterGrid like = read_geotiff(mg_like);
            if (like.width != w || like.height != h)
                throw ShapeError("--like raster is " + std::to_string(like.height) + "x" +
                                 std::to_string(like.width) + ", extent is " + mg_extent);
            t = like.transform;
            epsg = like.epsg;
        }
        RasterGrid labels = r.label_raster(t);
        labels.epsg = epsg;
        write_geotiff(mg_out, labels);
        if (!mg_probs.empty()) {
            RasterGrid probs = r.probability_raster(t);
            probs.epsg = epsg;
            write_geotiff(mg_probs, probs);
        }
        print_result({{"out", mg_out}, {"height", h}, {"width", w}});
    } else if (*ev) {
        std::map<std::string, ConfusionMatrix> groups;
        if (fs::is_directory(ev_gt)) {
            if (!fs::is_directory(ev_pred)) throw ParameterError("--gt is a directory, --pred is not");
            std::map<std::string, std::string> tile_area;
            if (!ev_manifest.empty())
                for (const auto& m : read_manifest_csv(ev_manifest)) tile_area[m.tile_id] = m.study_area;
            const auto files = tif_files(ev_gt);
            if (files.empty()) throw EmptyInputError("no label rasters in '" + ev_gt + "'");
            for (const auto& f : files) {
                const RasterGrid gt = read_geotiff(f);
                const RasterGrid pred = read_geotiff(matching_prediction(f, ev_gt, ev_pred));
                groups[group_of(f, ev_gt, ev_group, tile_area)].accumulate(gt, pred);
            }
        } else {
            const std::string name = ev_group == "tile" ? fs::path(ev_gt).stem().string() : "all";
            groups[name].accumulate(read_geotiff(ev_gt), read_geotiff(ev_pred));
        }
        const EvaluationReport report = evaluate_groups(groups);
        write_text(ev_out, report_to_json(report));
        if (!ev_csv.empty()) write_text(ev_csv, report_to_csv(report));
        if (!ev_matrix.empty()) write_text(ev_matrix, normalized_matrix_csv(normalized_matrix(report.overall.matrix)));
        print_result({{"out", ev_out},
                      {"groups", report.groups.size()},
                      {"miou", report.overall.macro.miou},
                      {"mf1", report.overall.macro.mf1}});
    } else if (*fx) {
        const SceneSpec spec = fx_scene.empty() ? four_class_scene(fx_noise) : scene_from_json(read_text(fx_scene));
        const Fixture f = generate_fixture(spec, fx_seed, rules_from(fx_rules));
        const fs::path out = fx_out;
        fs::create_directories(out);
        write_geotiff(out / "ndsm.tif", f.ndsm);
        write_geotiff(out / "dop.tif", f.dop);
        write_geotiff(out / "labels.tif", f.labels);
        write_text(out / "scene.json", scene_to_json(spec));
        json classes = json::array();
        for (std::size_t i = 0; i < spec.shapes.size(); ++i) {
            classes.push_back({{"shape", spec.shapes[i].name},
                               {"class", std::string(class_name(f.shape_classes[i]))}});
        }
        json meta = {{"seed", fx_seed}, {"shapes", classes}, {"notes", f.notes}};
        write_text(out / "fixture.json", meta.dump(2));
        print_result(meta);
    } else if (*rn) {
        PipelineConfig cfg = rn_config.empty() ? PipelineConfig{} : load_config(rn_config);
        auto given = [&](const char* name) { return rn->count(name) > 0; };
        if (given("--ndsm") != given("--dop")) throw ConfigError("--ndsm and --dop go together");
        if (given("--ndsm")) cfg.tiles.push_back({rn_tile, rn_ndsm, rn_dop});
        if (given("--out-dir")) cfg.output_dir = rn_out;
        if (given("--height-threshold")) cfg.mask.height_threshold = rn_mask.height_threshold;
        if (given("--closing")) {
            const auto [cw, ch] = parse_pair(rn_mask.closing, "closing window");
            cfg.mask.closing_window = {cw, ch};
        }
        if (given("--kmeans-scope")) cfg.kmeans_scope = parse_scope(rn_mask.kmeans_scope);
        if (given("--dp-tolerance")) cfg.dp_tolerance = rn_tol;
        if (given("--min-hole-area")) cfg.min_hole_area = rn_hole;
        if (given("--linear-first")) cfg.rules.linear_first = true;
        if (given("--forest-min-width")) cfg.rules.forest_min_width = rn_rules.rules.forest_min_width;
        if (given("--forest-min-area")) cfg.rules.forest_min_area = rn_rules.rules.forest_min_area;
        if (given("--tree-max-area")) cfg.rules.tree_max_area = rn_rules.rules.tree_max_area;
        if (given("--linear-min-elongation"))
            cfg.rules.linear_min_elongation = rn_rules.rules.linear_min_elongation;
        if (given("--seed")) cfg.split_seed = rn_seed;
        if (app.count("--workers")) cfg.workers = workers;
        cfg.validate();
        if (!rn_dump.empty()) write_text(rn_dump, config_to_json(cfg));
        const RunReport report = run_pipeline(cfg);
        std::size_t features = 0;
        for (const auto& t : report.tiles) features += t.features.size();
        print_result({{"output_dir", cfg.output_dir.string()},
                      {"tiles", report.tiles.size()},
                      {"features", features},
                      {"class_counts", counts_json(report.class_counts)}});
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const StageError& e) {
        std::cerr << json{{"error", "stage"},
                          {"stage", e.stage()},
                          {"cause", to_string(e.cause())},
                          {"message", e.what()},
                          {"completed_artifacts", e.completed_artifacts()}}
                         .dump()
                  << '\n';
    } catch (const ConstraintInfeasibleError& e) {
        std::cerr << json{{"error", to_string(e.kind())},
                          {"message", e.what()},
                          {"best_deviation_pp", e.best_deviation_pp()}}
                         .dump()
                  << '\n';
    } catch (const Error& e) {
        std::cerr << json{{"error", to_string(e.kind())}, {"message", e.what()}}.dump() << '\n';
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    }
    return 1;
}
