#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tofmap/mask_builder.hpp"
#include "tofmap/tof_classifier.hpp"
#include "tofmap/vectorizer.hpp"

namespace tofmap {

enum class KMeansScope {
    Tile,  // one NDVI split per tile
    Area,  // one split fitted on all tiles of the run
};

struct TileInput {
    std::string id;
    std::filesystem::path ndsm;
    std::filesystem::path dop;
    bool operator==(const TileInput&) const = default;
};

struct PipelineConfig {
    std::vector<TileInput> tiles;
    std::filesystem::path labels;   // ground-truth label raster or directory (eval)
    std::filesystem::path patches;  // patch directory (extract-patches / merge)
    std::filesystem::path output_dir = "out";

    MaskParams mask;
    double dp_tolerance = 0.4;   // metres
    double min_hole_area = 1.0;  // m²
    ClassifierRules rules;
    KMeansScope kmeans_scope = KMeansScope::Area;

    std::uint64_t split_seed = 42;
    int window = 1024;
    int stride = 128;
    int workers = 0;  // 0: TOFMAP_THREADS or hardware concurrency

    /// Range checks only; throws ConfigError.
    void validate() const;
    /// validate() plus existence of every tile input; throws ConfigError.
    void validate_inputs() const;

    bool operator==(const PipelineConfig&) const = default;
};

std::string config_to_json(const PipelineConfig& config);
/// Fields missing from `text` keep their value from `base`.
PipelineConfig config_from_json(const std::string& text, const PipelineConfig& base = {});
PipelineConfig load_config(const std::filesystem::path& path, const PipelineConfig& base = {});

/// Burns features into a UInt8 label raster: a pixel takes the class of the
/// (last) polygon containing its centre, Background otherwise.
RasterGrid rasterize_features(std::span<const TofFeature> features, int width, int height,
                              const GeoTransform& transform);

struct StageTiming {
    std::string stage;
    double milliseconds = 0.0;
};

struct TileRun {
    std::string id;
    BinaryMask mask;
    std::vector<TofFeature> features;
    RasterGrid labels;
    std::optional<KMeansResult> kmeans;
    std::vector<StageTiming> timings;
    std::array<std::size_t, kClassCount> class_counts{};
};

/// build-mask -> vectorize -> descriptors -> classify -> rasterize on
/// in-memory rasters. Stage failures surface as StageError.
TileRun process_tile(const std::string& id, const RasterGrid& ndsm, const RasterGrid& dop,
                     const PipelineConfig& config, const KMeansResult* shared_split = nullptr);

struct RunReport {
    std::vector<TileRun> tiles;  // rasters dropped after writing, features kept
    std::vector<std::string> artifacts;
    std::array<std::size_t, kClassCount> class_counts{};
    std::optional<KMeansResult> area_split;

    std::string to_json() const;
};

/// Runs every tile of `config` and writes, per tile, `<id>_mask.tif`,
/// `<id>_tof.geojson` and `<id>_labels.tif` plus `run_report.json` under
/// output_dir. Inputs are checked before any compute.
RunReport run_pipeline(const PipelineConfig& config);

}  // namespace tofmap
