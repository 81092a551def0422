#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tofmap/raster.hpp"
#include "tofmap/tof_classifier.hpp"

namespace tofmap {

/// Pixel fraction per class code (Background, Forest, Patch, Linear, Tree).
using ClassFractions = std::array<double, kClassCount>;

/// Per-class pixel fractions of a label raster. Throws DataError on codes
/// outside 0..4 (nodata pixels included).
ClassFractions tile_distribution(const RasterGrid& labels);

struct TileManifest {
    std::string tile_id;
    std::string study_area;
    int width = 5000;
    int height = 5000;
    ClassFractions fractions{};

    double pixel_count() const noexcept { return static_cast<double>(width) * height; }
};

/// Pixel-weighted class fractions over a set of tiles.
ClassFractions aggregate_fractions(std::span<const TileManifest> tiles);
ClassFractions aggregate_fractions(std::span<const TileManifest> tiles,
                                   std::span<const std::size_t> subset);

/// Largest |subset - reference| over the four woody classes, in percentage points.
double max_woody_deviation_pp(const ClassFractions& subset, const ClassFractions& reference);

enum class SelectionScope {
    PerArea,  // each area's picks must match that area's fractions
    Global,   // the union of all picks must match the overall fractions
};

struct SplitOptions {
    int val_per_area = 5;
    int test_per_area = 5;
    int min_train_per_area = 5;
    double max_deviation_pp = 1.0;
    std::size_t max_attempts = 100000;
    SelectionScope scope = SelectionScope::PerArea;
};

struct SplitPlan {
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;
    std::uint64_t seed = 0;
    double achieved_max_deviation_pp = 0.0;

    bool operator==(const SplitPlan&) const = default;
};

/// Seeded random search for validation and test tiles per study area whose
/// class fractions each stay within `max_deviation_pp` of the reference
/// fractions. Remaining tiles become training tiles. Output lists follow the
/// manifest order. Throws ConstraintInfeasibleError when the attempt budget
/// runs out.
SplitPlan select_validation_test(std::span<const TileManifest> tiles, std::uint64_t seed,
                                 const SplitOptions& options = {});

/// Window offsets along one axis: 0, stride, 2*stride, ... while the window
/// fits, plus a final window flush with the far edge.
std::vector<int> window_origins(int extent, int window, int stride);

enum class Augmentation { Original, HorizontalFlip, VerticalFlip };
std::string_view augmentation_name(Augmentation a) noexcept;

struct PatchPair {
    int row = 0;  // window origin in tile pixels
    int col = 0;
    Augmentation augmentation = Augmentation::Original;
    RasterGrid image;
    RasterGrid labels;
};

struct PatchOptions {
    int window = 1024;
    int stride = 1024;
    bool augment = true;  // training split: add horizontal and vertical flips
};

RasterGrid crop(const RasterGrid& grid, int row, int col, int height, int width);
RasterGrid flip_horizontal(const RasterGrid& grid);
RasterGrid flip_vertical(const RasterGrid& grid);

/// Number of patches extract_patches_augmented emits for a tile.
std::size_t patch_count(int tile_width, int tile_height, const PatchOptions& options);

/// Streams every grid window of an image/label pair to `sink`, followed by its
/// flipped variants when `augment` is set. Image and labels are flipped
/// together.
void extract_patches_augmented(const RasterGrid& tile, const RasterGrid& labels,
                               const PatchOptions& options,
                               const std::function<void(const PatchPair&)>& sink);

struct AreaCombination {
    std::string name;
    std::vector<std::string> train_val_areas;
    std::string test_area;
};

/// Leave-one-area-out combinations, one per area in input order.
std::vector<AreaCombination> generalization_plan(std::span<const std::string> areas);

/// Restricts a tile-level plan to one combination: training and validation
/// tiles from the training areas, test tiles from the held-out area.
SplitPlan expand_combination(const AreaCombination& combination, const SplitPlan& base,
                             std::span<const TileManifest> tiles);

void write_manifest_csv(const std::filesystem::path& path, std::span<const TileManifest> tiles);
std::vector<TileManifest> read_manifest_csv(const std::filesystem::path& path);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const std::string& text);

}  // namespace tofmap
