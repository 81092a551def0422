#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "tofmap/raster.hpp"
#include "tofmap/tof_classifier.hpp"

namespace tofmap {

/// Per-window class probabilities, pixel-major: probs[(r * width + c) * classes + k].
struct SoftmaxPatch {
    int row = 0;  // window origin in tile pixels
    int col = 0;
    int height = 0;
    int width = 0;
    int classes = kClassCount;
    std::vector<float> probs;

    float prob(int r, int c, int k) const noexcept {
        return probs[(static_cast<std::size_t>(r) * width + c) * classes + k];
    }
};

enum class VoteMode {
    Soft,  // average probabilities, then argmax
    Hard,  // count per-window argmax votes, then argmax
};

struct MergeResult {
    int height = 0;
    int width = 0;
    int classes = kClassCount;
    std::vector<std::uint8_t> labels;
    std::vector<double> mean;  // pixel-major like SoftmaxPatch::probs

    RasterGrid label_raster(const GeoTransform& transform) const;
    RasterGrid probability_raster(const GeoTransform& transform) const;
};

/// Running per-pixel class sums and window counts over a full tile.
class SoftmaxAccumulator {
public:
    SoftmaxAccumulator(int height, int width, int classes = kClassCount,
                       VoteMode mode = VoteMode::Soft);

    /// Adds a window. Throws BoundsError when it leaves the extent and
    /// ValidationError (naming the pixel) when a probability vector is outside
    /// [0,1] or does not sum to 1 within `tolerance`.
    void accumulate(const SoftmaxPatch& patch, double tolerance = 1e-3);

    /// Adds another accumulator over the same extent (reduction step).
    void merge(const SoftmaxAccumulator& other);

    /// Mean probabilities and argmax labels (ties go to the lowest class).
    /// Throws IncompleteCoverageError if any pixel was never covered.
    MergeResult finalize() const;

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int classes() const noexcept { return classes_; }
    VoteMode mode() const noexcept { return mode_; }
    const std::vector<double>& class_sums() const noexcept { return sums_; }
    const std::vector<std::uint32_t>& coverage() const noexcept { return coverage_; }

private:
    int height_;
    int width_;
    int classes_;
    VoteMode mode_;
    std::vector<double> sums_;
    std::vector<std::uint32_t> coverage_;
};

/// Number of windows covering each index along one axis.
std::vector<int> axis_coverage(int extent, int window, int stride);

/// Patch sidecar format: `<name>.tif` (float32, one band per class) next to
/// `<name>.json` holding {"origin": [row, col], "window": N}.
SoftmaxPatch read_softmax_patch(const std::filesystem::path& tif_path);
void write_softmax_patch(const std::filesystem::path& tif_path, const SoftmaxPatch& patch);

struct MergeOptions {
    int height = 0;
    int width = 0;
    std::optional<int> stride;  // when set, patch origins must form the full window grid
    VoteMode mode = VoteMode::Soft;
};

/// Reads every `*.tif` + sidecar in `dir` (sorted by file name) and merges them.
MergeResult merge_patch_directory(const std::filesystem::path& dir, const MergeOptions& options);

}  // namespace tofmap
