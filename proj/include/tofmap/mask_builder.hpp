#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tofmap/raster.hpp"

namespace tofmap {

struct WindowSize {
    int width = 5;
    int height = 5;
    bool operator==(const WindowSize&) const = default;
};

struct MaskParams {
    double height_threshold = 3.0;  // metres, inclusive
    int kmeans_k = 2;
    WindowSize closing_window{5, 5};
    int kmeans_max_iter = 100;
    double kmeans_tol = 1e-6;

    /// Throws ParameterError when a field is out of range.
    void validate() const;
    bool operator==(const MaskParams&) const = default;
};

struct KMeansResult {
    std::array<double, 2> centers{};
    /// Cluster index per in-mask pixel, in row-major order of the mask.
    std::vector<std::uint8_t> assignment;
    int vegetation_cluster = 1;
    int iterations = 0;
    /// Within-cluster sum of squares after each update step.
    std::vector<double> objective_trace;

    /// Values strictly above this go to the upper cluster.
    double threshold() const noexcept { return 0.5 * (centers[0] + centers[1]); }
};

/// True where nDSM >= height_threshold and the sample is valid.
BinaryMask build_height_mask(const RasterGrid& ndsm, const MaskParams& params);

/// Two-cluster Lloyd iteration on a 1-D sample. Centers are returned in
/// ascending order, so the vegetation cluster is always index 1. Initial
/// centers sit at the 10th and 90th percentile (min/max if those coincide).
/// Throws DegenerateInputError for fewer than two distinct values.
KMeansResult kmeans_1d_two_clusters(std::span<const float> values, const MaskParams& params);

/// Runs kmeans_1d_two_clusters on the NDVI values inside `mask`.
KMeansResult split_ndvi_kmeans(const RasterGrid& ndvi, const BinaryMask& mask,
                               const MaskParams& params);

/// Pools the in-mask NDVI of several tiles into one fit (study-area scope).
KMeansResult split_ndvi_kmeans_pooled(std::span<const RasterGrid* const> ndvi,
                                      std::span<const BinaryMask* const> masks,
                                      const MaskParams& params);

/// Rectangular dilation / erosion with outside-image pixels read as false.
BinaryMask dilate(const BinaryMask& mask, WindowSize window);
BinaryMask erode(const BinaryMask& mask, WindowSize window);

/// Closing with a rectangular structuring element, evaluated as if the mask
/// were embedded in an unbounded false background: the dilation is allowed to
/// spill past the image border before eroding, then the result is cropped.
/// Extensive and idempotent, including at the border.
BinaryMask morphological_close(const BinaryMask& mask, WindowSize window);

/// Per-pixel view of the stages of build_woody_mask, mainly for diagnostics.
struct WoodyMaskResult {
    BinaryMask height_mask;
    BinaryMask vegetation;  // vegetation cluster before closing
    BinaryMask woody;       // final mask
    std::optional<KMeansResult> kmeans;
    bool degenerate_ndvi = false;
};

/// height mask -> NDVI inside it -> 2-means split -> vegetation cluster -> closing.
/// `shared_split`, when given, replaces the per-tile fit (study-area scope).
WoodyMaskResult build_woody_mask_detailed(const RasterGrid& ndsm, const RasterGrid& dop,
                                          const MaskParams& params,
                                          const KMeansResult* shared_split = nullptr);

BinaryMask build_woody_mask(const RasterGrid& ndsm, const RasterGrid& dop,
                            const MaskParams& params);

}  // namespace tofmap
