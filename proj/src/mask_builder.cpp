#include "tofmap/mask_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tofmap/errors.hpp"

namespace tofmap {

void MaskParams::validate() const {
    if (!(height_threshold > 0.0)) throw ParameterError("height_threshold must be > 0");
    if (kmeans_k != 2) throw ParameterError("only k = 2 is supported for the NDVI split");
    if (closing_window.width < 1 || closing_window.height < 1 ||
        closing_window.width % 2 == 0 || closing_window.height % 2 == 0) {
        throw ParameterError("closing window must be odd in both dimensions (got " +
                             std::to_string(closing_window.width) + "x" +
                             std::to_string(closing_window.height) + ")");
    }
    if (kmeans_max_iter < 1) throw ParameterError("kmeans_max_iter must be >= 1");
    if (!(kmeans_tol >= 0.0)) throw ParameterError("kmeans_tol must be >= 0");
}

BinaryMask build_height_mask(const RasterGrid& ndsm, const MaskParams& params) {
    params.validate();
    ndsm.validate();
    if (ndsm.band_count() != 1) {
        throw ShapeError("nDSM must be single-band (got " + std::to_string(ndsm.band_count()) +
                         " bands)");
    }
    BinaryMask mask = BinaryMask::like(ndsm);
    const auto h = ndsm.band(0);
    const auto threshold = params.height_threshold;
    for (std::size_t i = 0; i < h.size(); ++i) {
        mask.bits[i] = (!ndsm.is_nodata(0, h[i]) && h[i] >= threshold) ? 1 : 0;
    }
    return mask;
}

KMeansResult kmeans_1d_two_clusters(std::span<const float> values, const MaskParams& params) {
    params.validate();
    std::vector<double> sorted;
    sorted.reserve(values.size());
    for (float v : values)
        if (std::isfinite(v)) sorted.push_back(v);
    std::sort(sorted.begin(), sorted.end());
    if (sorted.empty() || sorted.front() == sorted.back()) {
        throw DegenerateInputError("2-means needs at least two distinct values (got " +
                                   std::to_string(sorted.size()) + " sample(s), " +
                                   (sorted.empty() ? "none" : "all equal") + ")");
    }
    const std::size_t n = sorted.size();

    std::vector<long double> sum(n + 1, 0.0L), sum_sq(n + 1, 0.0L);
    for (std::size_t i = 0; i < n; ++i) {
        sum[i + 1] = sum[i] + sorted[i];
        sum_sq[i + 1] = sum_sq[i] + static_cast<long double>(sorted[i]) * sorted[i];
    }
    auto range_mean = [&](std::size_t a, std::size_t b) {
        return static_cast<double>((sum[b] - sum[a]) / static_cast<long double>(b - a));
    };
    auto range_sse = [&](std::size_t a, std::size_t b) {
        const long double s = sum[b] - sum[a];
        return static_cast<double>(sum_sq[b] - sum_sq[a] - s * s / static_cast<long double>(b - a));
    };

    auto percentile = [&](double p) {
        return sorted[static_cast<std::size_t>(std::llround(p * static_cast<double>(n - 1)))];
    };
    KMeansResult result;
    double lo = percentile(0.10);
    double hi = percentile(0.90);
    if (lo == hi) {
        lo = sorted.front();
        hi = sorted.back();
    }

    for (int iter = 0; iter < params.kmeans_max_iter; ++iter) {
        const double t = 0.5 * (lo + hi);
        auto split = static_cast<std::size_t>(
            std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
        split = std::clamp<std::size_t>(split, 1, n - 1);
        const double new_lo = range_mean(0, split);
        const double new_hi = range_mean(split, n);
        result.objective_trace.push_back(range_sse(0, split) + range_sse(split, n));
        const double movement = std::max(std::abs(new_lo - lo), std::abs(new_hi - hi));
        lo = new_lo;
        hi = new_hi;
        result.iterations = iter + 1;
        if (movement < params.kmeans_tol) break;
    }

    result.centers = {lo, hi};
    result.vegetation_cluster = 1;
    const double t = result.threshold();
    result.assignment.reserve(values.size());
    for (float v : values) result.assignment.push_back(std::isfinite(v) && v > t ? 1 : 0);
    return result;
}

namespace {

std::vector<float> in_mask_values(const RasterGrid& ndvi, const BinaryMask& mask) {
    ndvi.validate();
    if (ndvi.band_count() != 1) throw ShapeError("NDVI raster must be single-band");
    if (!mask.aligned_with(ndvi)) throw AlignmentError("mask is not aligned to NDVI raster");
    std::vector<float> out;
    const auto v = ndvi.band(0);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!mask.bits[i]) continue;
        out.push_back(ndvi.is_nodata(0, v[i]) ? std::numeric_limits<float>::quiet_NaN() : v[i]);
    }
    return out;
}

}  // namespace

KMeansResult split_ndvi_kmeans(const RasterGrid& ndvi, const BinaryMask& mask,
                               const MaskParams& params) {
    const std::vector<float> values = in_mask_values(ndvi, mask);
    return kmeans_1d_two_clusters(values, params);
}

KMeansResult split_ndvi_kmeans_pooled(std::span<const RasterGrid* const> ndvi,
                                      std::span<const BinaryMask* const> masks,
                                      const MaskParams& params) {
    if (ndvi.size() != masks.size()) throw ParameterError("NDVI/mask list length mismatch");
    std::vector<float> pooled;
    for (std::size_t i = 0; i < ndvi.size(); ++i) {
        const auto v = in_mask_values(*ndvi[i], *masks[i]);
        pooled.insert(pooled.end(), v.begin(), v.end());
    }
    return kmeans_1d_two_clusters(pooled, params);
}

namespace {

void check_window(WindowSize w) {
    if (w.width < 1 || w.height < 1 || w.width % 2 == 0 || w.height % 2 == 0) {
        throw ParameterError("structuring element must be odd in both dimensions (got " +
                             std::to_string(w.width) + "x" + std::to_string(w.height) + ")");
    }
}

// One separable pass. For every pixel counts set pixels within `radius` along
// the axis (outside = unset) and keeps the pixel if the count satisfies `keep`.
template <typename Keep>
std::vector<std::uint8_t> axis_pass(const std::vector<std::uint8_t>& src, int width, int height,
                                    int radius, bool horizontal, Keep keep) {
    std::vector<std::uint8_t> dst(src.size(), 0);
    const int lines = horizontal ? height : width;
    const int len = horizontal ? width : height;
    const std::size_t step = horizontal ? 1 : static_cast<std::size_t>(width);
    std::vector<int> prefix(static_cast<std::size_t>(len) + 1);
    for (int line = 0; line < lines; ++line) {
        const std::size_t base =
            horizontal ? static_cast<std::size_t>(line) * width : static_cast<std::size_t>(line);
        for (int i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + (src[base + i * step] ? 1 : 0);
        for (int i = 0; i < len; ++i) {
            const int a = std::max(0, i - radius);
            const int b = std::min(len, i + radius + 1);
            dst[base + i * step] = keep(prefix[b] - prefix[a]) ? 1 : 0;
        }
    }
    return dst;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, WindowSize window) {
    check_window(window);
    const int rx = window.width / 2, ry = window.height / 2;
    auto any = [](int count) { return count > 0; };
    BinaryMask out = mask;
    out.bits = axis_pass(axis_pass(mask.bits, mask.width, mask.height, rx, true, any), mask.width,
                         mask.height, ry, false, any);
    return out;
}

BinaryMask erode(const BinaryMask& mask, WindowSize window) {
    check_window(window);
    const int rx = window.width / 2, ry = window.height / 2;
    const int full_x = window.width, full_y = window.height;
    BinaryMask out = mask;
    out.bits = axis_pass(
        axis_pass(mask.bits, mask.width, mask.height, rx, true,
                  [full_x](int c) { return c == full_x; }),
        mask.width, mask.height, ry, false, [full_y](int c) { return c == full_y; });
    return out;
}

BinaryMask morphological_close(const BinaryMask& mask, WindowSize window) {
    check_window(window);
    const int rx = window.width / 2, ry = window.height / 2;
    BinaryMask padded;
    padded.width = mask.width + 2 * rx;
    padded.height = mask.height + 2 * ry;
    padded.transform = mask.transform;
    padded.bits.assign(padded.pixel_count(), 0);
    for (int r = 0; r < mask.height; ++r) {
        std::copy_n(mask.bits.begin() + static_cast<std::ptrdiff_t>(mask.index(r, 0)), mask.width,
                    padded.bits.begin() + static_cast<std::ptrdiff_t>(padded.index(r + ry, rx)));
    }
    const BinaryMask closed = erode(dilate(padded, window), window);
    BinaryMask out = mask;
    for (int r = 0; r < mask.height; ++r) {
        std::copy_n(closed.bits.begin() + static_cast<std::ptrdiff_t>(closed.index(r + ry, rx)),
                    mask.width, out.bits.begin() + static_cast<std::ptrdiff_t>(out.index(r, 0)));
    }
    return out;
}

WoodyMaskResult build_woody_mask_detailed(const RasterGrid& ndsm, const RasterGrid& dop,
                                          const MaskParams& params,
                                          const KMeansResult* shared_split) {
    params.validate();
    dop.validate();
    if (ndsm.width != dop.width || ndsm.height != dop.height ||
        !same_grid(ndsm.transform, dop.transform, 1e-6)) {
        throw AlignmentError("nDSM and DOP are not co-registered (" +
                             std::to_string(ndsm.width) + "x" + std::to_string(ndsm.height) +
                             " vs " + std::to_string(dop.width) + "x" +
                             std::to_string(dop.height) + ")");
    }

    WoodyMaskResult res{build_height_mask(ndsm, params), BinaryMask::like(dop),
                        BinaryMask::like(dop), std::nullopt, false};
    if (res.height_mask.count() == 0) return res;

    const RasterGrid ndvi = compute_ndvi(dop, res.height_mask);
    const auto v = ndvi.band(0);
    double threshold = 0.0;
    if (shared_split) {
        res.kmeans = *shared_split;
        threshold = shared_split->threshold();
    } else {
        try {
            res.kmeans = split_ndvi_kmeans(ndvi, res.height_mask, params);
            threshold = res.kmeans->threshold();
        } catch (const DegenerateInputError&) {
            // single NDVI level: the whole group counts as vegetation iff it is green
            res.degenerate_ndvi = true;
            threshold = 0.0;
        }
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
        res.vegetation.bits[i] =
            (res.height_mask.bits[i] && !ndvi.is_nodata(0, v[i]) && v[i] > threshold) ? 1 : 0;
    }
    res.woody = morphological_close(res.vegetation, params.closing_window);
    return res;
}

BinaryMask build_woody_mask(const RasterGrid& ndsm, const RasterGrid& dop,
                            const MaskParams& params) {
    return build_woody_mask_detailed(ndsm, dop, params).woody;
}

}  // namespace tofmap
