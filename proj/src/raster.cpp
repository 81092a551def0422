#include "tofmap/raster.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tofmap/errors.hpp"

namespace tofmap {

void GeoTransform::validate() const {
    if (!(pixel_size_x > 0.0) || !(pixel_size_y > 0.0)) {
        throw ParameterError("pixel sizes must be strictly positive (got " +
                             std::to_string(pixel_size_x) + ", " +
                             std::to_string(pixel_size_y) + ")");
    }
}

bool same_grid(const GeoTransform& a, const GeoTransform& b, double tol) {
    // origins compared in pixel units, with a few ulps of slack for large coordinates
    auto close = [tol](double u, double v, double pixel) {
        const double ulp = std::nextafter(std::max(std::abs(u), std::abs(v)), INFINITY) -
                           std::max(std::abs(u), std::abs(v));
        return std::abs(u - v) <= tol * std::abs(pixel) + 4 * ulp;
    };
    return close(a.origin_x, b.origin_x, a.pixel_size_x) && close(a.origin_y, b.origin_y, a.pixel_size_y) &&
           std::abs(a.pixel_size_x - b.pixel_size_x) <= tol &&
           std::abs(a.pixel_size_y - b.pixel_size_y) <= tol;
}

RasterGrid RasterGrid::create(int width, int height, int band_count, SampleType type,
                              const GeoTransform& transform, float fill) {
    if (width <= 0 || height <= 0) throw ParameterError("raster dimensions must be positive");
    if (band_count < 1) throw ParameterError("raster needs at least one band");
    transform.validate();
    RasterGrid g;
    g.width = width;
    g.height = height;
    g.type = type;
    g.transform = transform;
    g.bands.assign(static_cast<std::size_t>(band_count),
                   std::vector<float>(static_cast<std::size_t>(width) * height, fill));
    g.nodata.assign(static_cast<std::size_t>(band_count), std::nullopt);
    return g;
}

bool RasterGrid::is_nodata(int b, float value) const noexcept {
    if (std::isnan(value)) return true;
    const auto& nd = nodata[static_cast<std::size_t>(b)];
    return nd.has_value() && value == *nd;
}

void RasterGrid::validate() const {
    if (width <= 0 || height <= 0) throw ShapeError("raster dimensions must be positive");
    if (bands.empty()) throw ShapeError("raster has no bands");
    if (nodata.size() != bands.size()) throw ShapeError("nodata list does not match band count");
    for (const auto& b : bands) {
        if (b.size() != pixel_count()) throw ShapeError("band sample count != width*height");
    }
    transform.validate();
}

BinaryMask BinaryMask::create(int width, int height, const GeoTransform& transform, bool fill) {
    if (width <= 0 || height <= 0) throw ParameterError("mask dimensions must be positive");
    BinaryMask m;
    m.width = width;
    m.height = height;
    m.transform = transform;
    m.bits.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
    return m;
}

BinaryMask BinaryMask::like(const RasterGrid& grid, bool fill) {
    return create(grid.width, grid.height, grid.transform, fill);
}

std::size_t BinaryMask::count() const noexcept {
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(),
                                                  [](std::uint8_t b) { return b != 0; }));
}

bool BinaryMask::aligned_with(const RasterGrid& grid) const noexcept {
    return width == grid.width && height == grid.height && same_grid(transform, grid.transform);
}

RasterGrid compute_ndvi(const RasterGrid& grid, const BinaryMask& domain) {
    grid.validate();
    if (grid.band_count() < 4) {
        throw MissingBandError("NDVI needs Red and NIR bands (R,G,B,NIR); raster has " +
                               std::to_string(grid.band_count()) + " band(s)");
    }
    if (!domain.aligned_with(grid)) throw AlignmentError("NDVI domain mask is not aligned to imagery");

    RasterGrid out = RasterGrid::create(grid.width, grid.height, 1, SampleType::Float32,
                                        grid.transform, kNdviNodata);
    out.epsg = grid.epsg;
    out.nodata[0] = kNdviNodata;
    const auto red = grid.band(band::kRed);
    const auto nir = grid.band(band::kNir);
    auto dst = out.band(0);
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (!domain.bits[i]) continue;
        if (grid.is_nodata(band::kRed, red[i]) || grid.is_nodata(band::kNir, nir[i])) continue;
        const double r = red[i];
        const double n = nir[i];
        const double sum = n + r;
        dst[i] = sum == 0.0 ? 0.0f : static_cast<float>((n - r) / sum);
    }
    return out;
}

RasterGrid resample_nearest(const RasterGrid& grid, double target_pixel_size) {
    if (!(target_pixel_size > 0.0)) {
        throw ParameterError("target pixel size must be > 0 (got " +
                             std::to_string(target_pixel_size) + ")");
    }
    grid.validate();
    const GeoTransform& src = grid.transform;
    const double extent_x = grid.width * src.pixel_size_x;
    const double extent_y = grid.height * src.pixel_size_y;
    const int out_w = std::max(1, static_cast<int>(std::llround(extent_x / target_pixel_size)));
    const int out_h = std::max(1, static_cast<int>(std::llround(extent_y / target_pixel_size)));

    GeoTransform dst_t{src.origin_x, src.origin_y, target_pixel_size, target_pixel_size};
    RasterGrid out = RasterGrid::create(out_w, out_h, grid.band_count(), grid.type, dst_t);
    out.epsg = grid.epsg;
    out.nodata = grid.nodata;

    auto source_index = [](double centre, double step, int limit) {
        const auto i = static_cast<long long>(std::floor(centre / step));
        return static_cast<int>(std::clamp<long long>(i, 0, limit - 1));
    };
    std::vector<int> col_map(static_cast<std::size_t>(out_w));
    std::vector<int> row_map(static_cast<std::size_t>(out_h));
    for (int c = 0; c < out_w; ++c)
        col_map[c] = source_index((c + 0.5) * target_pixel_size, src.pixel_size_x, grid.width);
    for (int r = 0; r < out_h; ++r)
        row_map[r] = source_index((r + 0.5) * target_pixel_size, src.pixel_size_y, grid.height);

    for (int b = 0; b < grid.band_count(); ++b) {
        const auto in = grid.band(b);
        auto dst = out.band(b);
        for (int r = 0; r < out_h; ++r) {
            const std::size_t src_row = static_cast<std::size_t>(row_map[r]) * grid.width;
            const std::size_t dst_row = static_cast<std::size_t>(r) * out_w;
            for (int c = 0; c < out_w; ++c) dst[dst_row + c] = in[src_row + col_map[c]];
        }
    }
    return out;
}

RasterGrid make_label_raster(int width, int height, const GeoTransform& transform,
                             std::uint8_t fill) {
    return RasterGrid::create(width, height, 1, SampleType::UInt8, transform,
                              static_cast<float>(fill));
}

RasterGrid mask_to_raster(const BinaryMask& mask) {
    RasterGrid out = make_label_raster(mask.width, mask.height, mask.transform);
    auto dst = out.band(0);
    for (std::size_t i = 0; i < mask.bits.size(); ++i) dst[i] = mask.bits[i] ? 1.0f : 0.0f;
    return out;
}

BinaryMask raster_to_mask(const RasterGrid& grid) {
    grid.validate();
    if (grid.band_count() != 1) throw ShapeError("mask raster must be single-band");
    BinaryMask m = BinaryMask::like(grid);
    const auto src = grid.band(0);
    for (std::size_t i = 0; i < src.size(); ++i)
        m.bits[i] = (!grid.is_nodata(0, src[i]) && src[i] != 0.0f) ? 1 : 0;
    return m;
}

}  // namespace tofmap
