#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tofmap {

struct MapPoint {
    double x = 0.0;
    double y = 0.0;
};

struct PixelPoint {
    double col = 0.0;
    double row = 0.0;
};

/// North-up affine transform. (origin_x, origin_y) is the map position of the
/// top-left corner of pixel (0, 0); rows grow southward.
struct GeoTransform {
    double origin_x = 0.0;
    double origin_y = 0.0;
    double pixel_size_x = 1.0;
    double pixel_size_y = 1.0;

    /// Throws ParameterError unless both pixel sizes are strictly positive.
    void validate() const;

    MapPoint pixel_to_map(double col, double row) const noexcept {
        return {origin_x + col * pixel_size_x, origin_y - row * pixel_size_y};
    }
    PixelPoint map_to_pixel(double x, double y) const noexcept {
        return {(x - origin_x) / pixel_size_x, (origin_y - y) / pixel_size_y};
    }
    double pixel_area() const noexcept { return pixel_size_x * pixel_size_y; }

    bool operator==(const GeoTransform&) const = default;
};

/// Two transforms describe the same grid up to floating-point noise.
bool same_grid(const GeoTransform& a, const GeoTransform& b, double tol = 1e-9);

/// On-disk sample representation. Values are held as float in memory; every
/// 8-bit value is exactly representable.
enum class SampleType { UInt8, Float32 };

/// Imagery band order.
namespace band {
inline constexpr int kRed = 0;
inline constexpr int kGreen = 1;
inline constexpr int kBlue = 2;
inline constexpr int kNir = 3;
}  // namespace band

struct RasterGrid {
    int width = 0;
    int height = 0;
    SampleType type = SampleType::Float32;
    GeoTransform transform;
    int epsg = 0;  // 0: unknown
    std::vector<std::vector<float>> bands;
    std::vector<std::optional<float>> nodata;  // one entry per band

    static RasterGrid create(int width, int height, int band_count, SampleType type,
                             const GeoTransform& transform, float fill = 0.0f);

    int band_count() const noexcept { return static_cast<int>(bands.size()); }
    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(col);
    }

    std::span<float> band(int b) { return bands.at(static_cast<std::size_t>(b)); }
    std::span<const float> band(int b) const { return bands.at(static_cast<std::size_t>(b)); }

    float at(int b, int row, int col) const { return bands[b][index(row, col)]; }
    float& at(int b, int row, int col) { return bands[b][index(row, col)]; }

    /// NaN, or equal to the band's nodata sentinel.
    bool is_nodata(int b, float value) const noexcept;

    /// Checks sizes, transform and nodata arity; throws ShapeError/ParameterError.
    void validate() const;
};

/// Single-band boolean grid aligned to a RasterGrid. One byte per pixel.
struct BinaryMask {
    int width = 0;
    int height = 0;
    GeoTransform transform;
    std::vector<std::uint8_t> bits;

    static BinaryMask create(int width, int height, const GeoTransform& transform,
                             bool fill = false);
    static BinaryMask like(const RasterGrid& grid, bool fill = false);

    std::size_t pixel_count() const noexcept {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }
    std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(col);
    }
    bool at(int row, int col) const noexcept { return bits[index(row, col)] != 0; }
    void set(int row, int col, bool v) noexcept { bits[index(row, col)] = v ? 1 : 0; }
    std::size_t count() const noexcept;

    bool aligned_with(const RasterGrid& grid) const noexcept;
    bool operator==(const BinaryMask&) const = default;
};

inline constexpr float kNdviNodata = -9999.0f;

/// (NIR - Red) / (NIR + Red) inside `domain`, nodata elsewhere. A zero
/// denominator yields 0. Nodata in either input band propagates.
RasterGrid compute_ndvi(const RasterGrid& grid, const BinaryMask& domain);

/// Nearest-neighbour resampling onto a grid with square pixels of
/// `target_pixel_size` covering the same extent. Each output pixel takes the
/// value of the source pixel containing its centre.
RasterGrid resample_nearest(const RasterGrid& grid, double target_pixel_size);

/// Label raster helper: one UInt8 band filled with `fill`.
RasterGrid make_label_raster(int width, int height, const GeoTransform& transform,
                             std::uint8_t fill = 0);

/// Converts a mask to a UInt8 0/1 raster and back.
RasterGrid mask_to_raster(const BinaryMask& mask);
BinaryMask raster_to_mask(const RasterGrid& grid);

}  // namespace tofmap
