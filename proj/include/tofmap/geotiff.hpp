#pragma once

#include <filesystem>

#include "tofmap/raster.hpp"

namespace tofmap {

struct GeoTiffWriteOptions {
    bool deflate = true;
};

/// Reads a north-up GeoTIFF (stripped or tiled, chunky or planar; 8/16/32-bit
/// integer or 32/64-bit float samples). Georeferencing comes from
/// ModelPixelScale + ModelTiepoint or an axis-aligned ModelTransformation;
/// nodata from the GDAL_NODATA tag. 8-bit unsigned files load as UInt8, all
/// other sample formats as Float32.
RasterGrid read_geotiff(const std::filesystem::path& path);

/// Writes a chunky (pixel-interleaved) GeoTIFF with 8-bit unsigned or 32-bit
/// float samples according to `grid.type`. The first band's nodata value is
/// written as GDAL_NODATA.
void write_geotiff(const std::filesystem::path& path, const RasterGrid& grid,
                   const GeoTiffWriteOptions& options = {});

BinaryMask read_mask_geotiff(const std::filesystem::path& path);
void write_mask_geotiff(const std::filesystem::path& path, const BinaryMask& mask);

}  // namespace tofmap
