#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tofmap/tof_classifier.hpp"

namespace tofmap {

struct GeoJsonWriteOptions {
    bool descriptors = true;  // area_m2, width_m, length_m, elongation
    bool classes = true;      // class (code) and class_name
    int epsg = 0;             // written as a legacy "crs" member when > 0
};

/// FeatureCollection with one Polygon feature per entry; coordinates in map
/// units.
std::string to_geojson(std::span<const TofFeature> features, const GeoJsonWriteOptions& options = {});
void write_geojson(const std::filesystem::path& path, std::span<const TofFeature> features,
                   const GeoJsonWriteOptions& options = {});

/// Reads Polygon and MultiPolygon features (each MultiPolygon part becomes
/// its own feature, id suffixed with ".<part>"). Rings are reoriented to
/// counterclockwise exteriors and clockwise holes, and closed if open.
/// Class and descriptors are loaded when present.
std::vector<TofFeature> from_geojson(const std::string& text);
std::vector<TofFeature> read_geojson(const std::filesystem::path& path);

}  // namespace tofmap
