#include "tofmap/geojson.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "tofmap/errors.hpp"

namespace tofmap {
namespace {

using nlohmann::json;

json ring_to_json(const Ring& ring) {
    json coords = json::array();
    for (const Point& p : ring) coords.push_back({p.x, p.y});
    return coords;
}

Ring ring_from_json(const json& coords, bool exterior) {
    Ring ring;
    for (const auto& c : coords) {
        if (!c.is_array() || c.size() < 2) throw DataError("GeoJSON position needs two numbers");
        ring.push_back({c[0].get<double>(), c[1].get<double>()});
    }
    if (!ring.empty() && !is_closed(ring)) ring.push_back(ring.front());
    const double a = signed_area(ring);
    if ((exterior && a < 0.0) || (!exterior && a > 0.0)) std::reverse(ring.begin(), ring.end());
    return ring;
}

PolygonGeom polygon_from_json(const json& rings) {
    if (!rings.is_array() || rings.empty()) throw DataError("GeoJSON polygon without rings");
    PolygonGeom poly;
    poly.exterior = ring_from_json(rings[0], true);
    for (std::size_t i = 1; i < rings.size(); ++i) poly.holes.push_back(ring_from_json(rings[i], false));
    return poly;
}

}  // namespace

std::string to_geojson(std::span<const TofFeature> features, const GeoJsonWriteOptions& options) {
    json fc = {{"type", "FeatureCollection"}, {"features", json::array()}};
    if (options.epsg > 0) {
        fc["crs"] = {{"type", "name"},
                     {"properties", {{"name", "urn:ogc:def:crs:EPSG::" + std::to_string(options.epsg)}}}};
    }
    for (const auto& f : features) {
        json rings = json::array();
        rings.push_back(ring_to_json(f.geometry.exterior));
        for (const auto& h : f.geometry.holes) rings.push_back(ring_to_json(h));
        json props = {{"id", f.id}};
        if (options.descriptors) {
            props["area_m2"] = f.descriptors.area;
            props["width_m"] = f.descriptors.rect_width;
            props["length_m"] = f.descriptors.rect_length;
            props["elongation"] = f.descriptors.elongation;
        }
        if (options.classes) {
            props["class"] = code(f.tof_class);
            props["class_name"] = std::string(class_name(f.tof_class));
        }
        fc["features"].push_back({{"type", "Feature"},
                                  {"id", f.id},
                                  {"properties", props},
                                  {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}});
    }
    return fc.dump();
}

void write_geojson(const std::filesystem::path& path, std::span<const TofFeature> features,
                   const GeoJsonWriteOptions& options) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << to_geojson(features, options) << '\n';
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::vector<TofFeature> from_geojson(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("invalid GeoJSON: ") + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
        throw DataError("GeoJSON root must be a FeatureCollection");
    }
    std::vector<TofFeature> out;
    std::size_t index = 0;
    for (const auto& feat : doc["features"]) {
        const json& props = feat.contains("properties") && feat["properties"].is_object()
                                ? feat["properties"]
                                : json::object();
        std::string id;
        if (props.contains("id")) {
            id = props["id"].is_string() ? props["id"].get<std::string>() : props["id"].dump();
        } else if (feat.contains("id")) {
            id = feat["id"].is_string() ? feat["id"].get<std::string>() : feat["id"].dump();
        } else {
            id = std::to_string(index);
        }
        ++index;

        TofFeature base;
        base.id = id;
        if (props.contains("area_m2")) base.descriptors.area = props["area_m2"].get<double>();
        if (props.contains("width_m")) base.descriptors.rect_width = props["width_m"].get<double>();
        if (props.contains("length_m")) base.descriptors.rect_length = props["length_m"].get<double>();
        if (props.contains("elongation")) base.descriptors.elongation = props["elongation"].get<double>();
        if (props.contains("class") && props["class"].is_number_integer()) {
            const auto c = class_from_code(props["class"].get<int>());
            if (!c) throw DataError("feature '" + id + "' has an unknown class code");
            base.tof_class = *c;
        }

        if (!feat.contains("geometry") || feat["geometry"].is_null()) continue;
        const json& geom = feat["geometry"];
        const std::string type = geom.value("type", "");
        if (type == "Polygon") {
            base.geometry = polygon_from_json(geom["coordinates"]);
            out.push_back(std::move(base));
        } else if (type == "MultiPolygon") {
            std::size_t part = 0;
            for (const auto& rings : geom["coordinates"]) {
                TofFeature f = base;
                f.id = id + "." + std::to_string(part++);
                f.geometry = polygon_from_json(rings);
                out.push_back(std::move(f));
            }
        } else {
            throw DataError("feature '" + id + "': unsupported geometry type '" + type + "'");
        }
    }
    return out;
}

std::vector<TofFeature> read_geojson(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_geojson(ss.str());
}

}  // namespace tofmap
