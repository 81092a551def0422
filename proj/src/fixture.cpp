#include "tofmap/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <json.hpp>

#include "tofmap/errors.hpp"

namespace tofmap {

ShapeDescriptors analytic_descriptors(const SceneShape& shape) {
    ShapeDescriptors d;
    if (shape.kind == ShapeKind::Disk) {
        d.area = std::numbers::pi * shape.radius * shape.radius;
        d.rect_length = d.rect_width = 2.0 * shape.radius;
    } else {
        d.area = shape.length * shape.width;
        d.rect_length = std::max(shape.length, shape.width);
        d.rect_width = std::min(shape.length, shape.width);
        d.rect_angle = shape.angle_deg;
    }
    d.elongation = d.rect_width > 0.0 ? d.rect_length / d.rect_width : 0.0;
    return d;
}

namespace {

bool contains(const SceneShape& s, double x, double y) {
    const double dx = x - s.cx;
    const double dy = y - s.cy;
    if (s.kind == ShapeKind::Disk) return dx * dx + dy * dy <= s.radius * s.radius;
    // Scene y points south; rotate counterclockwise in map orientation.
    const double a = s.angle_deg * std::numbers::pi / 180.0;
    const double u = dx * std::cos(a) - dy * std::sin(a);
    const double v = dx * std::sin(a) + dy * std::cos(a);
    return std::abs(u) <= 0.5 * s.length && std::abs(v) <= 0.5 * s.width;
}

void validate_shape(const SceneShape& s) {
    if (s.kind == ShapeKind::Disk ? !(s.radius > 0.0) : !(s.length > 0.0 && s.width > 0.0)) {
        throw ParameterError("shape '" + s.name + "' has non-positive size");
    }
    if (s.ndvi < -1.0 || s.ndvi > 1.0) throw ParameterError("shape '" + s.name + "' NDVI outside [-1,1]");
}

// 8-bit Red/NIR pair with the requested NDVI at a fixed brightness.
std::pair<float, float> red_nir_for(double ndvi) {
    constexpr double kSum = 200.0;
    ndvi = std::clamp(ndvi, -1.0, 1.0);
    return {static_cast<float>(std::lround(kSum * (1.0 - ndvi) / 2.0)),
            static_cast<float>(std::lround(kSum * (1.0 + ndvi) / 2.0))};
}

}  // namespace

Fixture generate_fixture(const SceneSpec& spec, std::uint64_t seed, const ClassifierRules& rules) {
    if (spec.width < 1 || spec.height < 1 || !(spec.pixel_size > 0.0)) {
        throw ParameterError("scene needs positive dimensions and pixel size");
    }
    const double extent_x = spec.width * spec.pixel_size;
    const double extent_y = spec.height * spec.pixel_size;
    for (const auto& s : spec.shapes) {
        validate_shape(s);
        if (s.cx < 0.0 || s.cy < 0.0 || s.cx > extent_x || s.cy > extent_y) {
            throw ParameterError("shape '" + s.name + "' centre lies outside the scene");
        }
    }

    const GeoTransform t{spec.origin_x, spec.origin_y, spec.pixel_size, spec.pixel_size};
    Fixture f;
    f.ndsm = RasterGrid::create(spec.width, spec.height, 1, SampleType::Float32, t,
                                static_cast<float>(spec.ground_height));
    f.dop = RasterGrid::create(spec.width, spec.height, 4, SampleType::UInt8, t);
    f.labels = make_label_raster(spec.width, spec.height, t);

    std::vector<int> owner(f.labels.pixel_count(), -1);
    for (const auto& s : spec.shapes) {
        f.shape_classes.push_back(s.woody ? classify_feature(analytic_descriptors(s), rules)
                                          : TofClass::Background);
    }
    std::vector<std::size_t> overlaps(spec.shapes.size(), 0);
    for (int r = 0; r < spec.height; ++r) {
        const double y = (r + 0.5) * spec.pixel_size;
        for (int c = 0; c < spec.width; ++c) {
            const double x = (c + 0.5) * spec.pixel_size;
            const std::size_t i = f.labels.index(r, c);
            for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
                if (!contains(spec.shapes[k], x, y)) continue;
                if (owner[i] >= 0) ++overlaps[k];
                owner[i] = static_cast<int>(k);
            }
        }
    }
    for (std::size_t k = 0; k < spec.shapes.size(); ++k) {
        if (overlaps[k] > 0) {
            f.notes.push_back("shape '" + spec.shapes[k].name + "' paints over " +
                              std::to_string(overlaps[k]) + " pixel(s) of earlier shapes");
        }
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> ndvi_noise(0.0, spec.ndvi_noise > 0.0 ? spec.ndvi_noise : 1.0);
    std::normal_distribution<double> height_noise(0.0, spec.height_noise > 0.0 ? spec.height_noise : 1.0);
    for (std::size_t i = 0; i < owner.size(); ++i) {
        const SceneShape* s = owner[i] >= 0 ? &spec.shapes[static_cast<std::size_t>(owner[i])] : nullptr;
        double ndvi = s ? s->ndvi : spec.ground_ndvi;
        double h = s ? spec.ground_height + s->height : spec.ground_height;
        if (spec.ndvi_noise > 0.0) ndvi += ndvi_noise(rng);
        if (spec.height_noise > 0.0) h += height_noise(rng);
        const auto [red, nir] = red_nir_for(ndvi);
        f.dop.bands[band::kRed][i] = red;
        f.dop.bands[band::kGreen][i] = std::min(255.0f, red + 30.0f);
        f.dop.bands[band::kBlue][i] = std::max(0.0f, red - 10.0f);
        f.dop.bands[band::kNir][i] = nir;
        f.ndsm.bands[0][i] = static_cast<float>(h);
        if (s && s->woody) {
            f.labels.bands[0][i] = static_cast<float>(
                code(f.shape_classes[static_cast<std::size_t>(owner[i])]));
        }
    }
    return f;
}

SceneSpec four_class_scene(double ndvi_noise) {
    SceneSpec s;
    s.width = 1000;
    s.height = 1000;
    s.pixel_size = 0.2;
    s.origin_x = 560000.0;
    s.origin_y = 5930000.0;
    s.ndvi_noise = ndvi_noise;
    // forest: 80 m x 80 m block; hedgerow: 90 m x 6 m; grove: 40 m x 30 m;
    // crown: 12 m radius; building: 20 m x 15 m roof with NDVI 0.
    s.shapes = {
        {"forest", ShapeKind::Rect, 50.0, 50.0, 80.0, 80.0, 0.0, 0.0, 18.0, 0.8, true},
        {"hedgerow", ShapeKind::Rect, 145.0, 23.0, 90.0, 6.0, 0.0, 0.0, 6.0, 0.75, true},
        {"grove", ShapeKind::Rect, 140.0, 75.0, 40.0, 30.0, 0.0, 0.0, 10.0, 0.8, true},
        {"tree", ShapeKind::Disk, 50.0, 150.0, 0.0, 0.0, 12.0, 0.0, 12.0, 0.8, true},
        {"building", ShapeKind::Rect, 140.0, 150.0, 20.0, 15.0, 0.0, 0.0, 7.0, 0.0, false},
    };
    return s;
}

std::string scene_to_json(const SceneSpec& spec) {
    nlohmann::json shapes = nlohmann::json::array();
    for (const auto& s : spec.shapes) {
        shapes.push_back({{"name", s.name},
                          {"kind", s.kind == ShapeKind::Disk ? "disk" : "rect"},
                          {"cx", s.cx},
                          {"cy", s.cy},
                          {"length", s.length},
                          {"width", s.width},
                          {"radius", s.radius},
                          {"angle_deg", s.angle_deg},
                          {"height", s.height},
                          {"ndvi", s.ndvi},
                          {"woody", s.woody}});
    }
    nlohmann::json j = {{"width", spec.width},
                        {"height", spec.height},
                        {"pixel_size", spec.pixel_size},
                        {"origin_x", spec.origin_x},
                        {"origin_y", spec.origin_y},
                        {"ground_height", spec.ground_height},
                        {"ground_ndvi", spec.ground_ndvi},
                        {"ndvi_noise", spec.ndvi_noise},
                        {"height_noise", spec.height_noise},
                        {"shapes", shapes}};
    return j.dump(2);
}

SceneSpec scene_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        SceneSpec s;
        s.width = j.value("width", s.width);
        s.height = j.value("height", s.height);
        s.pixel_size = j.value("pixel_size", s.pixel_size);
        s.origin_x = j.value("origin_x", s.origin_x);
        s.origin_y = j.value("origin_y", s.origin_y);
        s.ground_height = j.value("ground_height", s.ground_height);
        s.ground_ndvi = j.value("ground_ndvi", s.ground_ndvi);
        s.ndvi_noise = j.value("ndvi_noise", s.ndvi_noise);
        s.height_noise = j.value("height_noise", s.height_noise);
        for (const auto& js : j.value("shapes", nlohmann::json::array())) {
            SceneShape sh;
            sh.name = js.value("name", "");
            const std::string kind = js.value("kind", "rect");
            if (kind != "rect" && kind != "disk") throw ParameterError("unknown shape kind '" + kind + "'");
            sh.kind = kind == "disk" ? ShapeKind::Disk : ShapeKind::Rect;
            sh.cx = js.value("cx", 0.0);
            sh.cy = js.value("cy", 0.0);
            sh.length = js.value("length", 0.0);
            sh.width = js.value("width", 0.0);
            sh.radius = js.value("radius", 0.0);
            sh.angle_deg = js.value("angle_deg", 0.0);
            sh.height = js.value("height", sh.height);
            sh.ndvi = js.value("ndvi", sh.ndvi);
            sh.woody = js.value("woody", true);
            s.shapes.push_back(std::move(sh));
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid scene description: ") + e.what());
    }
}

}  // namespace tofmap
