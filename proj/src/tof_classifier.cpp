#include "tofmap/tof_classifier.hpp"

#include "tofmap/errors.hpp"

namespace tofmap {

std::string_view class_name(TofClass c) noexcept {
    switch (c) {
        case TofClass::Background: return "Background";
        case TofClass::Forest: return "Forest";
        case TofClass::Patch: return "Patch";
        case TofClass::Linear: return "Linear";
        case TofClass::Tree: return "Tree";
    }
    return "Unknown";
}

std::optional<TofClass> class_from_code(int code) noexcept {
    if (code < 0 || code >= kClassCount) return std::nullopt;
    return static_cast<TofClass>(code);
}

std::optional<TofClass> class_from_name(std::string_view name) noexcept {
    for (int c = 0; c < kClassCount; ++c) {
        if (class_name(static_cast<TofClass>(c)) == name) return static_cast<TofClass>(c);
    }
    return std::nullopt;
}

TofClass classify_feature(const ShapeDescriptors& d, const ClassifierRules& rules) {
    if (d.rect_width > rules.forest_min_width && d.area > rules.forest_min_area) {
        return TofClass::Forest;
    }
    const bool small = d.area < rules.tree_max_area;
    const bool elongated = d.elongation > rules.linear_min_elongation;
    if (rules.linear_first) {
        if (elongated) return TofClass::Linear;
        if (small) return TofClass::Tree;
    } else {
        if (small) return TofClass::Tree;
        if (elongated) return TofClass::Linear;
    }
    return TofClass::Patch;
}

ClassifiedLayer classify_layer(std::vector<TofFeature> features, const ClassifierRules& rules) {
    ClassifiedLayer layer;
    for (auto& f : features) {
        try {
            f.descriptors = shape_descriptors(f.geometry);
        } catch (const DegenerateGeometryError& e) {
            throw DegenerateGeometryError("feature '" + f.id + "': " + e.what());
        }
        f.tof_class = classify_feature(f.descriptors, rules);
        ++layer.counts[static_cast<std::size_t>(f.tof_class)];
    }
    layer.features = std::move(features);
    return layer;
}

}  // namespace tofmap
