#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tofmap/geometry.hpp"

namespace tofmap {

enum class TofClass : std::uint8_t {
    Background = 0,
    Forest = 1,
    Patch = 2,
    Linear = 3,
    Tree = 4,
};

inline constexpr int kClassCount = 5;
inline constexpr std::array<TofClass, 4> kWoodyClasses = {TofClass::Forest, TofClass::Patch,
                                                          TofClass::Linear, TofClass::Tree};

std::string_view class_name(TofClass c) noexcept;
std::optional<TofClass> class_from_code(int code) noexcept;
std::optional<TofClass> class_from_name(std::string_view name) noexcept;
constexpr int code(TofClass c) noexcept { return static_cast<int>(c); }

struct ClassifierRules {
    double forest_min_width = 20.0;   // m, strict
    double forest_min_area = 5000.0;  // m², strict
    double tree_max_area = 500.0;     // m², strict
    double linear_min_elongation = 3.0;  // strict
    /// Evaluate the elongation rule before the small-area rule.
    bool linear_first = false;

    bool operator==(const ClassifierRules&) const = default;
};

/// First match wins:
///   width > 20 m and area > 5000 m²  -> Forest
///   area < 500 m²                    -> Tree
///   elongation > 3                   -> Linear
///   otherwise                        -> Patch
/// (Tree and Linear swap places with `linear_first`.)
TofClass classify_feature(const ShapeDescriptors& d, const ClassifierRules& rules = {});

struct TofFeature {
    std::string id;
    PolygonGeom geometry;
    ShapeDescriptors descriptors;
    TofClass tof_class = TofClass::Background;
};

struct ClassifiedLayer {
    std::vector<TofFeature> features;
    std::array<std::size_t, kClassCount> counts{};
};

/// Recomputes descriptors from each geometry and assigns classes, keeping
/// the input order. Geometry errors are rethrown with the feature id.
ClassifiedLayer classify_layer(std::vector<TofFeature> features, const ClassifierRules& rules = {});

}  // namespace tofmap
