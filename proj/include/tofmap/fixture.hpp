#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tofmap/raster.hpp"
#include "tofmap/tof_classifier.hpp"

namespace tofmap {

enum class ShapeKind { Rect, Disk };

/// A parametric object in scene coordinates: metres from the scene's top-left
/// corner, x to the east, y to the south.
struct SceneShape {
    std::string name;
    ShapeKind kind = ShapeKind::Rect;
    double cx = 0.0;
    double cy = 0.0;
    double length = 0.0;     // rect: side along `angle_deg`
    double width = 0.0;      // rect: other side
    double radius = 0.0;     // disk
    double angle_deg = 0.0;  // rect orientation, counterclockwise from east
    double height = 5.0;     // metres above ground
    double ndvi = 0.8;
    bool woody = true;  // false: elevated non-vegetation (labelled Background)
};

struct SceneSpec {
    int width = 1000;  // pixels
    int height = 1000;
    double pixel_size = 0.2;
    double origin_x = 0.0;  // map position of the top-left corner
    double origin_y = 0.0;
    double ground_height = 0.0;
    double ground_ndvi = 0.1;
    double ndvi_noise = 0.0;  // standard deviation, NDVI units
    double height_noise = 0.0;
    std::vector<SceneShape> shapes;
};

struct Fixture {
    RasterGrid ndsm;    // Float32, metres
    RasterGrid dop;     // UInt8 R, G, B, NIR
    RasterGrid labels;  // UInt8 class codes
    std::vector<TofClass> shape_classes;  // analytic class per shape
    std::vector<std::string> notes;       // layering messages for overlapping shapes
};

/// Analytic descriptors of a shape (exact area, rectangle sides).
ShapeDescriptors analytic_descriptors(const SceneShape& shape);

/// Renders the scene: a pixel belongs to a shape when its centre does; later
/// shapes paint over earlier ones. Woody shapes are labelled by applying the
/// classifier rules to their analytic descriptors.
Fixture generate_fixture(const SceneSpec& spec, std::uint64_t seed,
                         const ClassifierRules& rules = {});

/// 200 m x 200 m scene at 0.2 m: one forest block, one hedgerow, one grove,
/// one tree crown and one building.
SceneSpec four_class_scene(double ndvi_noise = 0.0);

std::string scene_to_json(const SceneSpec& spec);
SceneSpec scene_from_json(const std::string& text);

}  // namespace tofmap
