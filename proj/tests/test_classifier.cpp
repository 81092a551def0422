#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "tofmap/errors.hpp"
#include "tofmap/tof_classifier.hpp"

using namespace tofmap;

namespace {

ShapeDescriptors desc(double area, double width, double elongation) {
    return {area, width * elongation, width, elongation, 0.0};
}

PolygonGeom rect(double w, double h) { return {{{0, 0}, {w, 0}, {w, h}, {0, h}, {0, 0}}, {}}; }

}  // namespace

TEST(Classifier, HandCases) {
    EXPECT_EQ(classify_feature(desc(6400, 80, 1)), TofClass::Forest);
    EXPECT_EQ(classify_feature(desc(78.5, 10, 1)), TofClass::Tree);
    EXPECT_EQ(classify_feature(desc(540, 6, 15)), TofClass::Linear);
    EXPECT_EQ(classify_feature(desc(1200, 30, 1.33)), TofClass::Patch);
    EXPECT_EQ(classify_feature(desc(5000, 25, 1.5)), TofClass::Patch);
}

TEST(Classifier, StrictBoundaries) {
    EXPECT_EQ(classify_feature(desc(499.999, 10, 5)), TofClass::Tree);
    EXPECT_EQ(classify_feature(desc(500, 10, 5)), TofClass::Linear);
    EXPECT_EQ(classify_feature(desc(500, 10, 3)), TofClass::Patch);
    EXPECT_EQ(classify_feature(desc(5000.001, 20.001, 1)), TofClass::Forest);
    EXPECT_EQ(classify_feature(desc(5000.001, 20, 1)), TofClass::Patch);
    EXPECT_EQ(classify_feature(desc(1000, 10, 3.000001)), TofClass::Linear);
}

TEST(Classifier, LinearFirstSwapsPrecedence) {
    ClassifierRules r;
    r.linear_first = true;
    EXPECT_EQ(classify_feature(desc(300, 3, 30)), TofClass::Tree);
    EXPECT_EQ(classify_feature(desc(300, 3, 30), r), TofClass::Linear);
    EXPECT_EQ(classify_feature(desc(300, 15, 1.2), r), TofClass::Tree);
    EXPECT_EQ(classify_feature(desc(6400, 80, 1), r), TofClass::Forest);
}

TEST(Classifier, NamesAndCodes) {
    for (int c = 0; c < kClassCount; ++c) {
        const auto cls = class_from_code(c);
        ASSERT_TRUE(cls.has_value());
        EXPECT_EQ(code(*cls), c);
        EXPECT_EQ(class_from_name(class_name(*cls)), cls);
    }
    EXPECT_FALSE(class_from_code(5).has_value());
    EXPECT_FALSE(class_from_name("Shrub").has_value());
}

TEST(Classifier, LayerKeepsOrderCountsAndIsIdempotent) {
    std::vector<TofFeature> in{{"a", rect(80, 80), {}, TofClass::Background},
                               {"b", rect(90, 6), {}, TofClass::Background},
                               {"c", rect(20, 20), {}, TofClass::Background},
                               {"d", rect(40, 30), {}, TofClass::Background}};
    const auto once = classify_layer(in);
    ASSERT_EQ(once.features.size(), 4u);
    EXPECT_EQ(once.features[0].tof_class, TofClass::Forest);
    EXPECT_EQ(once.features[1].tof_class, TofClass::Linear);
    EXPECT_EQ(once.features[2].tof_class, TofClass::Tree);
    EXPECT_EQ(once.features[3].tof_class, TofClass::Patch);
    for (TofClass c : kWoodyClasses) EXPECT_EQ(once.counts[static_cast<int>(c)], 1u);
    const auto twice = classify_layer(once.features);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_EQ(twice.features[i].id, once.features[i].id);
        EXPECT_EQ(twice.features[i].tof_class, once.features[i].tof_class);
    }
    EXPECT_TRUE(classify_layer({}).features.empty());
}

TEST(Classifier, LayerErrorNamesFeature) {
    std::vector<TofFeature> in{{"sliver-7", {{{0, 0}, {1, 0}, {2, 0}, {0, 0}}, {}}, {}, TofClass::Background}};
    try {
        classify_layer(in);
        FAIL() << "expected DegenerateGeometryError";
    } catch (const DegenerateGeometryError& e) {
        EXPECT_NE(std::string(e.what()).find("sliver-7"), std::string::npos);
    }
}

TEST(Classifier, RigidMotionNeverChangesClass) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> side(1, 150), ang(0, 2 * std::numbers::pi), off(-1e5, 1e5);
    for (int i = 0; i < 500; ++i) {
        const auto p = rect(side(rng), side(rng));
        const auto base = classify_feature(shape_descriptors(p));
        const auto moved = classify_feature(shape_descriptors(transformed(p, ang(rng), off(rng), off(rng))));
        // shapes sitting numerically on a threshold may flip; these never do
        const auto d = shape_descriptors(p);
        if (std::abs(d.area - 500) < 1e-6 || std::abs(d.area - 5000) < 1e-6 ||
            std::abs(d.elongation - 3) < 1e-9 || std::abs(d.rect_width - 20) < 1e-9)
            continue;
        ASSERT_EQ(base, moved);
    }
}

TEST(Classifier, NarrowLargePolygonsAreAlwaysElongated) {
    // area <= length * width = elongation * width^2, so area > 5000 with
    // width <= 20 forces elongation > 12.5; Patch never sees such a shape.
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi), len(5, 1500), wid(1, 40);
    int narrow_large = 0;
    for (int i = 0; i < 2000; ++i) {
        const double a = len(rng), b = wid(rng), rot = u(rng);
        Ring r;
        std::vector<double> t(10);
        for (auto& x : t) x = u(rng);
        std::sort(t.begin(), t.end());
        for (double th : t) {
            const double x = a * std::cos(th), y = b * std::sin(th);
            r.push_back({x * std::cos(rot) - y * std::sin(rot), x * std::sin(rot) + y * std::cos(rot)});
        }
        r.push_back(r.front());
        const auto d = shape_descriptors(PolygonGeom{r, {}});
        if (d.area > 5000 && d.rect_width <= 20) {
            ++narrow_large;
            ASSERT_GT(d.elongation, 3.0);
            ASSERT_EQ(classify_feature(d), TofClass::Linear);
        }
    }
    EXPECT_GT(narrow_large, 0);
}
