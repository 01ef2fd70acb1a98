#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "ctxcrf/errors.hpp"
#include "ctxcrf/geometry.hpp"
#include "ctxcrf/types.hpp"
#include "support.hpp"

using namespace ctxcrf;

TEST_CASE("iou of identical, disjoint and half-shifted boxes") {
    const BoundingBox a{0, 0, 10, 10};
    CHECK(iou(a, a) == 1.0);
    CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
    // 5x10 overlap, union 100 + 100 - 50
    CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(50.0 / 150.0).epsilon(1e-12));
    CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(0.3333).epsilon(1e-4));
}

TEST_CASE("touching boxes do not intersect") {
    CHECK(intersection_area({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
    CHECK(iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
}

TEST_CASE("iou is symmetric and bounded") {
    std::mt19937_64 rng(3);
    const ImageFrame f{100, 100};
    for (int t = 0; t < 1000; ++t) {
        const auto a = testsupport::random_box(f, rng);
        const auto b = testsupport::random_box(f, rng);
        const double v = iou(a, b);
        CHECK(v == iou(b, a));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("box and frame validity") {
    CHECK(BoundingBox{0, 0, 1, 1}.valid());
    CHECK_FALSE(BoundingBox{0, 0, 0, 1}.valid());
    CHECK_FALSE(BoundingBox{2, 0, 1, 1}.valid());
    CHECK_FALSE(BoundingBox{0, 0, INFINITY, 1}.valid());
    CHECK(ImageFrame{10, 10}.valid());
    CHECK_FALSE(ImageFrame{0, 10}.valid());
    CHECK(ImageFrame{3, 4}.diagonal() == 5.0);
}

TEST_CASE("clip_to_frame") {
    const auto c = clip_to_frame({-5, -5, 50, 20}, {40, 30});
    CHECK(c == BoundingBox{0, 0, 40, 20});
    CHECK_FALSE(clip_to_frame({50, 50, 60, 60}, {40, 30}).valid());
}

TEST_CASE("classify_relation examples") {
    const ImageFrame f100{100, 100};
    CHECK(classify_relation({0, 0, 10, 10}, {2, 2, 8, 8}, f100) == SpatialRelation::Outside);
    CHECK(classify_relation({0, 0, 10, 10}, {30, 0, 40, 10}, f100) == SpatialRelation::DisjointRight);
    // centre distance 1272.8 over diagonal 1414.2 = 0.90
    const ImageFrame f1000{1000, 1000};
    CHECK(std::hypot(900.0, 900.0) / f1000.diagonal() == doctest::Approx(0.90).epsilon(1e-3));
    CHECK(classify_relation({0, 0, 10, 10}, {900, 900, 910, 910}, f1000) == SpatialRelation::FarApart);
}

TEST_CASE("every relation is reachable") {
    const ImageFrame f{100, 100};
    const BoundingBox s{0, 0, 10, 10};
    std::map<SpatialRelation, std::pair<BoundingBox, BoundingBox>> fixtures = {
        {SpatialRelation::DisjointRight, {s, {30, 0, 40, 10}}},
        {SpatialRelation::DisjointLeft, {{30, 0, 40, 10}, s}},
        {SpatialRelation::DisjointBelow, {s, {0, 30, 10, 40}}},
        {SpatialRelation::DisjointAbove, {{0, 30, 10, 40}, s}},
        {SpatialRelation::Inside, {{2, 2, 8, 8}, s}},
        {SpatialRelation::Outside, {s, {2, 2, 8, 8}}},
        {SpatialRelation::OverlapRight, {s, {5, 0, 15, 10}}},
        {SpatialRelation::OverlapLeft, {{5, 0, 15, 10}, s}},
        {SpatialRelation::OverlapBelow, {s, {0, 5, 10, 15}}},
        {SpatialRelation::OverlapAbove, {{0, 5, 10, 15}, s}},
    };
    for (const auto& [want, boxes] : fixtures) {
        CAPTURE(relation_name(want));
        CHECK(classify_relation(boxes.first, boxes.second, f) == want);
    }
    CHECK(classify_relation(s, {90, 90, 100, 100}, f) == SpatialRelation::FarApart);
}

TEST_CASE("far threshold is strict") {
    // centres 50 apart on a 100-diagonal frame is exactly 0.5, not far
    const ImageFrame f{60, 80};
    CHECK(classify_relation({0, 0, 2, 2}, {30, 40, 32, 42}, f) == SpatialRelation::DisjointBelow);
    CHECK(classify_relation({0, 0, 2, 2}, {30.1, 40.1, 32.1, 42.1}, f) == SpatialRelation::FarApart);
}

TEST_CASE("diagonal displacements fall in a single sector") {
    const ImageFrame f{1000, 1000};
    const BoundingBox s{0, 0, 10, 10};
    // dx == dy > 0 belongs to right; dx == -dy with dx < 0 to left
    CHECK(classify_relation(s, {20, 20, 30, 30}, f) == SpatialRelation::DisjointRight);
    CHECK(classify_relation({20, 20, 30, 30}, s, f) == SpatialRelation::DisjointLeft);
    CHECK(classify_relation({20, 0, 30, 10}, {0, 20, 10, 30}, f) == SpatialRelation::DisjointBelow);
    CHECK(classify_relation({0, 20, 10, 30}, {20, 0, 30, 10}, f) == SpatialRelation::DisjointAbove);
}

TEST_CASE("identical boxes are Outside") {
    const BoundingBox a{1, 2, 3, 4};
    CHECK(classify_relation(a, a, {10, 10}) == SpatialRelation::Outside);
}

TEST_CASE("concentric crossing boxes stay consistent under role swap") {
    const ImageFrame f{100, 100};
    const BoundingBox wide{0, 4, 10, 6}, tall{4, 0, 6, 10};
    const auto r = classify_relation(wide, tall, f);
    CHECK(r == SpatialRelation::OverlapAbove);
    CHECK(classify_relation(tall, wide, f) == inverse_relation(r));
}

TEST_CASE("inverse_relation examples and involution") {
    CHECK(inverse_relation(SpatialRelation::Inside) == SpatialRelation::Outside);
    CHECK(inverse_relation(SpatialRelation::FarApart) == SpatialRelation::FarApart);
    CHECK(inverse_relation(SpatialRelation::DisjointAbove) == SpatialRelation::DisjointBelow);
    for (auto r : kAllRelations) CHECK(inverse_relation(inverse_relation(r)) == r);
}

TEST_CASE("classify(a,b) is the inverse of classify(b,a) on random pairs") {
    std::mt19937_64 rng(11);
    const ImageFrame f{200, 150};
    for (int t = 0; t < 5000; ++t) {
        const auto a = testsupport::random_box(f, rng);
        const auto b = testsupport::random_box(f, rng);
        if (a == b) continue;
        CHECK(classify_relation(a, b, f) == inverse_relation(classify_relation(b, a, f)));
    }
}

TEST_CASE("relation names round-trip") {
    for (auto r : kAllRelations) CHECK(relation_from_name(relation_name(r)) == r);
    CHECK_FALSE(relation_from_name("sideways").has_value());
    CHECK(relation_index(SpatialRelation::OverlapRight) == 10);
}

TEST_CASE("category space") {
    CategorySpace c({"cat", "dog"});
    CHECK(c.num_foreground() == 2);
    CHECK(c.num_labels() == 3);
    CHECK(c.name(0) == "__background__");
    CHECK(c.name(2) == "dog");
    CHECK(c.label_of("cat") == 1);
    CHECK_FALSE(c.label_of("cow").has_value());
    CHECK_THROWS_AS(CategorySpace({"a", "a"}), ValidationError);
    CHECK_THROWS_AS(CategorySpace({""}), ValidationError);
    CHECK_THROWS_AS(CategorySpace(std::vector<std::string>{}), ValidationError);
}

TEST_CASE("presence_from_annotations") {
    ImageAnnotations img{"x", {10, 10}, {{2, {0, 0, 1, 1}, false}, {2, {1, 1, 2, 2}, true}}};
    CHECK(presence_from_annotations(img, 3) == std::vector<bool>{false, true, false});
    img.objects.push_back({4, {0, 0, 1, 1}, false});
    CHECK_THROWS_AS(presence_from_annotations(img, 3), ValidationError);
}
