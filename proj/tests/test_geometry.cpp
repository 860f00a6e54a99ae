#include <cmath>

#include "doctest.h"
#include "hoi/geometry.hpp"
#include "hoi/rng.hpp"

using namespace hoi;

namespace {

// Brute-force pixel-grid counting oracle for box overlap at a fixed
// resolution, independent of the analytic area arithmetic.
double iou_grid_oracle(const BoundingBox& a, const BoundingBox& b, double res = 0.01) {
    const BoundingBox span = a.union_with(b);
    long inter = 0, only_a = 0, only_b = 0;
    for (double y = span.y1 + res / 2; y < span.y2; y += res) {
        for (double x = span.x1 + res / 2; x < span.x2; x += res) {
            const bool in_a = a.contains_point(x, y);
            const bool in_b = b.contains_point(x, y);
            if (in_a && in_b)
                ++inter;
            else if (in_a)
                ++only_a;
            else if (in_b)
                ++only_b;
        }
    }
    const long uni = inter + only_a + only_b;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BoundingBox random_box(Rng& rng, double span = 50.0) {
    const double x1 = rng.uniform(0.0, span);
    const double y1 = rng.uniform(0.0, span);
    return {x1, y1, x1 + rng.uniform(0.5, span), y1 + rng.uniform(0.5, span)};
}

}  // namespace

TEST_CASE("bounding box construction rejects degenerate boxes") {
    CHECK_THROWS_AS(BoundingBox(5, 0, 5, 10), ShapeError);
    CHECK_THROWS_AS(BoundingBox(0, 10, 10, 10), ShapeError);
    CHECK_THROWS_AS(BoundingBox(10, 0, 5, 10), ShapeError);
    CHECK(BoundingBox(0, 0, 1, 1).area() == doctest::Approx(1.0));
}

TEST_CASE("iou examples") {
    const BoundingBox a(0, 0, 10, 10);
    CHECK(iou(a, a) == doctest::Approx(1.0));
    CHECK(iou(a, BoundingBox(20, 20, 30, 30)) == 0.0);
    // Half-overlapping boxes of equal area: 50 / 150 = 1/3, cross-checked
    // against the grid-counting oracle.
    const BoundingBox b(5, 0, 15, 10);
    CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
    CHECK(iou(a, b) == doctest::Approx(iou_grid_oracle(a, b)).epsilon(1e-3));
}

TEST_CASE("iou properties on random boxes") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const BoundingBox a = random_box(rng);
        const BoundingBox b = random_box(rng);
        const double ab = iou(a, b);
        CHECK(ab == doctest::Approx(iou(b, a)));
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(iou(a, a) == doctest::Approx(1.0));
    }
}

TEST_CASE("ioh examples and identity") {
    const BoundingBox human(0, 0, 10, 10);
    CHECK(ioh(human, BoundingBox(2, 2, 4, 4)) == doctest::Approx(1.0));
    CHECK(ioh(human, BoundingBox(11, 11, 12, 12)) == 0.0);
    // Head half inside: 2x4 of a 4x4 head.
    const BoundingBox head(8, 0, 12, 4);
    CHECK(ioh(human, head) == doctest::Approx(0.5));
    // Not symmetric.
    CHECK(ioh(head, human) == doctest::Approx(intersection_area(head, human) / human.area()));

    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        const BoundingBox hu = random_box(rng);
        const BoundingBox hd = random_box(rng, 20.0);
        CHECK(ioh(hu, hd) * hd.area() == doctest::Approx(intersection_area(hu, hd)));
    }
}

TEST_CASE("spatial mask: subject covering the union box is all ones") {
    const BoundingBox subject(0, 0, 20, 20);
    const BoundingBox object(5, 5, 10, 10);  // inside
    const SpatialMask mask = spatial_mask(subject, object);
    CHECK(mask.popcount(0) == kSpatialMaskGrid * kSpatialMaskGrid);
    // Containment preserved: object footprint is a subset of the subject's.
    for (int r = 0; r < kSpatialMaskGrid; ++r)
        for (int c = 0; c < kSpatialMaskGrid; ++c)
            if (mask.cells[1][r][c]) CHECK(mask.cells[0][r][c] == 1);
}

TEST_CASE("spatial mask: side-by-side boxes split the grid") {
    const BoundingBox subject(0, 0, 10, 10);
    const BoundingBox object(10, 0, 20, 10);
    const SpatialMask mask = spatial_mask(subject, object);
    // Union spans x in [0,20]; cells with center <= 10 belong to the subject,
    // cells with center >= 10 to the object (closed boxes share the edge).
    int subject_cols = 0, object_cols = 0;
    for (int c = 0; c < kSpatialMaskGrid; ++c) {
        const double cx = (c + 0.5) * (20.0 / kSpatialMaskGrid);
        if (cx <= 10.0) ++subject_cols;
        if (cx >= 10.0) ++object_cols;
    }
    CHECK(mask.popcount(0) == subject_cols * kSpatialMaskGrid);
    CHECK(mask.popcount(1) == object_cols * kSpatialMaskGrid);
    for (int r = 0; r < kSpatialMaskGrid; ++r) {
        CHECK(mask.cells[0][r][0] == 1);
        CHECK(mask.cells[0][r][kSpatialMaskGrid - 1] == 0);
        CHECK(mask.cells[1][r][kSpatialMaskGrid - 1] == 1);
        CHECK(mask.cells[1][r][0] == 0);
        // Each row's subject cells form a prefix, object cells a suffix.
        for (int c = 1; c < kSpatialMaskGrid; ++c) {
            CHECK(mask.cells[0][r][c] <= mask.cells[0][r][c - 1]);
            CHECK(mask.cells[1][r][c] >= mask.cells[1][r][c - 1]);
        }
    }
}

TEST_CASE("spatial mask popcount equals per-cell center-inclusion oracle") {
    Rng rng(17);
    for (int i = 0; i < 100; ++i) {
        const BoundingBox subject = random_box(rng);
        const BoundingBox object = random_box(rng);
        const SpatialMask mask = spatial_mask(subject, object);
        const BoundingBox span = subject.union_with(object);
        int subject_cells = 0, object_cells = 0;
        for (int r = 0; r < kSpatialMaskGrid; ++r)
            for (int c = 0; c < kSpatialMaskGrid; ++c) {
                const double cx = span.x1 + (c + 0.5) * span.width() / kSpatialMaskGrid;
                const double cy = span.y1 + (r + 0.5) * span.height() / kSpatialMaskGrid;
                if (subject.contains_point(cx, cy)) ++subject_cells;
                if (object.contains_point(cx, cy)) ++object_cells;
            }
        CHECK(mask.popcount(0) == subject_cells);
        CHECK(mask.popcount(1) == object_cells);
    }
}

TEST_CASE("flipping a box twice returns the original") {
    const BoundingBox box(3, 1, 8, 9);
    const BoundingBox once = box.flipped(100.0);
    CHECK(once == BoundingBox(92, 1, 97, 9));
    CHECK(once.flipped(100.0) == box);
}
