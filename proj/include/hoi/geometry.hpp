#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "hoi/errors.hpp"

namespace hoi {

// Axis-aligned box in continuous image coordinates. Degenerate boxes are
// rejected at construction so downstream area math never divides by zero.
struct BoundingBox {
    double x1, y1, x2, y2;

    BoundingBox(double x1_, double y1_, double x2_, double y2_) : x1(x1_), y1(y1_), x2(x2_), y2(y2_) {
        if (!(x1 < x2) || !(y1 < y2)) throw ShapeError("degenerate bounding box");
    }

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x1 + x2); }
    double center_y() const { return 0.5 * (y1 + y2); }
    double shorter_edge() const { return std::min(width(), height()); }

    bool contains_point(double px, double py) const {
        return px >= x1 && px <= x2 && py >= y1 && py <= y2;
    }

    BoundingBox union_with(const BoundingBox& other) const {
        return {std::min(x1, other.x1), std::min(y1, other.y1), std::max(x2, other.x2),
                std::max(y2, other.y2)};
    }

    // Mirror along the vertical axis of a frame of the given width.
    BoundingBox flipped(double frame_width) const {
        return {frame_width - x2, y1, frame_width - x1, y2};
    }

    bool operator==(const BoundingBox& other) const {
        return x1 == other.x1 && y1 == other.y1 && x2 == other.x2 && y2 == other.y2;
    }
};

double intersection_area(const BoundingBox& a, const BoundingBox& b);

// Intersection over union; symmetric, in [0,1], 0 for disjoint boxes.
double iou(const BoundingBox& a, const BoundingBox& b);

// Intersection over head: area(head ∩ human) / area(head). Not symmetric.
double ioh(const BoundingBox& human, const BoundingBox& head);

// Two-channel binary occupancy grid over the union box of the pair.
// Channel 0 marks the subject footprint, channel 1 the object footprint;
// a cell is set iff its center lies inside the respective box.
inline constexpr int kSpatialMaskGrid = 27;

struct SpatialMask {
    // [channel][row][col], values 0/1.
    std::array<std::array<std::array<uint8_t, kSpatialMaskGrid>, kSpatialMaskGrid>, 2> cells{};

    int popcount(int channel) const {
        int n = 0;
        for (const auto& row : cells[static_cast<size_t>(channel)])
            for (uint8_t v : row) n += v;
        return n;
    }
};

SpatialMask spatial_mask(const BoundingBox& subject, const BoundingBox& object);

}  // namespace hoi
