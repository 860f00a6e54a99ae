#include "hoi/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hoi {

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const double w = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double h = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    return inter / (a.area() + b.area() - inter);
}

double ioh(const BoundingBox& human, const BoundingBox& head) {
    return intersection_area(human, head) / head.area();
}

SpatialMask spatial_mask(const BoundingBox& subject, const BoundingBox& object) {
    const BoundingBox span = subject.union_with(object);
    const double cell_w = span.width() / kSpatialMaskGrid;
    const double cell_h = span.height() / kSpatialMaskGrid;
    SpatialMask mask;
    for (int r = 0; r < kSpatialMaskGrid; ++r) {
        const double cy = span.y1 + (r + 0.5) * cell_h;
        for (int c = 0; c < kSpatialMaskGrid; ++c) {
            const double cx = span.x1 + (c + 0.5) * cell_w;
            mask.cells[0][static_cast<size_t>(r)][static_cast<size_t>(c)] =
                subject.contains_point(cx, cy) ? 1 : 0;
            mask.cells[1][static_cast<size_t>(r)][static_cast<size_t>(c)] =
                object.contains_point(cx, cy) ? 1 : 0;
        }
    }
    return mask;
}

}  // namespace hoi
