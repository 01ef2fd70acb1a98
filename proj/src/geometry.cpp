#include "ctxcrf/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace ctxcrf {

namespace {

enum class Direction { Above, Below, Left, Right };

// Sector of the displacement (dx, dy). Each predicate is the negation-mirror of
// its opposite, which keeps classify_relation(a, b) == inverse(classify_relation(b, a)).
Direction direction_of(double dx, double dy) {
    if (dx > 0.0 && dy <= dx && dy > -dx) return Direction::Right;
    if (dy > 0.0 && dx < dy && dx >= -dy) return Direction::Below;
    if (dx < 0.0 && dy >= dx && dy < -dx) return Direction::Left;
    return Direction::Above;
}

bool contains(const BoundingBox& outer, const BoundingBox& inner) {
    return outer.x_min <= inner.x_min && outer.y_min <= inner.y_min && outer.x_max >= inner.x_max &&
           outer.y_max >= inner.y_max;
}

constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "far_apart",    "disjoint_above", "disjoint_below", "disjoint_left",
    "disjoint_right", "inside",       "outside",        "overlap_above",
    "overlap_below", "overlap_left",  "overlap_right",
};

}  // namespace

bool BoundingBox::valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) && std::isfinite(y_max) &&
           x_min < x_max && y_min < y_max;
}

bool ImageFrame::valid() const {
    return std::isfinite(width) && std::isfinite(height) && width > 0.0 && height > 0.0;
}

double ImageFrame::diagonal() const { return std::hypot(width, height); }

BoundingBox clip_to_frame(const BoundingBox& box, const ImageFrame& frame) {
    return {std::clamp(box.x_min, 0.0, frame.width), std::clamp(box.y_min, 0.0, frame.height),
            std::clamp(box.x_max, 0.0, frame.width), std::clamp(box.y_max, 0.0, frame.height)};
}

std::string_view relation_name(SpatialRelation r) { return kRelationNames[relation_index(r)]; }

std::optional<SpatialRelation> relation_from_name(std::string_view name) {
    for (int i = 0; i < kNumRelations; ++i) {
        if (kRelationNames[i] == name) return static_cast<SpatialRelation>(i);
    }
    return std::nullopt;
}

double intersection_area(const BoundingBox& a, const BoundingBox& b) {
    const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (w <= 0.0 || h <= 0.0) return 0.0;
    return w * h;
}

double iou(const BoundingBox& a, const BoundingBox& b) {
    const double inter = intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double uni = a.area() + b.area() - inter;
    return std::min(1.0, inter / uni);
}

SpatialRelation classify_relation(const BoundingBox& subject, const BoundingBox& reference,
                                  const ImageFrame& frame) {
    const double dx = reference.center_x() - subject.center_x();
    const double dy = reference.center_y() - subject.center_y();

    if (intersection_area(subject, reference) <= 0.0) {
        if (std::hypot(dx, dy) / frame.diagonal() > kFarThreshold) return SpatialRelation::FarApart;
        switch (direction_of(dx, dy)) {
            case Direction::Above: return SpatialRelation::DisjointAbove;
            case Direction::Below: return SpatialRelation::DisjointBelow;
            case Direction::Left: return SpatialRelation::DisjointLeft;
            case Direction::Right: return SpatialRelation::DisjointRight;
        }
    }

    if (contains(subject, reference)) return SpatialRelation::Outside;
    if (contains(reference, subject)) return SpatialRelation::Inside;

    if (dx == 0.0 && dy == 0.0) {
        // Concentric crossing boxes: one is strictly wider, the other strictly taller.
        return subject.width() > reference.width() ? SpatialRelation::OverlapAbove
                                                   : SpatialRelation::OverlapBelow;
    }
    switch (direction_of(dx, dy)) {
        case Direction::Above: return SpatialRelation::OverlapAbove;
        case Direction::Below: return SpatialRelation::OverlapBelow;
        case Direction::Left: return SpatialRelation::OverlapLeft;
        case Direction::Right: return SpatialRelation::OverlapRight;
    }
    return SpatialRelation::OverlapAbove;
}

SpatialRelation inverse_relation(SpatialRelation r) {
    switch (r) {
        case SpatialRelation::FarApart: return SpatialRelation::FarApart;
        case SpatialRelation::DisjointAbove: return SpatialRelation::DisjointBelow;
        case SpatialRelation::DisjointBelow: return SpatialRelation::DisjointAbove;
        case SpatialRelation::DisjointLeft: return SpatialRelation::DisjointRight;
        case SpatialRelation::DisjointRight: return SpatialRelation::DisjointLeft;
        case SpatialRelation::Inside: return SpatialRelation::Outside;
        case SpatialRelation::Outside: return SpatialRelation::Inside;
        case SpatialRelation::OverlapAbove: return SpatialRelation::OverlapBelow;
        case SpatialRelation::OverlapBelow: return SpatialRelation::OverlapAbove;
        case SpatialRelation::OverlapLeft: return SpatialRelation::OverlapRight;
        case SpatialRelation::OverlapRight: return SpatialRelation::OverlapLeft;
    }
    return r;
}

}  // namespace ctxcrf
