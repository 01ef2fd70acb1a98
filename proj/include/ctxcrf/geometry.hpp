#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace ctxcrf {

/// Axis-aligned box in pixel coordinates, origin top-left, y pointing down.
struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    double center_x() const { return 0.5 * (x_min + x_max); }
    double center_y() const { return 0.5 * (y_min + y_max); }

    /// Finite coordinates and strictly positive extent on both axes.
    bool valid() const;

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ImageFrame {
    double width = 0.0;
    double height = 0.0;

    bool valid() const;
    double diagonal() const;

    friend bool operator==(const ImageFrame&, const ImageFrame&) = default;
};

/// Clips a box to [0, width] x [0, height]. The result may be degenerate;
/// callers check valid().
BoundingBox clip_to_frame(const BoundingBox& box, const ImageFrame& frame);

/// The eleven pairwise layouts. The underlying values index the relation
/// axis of the pairwise likelihood tensor and are part of the model format.
enum class SpatialRelation : int {
    FarApart = 0,
    DisjointAbove,
    DisjointBelow,
    DisjointLeft,
    DisjointRight,
    Inside,
    Outside,
    OverlapAbove,
    OverlapBelow,
    OverlapLeft,
    OverlapRight,
};

inline constexpr int kNumRelations = 11;

inline constexpr std::array<SpatialRelation, kNumRelations> kAllRelations = {
    SpatialRelation::FarApart,     SpatialRelation::DisjointAbove, SpatialRelation::DisjointBelow,
    SpatialRelation::DisjointLeft, SpatialRelation::DisjointRight, SpatialRelation::Inside,
    SpatialRelation::Outside,      SpatialRelation::OverlapAbove,  SpatialRelation::OverlapBelow,
    SpatialRelation::OverlapLeft,  SpatialRelation::OverlapRight,
};

/// Normalized center distance above which non-intersecting boxes are FarApart.
inline constexpr double kFarThreshold = 0.5;

constexpr int relation_index(SpatialRelation r) { return static_cast<int>(r); }

std::string_view relation_name(SpatialRelation r);
std::optional<SpatialRelation> relation_from_name(std::string_view name);

double intersection_area(const BoundingBox& a, const BoundingBox& b);

double iou(const BoundingBox& a, const BoundingBox& b);

/// Layout of `reference` as seen from `subject`.
///
/// Non-intersecting pairs are FarApart when the center distance exceeds
/// kFarThreshold of the frame diagonal, otherwise Disjoint{Above,Below,Left,Right}
/// by the direction of the reference center from the subject center. Intersecting
/// pairs are Outside when the subject contains the reference (closed inequalities,
/// identical boxes included), Inside when the reference contains the subject, and
/// Overlap* by direction otherwise.
///
/// Direction sectors over theta = atan2(dy, dx), image-down = +y:
/// right (-45, 45], below (45, 135], left (135, 225], above (225, 315].
/// They are evaluated with exact comparisons on (dx, dy), so swapping the
/// arguments always lands in the opposite sector.
///
/// Concentric, partially overlapping boxes have no direction; they resolve to
/// OverlapAbove when the subject is the wider box and OverlapBelow otherwise.
SpatialRelation classify_relation(const BoundingBox& subject, const BoundingBox& reference,
                                  const ImageFrame& frame);

/// Role swap: Above<->Below, Left<->Right, Inside<->Outside, FarApart fixed.
SpatialRelation inverse_relation(SpatialRelation r);

}  // namespace ctxcrf
