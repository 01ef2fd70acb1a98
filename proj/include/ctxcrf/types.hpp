#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxcrf/geometry.hpp"

namespace ctxcrf {

/// Label ids run 0..K; 0 is background.
using Label = int;
inline constexpr Label kBackground = 0;

/// Ordered foreground category names; name i has label i + 1.
class CategorySpace {
public:
    CategorySpace() = default;
    /// Throws ValidationError on empty, duplicate or empty-string names.
    explicit CategorySpace(std::vector<std::string> names);

    int num_foreground() const { return static_cast<int>(names_.size()); }
    int num_labels() const { return num_foreground() + 1; }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(Label label) const;
    std::optional<Label> label_of(std::string_view name) const;

    friend bool operator==(const CategorySpace&, const CategorySpace&) = default;

private:
    std::vector<std::string> names_;
};

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

struct GroundTruthObject {
    Label label = 1;
    BoundingBox box;
    bool difficult = false;

    friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

struct ImageAnnotations {
    std::string image_id;
    ImageFrame frame;
    std::vector<GroundTruthObject> objects;

    friend bool operator==(const ImageAnnotations&, const ImageAnnotations&) = default;
};

using GroundTruthSet = std::vector<ImageAnnotations>;

/// Detector output for one image: N boxes and an N x (K+1) score matrix whose
/// rows lie on the probability simplex.
struct ProposalSet {
    std::string image_id;
    ImageFrame frame;
    std::vector<BoundingBox> boxes;
    Matrix scores;

    std::size_t size() const { return boxes.size(); }
    int num_labels() const { return static_cast<int>(scores.cols()); }

    friend bool operator==(const ProposalSet&, const ProposalSet&) = default;
};

struct SceneFeature {
    std::string image_id;
    std::vector<double> values;

    std::size_t dim() const { return values.size(); }

    friend bool operator==(const SceneFeature&, const SceneFeature&) = default;
};

/// Per-image presence vector: entry k-1 is true iff category k has an instance.
std::vector<bool> presence_from_annotations(const ImageAnnotations& image, int num_foreground);

}  // namespace ctxcrf
