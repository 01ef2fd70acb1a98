#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctxcrf/geometry.hpp"
#include "ctxcrf/types.hpp"

namespace ctxcrf {

/// Co-occurrence / layout likelihood P(a, b, r) over (K+1) x (K+1) x 11 cells.
///
/// For each relation r the foreground block (a, b in 1..K) is a joint
/// distribution. Cells touching background hold the neutral value 1/K^2.
class PairwiseModel {
public:
    PairwiseModel() = default;

    /// Assembles a model from raw tensors laid out [a][b][r] row-major.
    /// Throws ValidationError when shapes disagree or a likelihood is outside (0, 1].
    PairwiseModel(CategorySpace categories, double alpha, std::vector<std::uint64_t> counts,
                  std::vector<double> likelihood);

    /// Likelihood-only tensor (zero counts) that may contain exact zeros, whose
    /// potential is +inf. Meant for reference tensors compared against learned
    /// ones, not for inference.
    static PairwiseModel reference(CategorySpace categories, std::vector<double> likelihood);

    /// Counts to likelihoods with add-alpha smoothing per relation.
    static PairwiseModel from_counts(CategorySpace categories, double alpha,
                                     std::vector<std::uint64_t> counts);

    const CategorySpace& categories() const { return categories_; }
    int num_labels() const { return categories_.num_labels(); }
    double alpha() const { return alpha_; }

    double likelihood(Label a, Label b, SpatialRelation r) const { return likelihood_[index(a, b, r)]; }
    std::uint64_t count(Label a, Label b, SpatialRelation r) const { return counts_[index(a, b, r)]; }

    /// -ln P(a, b, r); finite since every cell is positive.
    double potential(Label a, Label b, SpatialRelation r) const { return potential_[index(a, b, r)]; }

    double neutral_value() const;

    const std::vector<std::uint64_t>& counts() const { return counts_; }
    const std::vector<double>& likelihoods() const { return likelihood_; }

    std::size_t index(Label a, Label b, SpatialRelation r) const {
        const auto n = static_cast<std::size_t>(num_labels());
        return (static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)) * kNumRelations +
               static_cast<std::size_t>(relation_index(r));
    }

private:
    struct AllowZero {};
    PairwiseModel(AllowZero, CategorySpace categories, double alpha, std::vector<std::uint64_t> counts,
                  std::vector<double> likelihood);

    CategorySpace categories_;
    double alpha_ = 1.0;
    std::vector<std::uint64_t> counts_;
    std::vector<double> likelihood_;
    std::vector<double> potential_;
};

struct PairwiseLearnResult {
    PairwiseModel model;
    std::size_t images = 0;
    std::size_t ordered_pairs = 0;
    std::vector<std::string> warnings;
};

/// Counts every ordered pair of ground-truth objects within each image by
/// label and layout, then smooths. Each unordered pair contributes
/// (a, b, r) and (b, a, inverse(r)) from a single classification, so the
/// directed-consistency property is exact.
///
/// Throws ValidationError on labels outside 1..K (naming the image) or alpha <= 0.
PairwiseLearnResult learn_pairwise(const GroundTruthSet& annotations, const CategorySpace& categories,
                                   double alpha = 1.0);

/// -ln P(a, b, r).
double pairwise_potential(const PairwiseModel& model, Label a, Label b, SpatialRelation r);

}  // namespace ctxcrf
