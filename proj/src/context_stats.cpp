#include "ctxcrf/context_stats.hpp"

#include <cmath>

#include <fmt/format.h>

#include "ctxcrf/errors.hpp"

namespace ctxcrf {

namespace {

std::size_t tensor_size(int num_labels) {
    const auto n = static_cast<std::size_t>(num_labels);
    return n * n * kNumRelations;
}

}  // namespace

PairwiseModel::PairwiseModel(CategorySpace categories, double alpha, std::vector<std::uint64_t> counts,
                             std::vector<double> likelihood)
    : PairwiseModel(AllowZero{}, std::move(categories), alpha, std::move(counts), std::move(likelihood)) {
    for (std::size_t i = 0; i < likelihood_.size(); ++i) {
        if (!(likelihood_[i] > 0.0)) {
            throw ValidationError(fmt::format("pairwise likelihood entry {} = {} is not positive", i, likelihood_[i]));
        }
    }
}

PairwiseModel PairwiseModel::reference(CategorySpace categories, std::vector<double> likelihood) {
    std::vector<std::uint64_t> counts(likelihood.size(), 0);
    return PairwiseModel(AllowZero{}, std::move(categories), 1.0, std::move(counts), std::move(likelihood));
}

PairwiseModel::PairwiseModel(AllowZero, CategorySpace categories, double alpha, std::vector<std::uint64_t> counts,
                             std::vector<double> likelihood)
    : categories_(std::move(categories)),
      alpha_(alpha),
      counts_(std::move(counts)),
      likelihood_(std::move(likelihood)) {
    const std::size_t expected = tensor_size(num_labels());
    if (counts_.size() != expected || likelihood_.size() != expected) {
        throw ValidationError(fmt::format("pairwise tensor has {} counts and {} likelihoods, expected {}",
                                          counts_.size(), likelihood_.size(), expected));
    }
    if (!(alpha_ > 0.0) || !std::isfinite(alpha_)) {
        throw ValidationError(fmt::format("smoothing alpha must be positive, got {}", alpha_));
    }
    potential_.resize(expected);
    for (std::size_t i = 0; i < expected; ++i) {
        const double p = likelihood_[i];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError(fmt::format("pairwise likelihood entry {} = {} outside [0, 1]", i, p));
        }
        potential_[i] = -std::log(p);
    }
}

PairwiseModel PairwiseModel::from_counts(CategorySpace categories, double alpha,
                                         std::vector<std::uint64_t> counts) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw ValidationError(fmt::format("smoothing alpha must be positive, got {}", alpha));
    }
    const int n = categories.num_labels();
    const int k = categories.num_foreground();
    if (counts.size() != tensor_size(n)) throw ValidationError("count tensor has the wrong shape");

    const auto at = [n](Label a, Label b, int r) {
        return (static_cast<std::size_t>(a) * static_cast<std::size_t>(n) + static_cast<std::size_t>(b)) *
                   kNumRelations +
               static_cast<std::size_t>(r);
    };
    const double k2 = static_cast<double>(k) * static_cast<double>(k);
    std::vector<double> likelihood(counts.size(), 1.0 / k2);
    for (int r = 0; r < kNumRelations; ++r) {
        std::uint64_t total = 0;
        for (Label a = 1; a <= k; ++a)
            for (Label b = 1; b <= k; ++b) total += counts[at(a, b, r)];
        const double denom = static_cast<double>(total) + alpha * k2;
        for (Label a = 1; a <= k; ++a)
            for (Label b = 1; b <= k; ++b)
                likelihood[at(a, b, r)] = (static_cast<double>(counts[at(a, b, r)]) + alpha) / denom;
    }
    return PairwiseModel(std::move(categories), alpha, std::move(counts), std::move(likelihood));
}

double PairwiseModel::neutral_value() const {
    const double k = categories_.num_foreground();
    return 1.0 / (k * k);
}

PairwiseLearnResult learn_pairwise(const GroundTruthSet& annotations, const CategorySpace& categories,
                                   double alpha) {
    const int k = categories.num_foreground();
    const auto n = static_cast<std::size_t>(categories.num_labels());
    std::vector<std::uint64_t> counts(tensor_size(categories.num_labels()), 0);
    const auto at = [n](Label a, Label b, SpatialRelation r) {
        return (static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)) * kNumRelations +
               static_cast<std::size_t>(relation_index(r));
    };

    PairwiseLearnResult result;
    for (const auto& image : annotations) {
        for (const auto& obj : image.objects) {
            if (obj.label < 1 || obj.label > k) {
                throw ValidationError(
                    fmt::format("image '{}': annotation label {} outside 1..{}", image.image_id, obj.label, k));
            }
        }
        const auto& objs = image.objects;
        for (std::size_t i = 0; i < objs.size(); ++i) {
            for (std::size_t j = i + 1; j < objs.size(); ++j) {
                const SpatialRelation r = classify_relation(objs[i].box, objs[j].box, image.frame);
                ++counts[at(objs[i].label, objs[j].label, r)];
                ++counts[at(objs[j].label, objs[i].label, inverse_relation(r))];
                result.ordered_pairs += 2;
            }
        }
        ++result.images;
    }
    if (result.ordered_pairs == 0) {
        result.warnings.emplace_back("no object pairs observed; pairwise model is pure smoothing (uniform)");
    }
    result.model = PairwiseModel::from_counts(categories, alpha, std::move(counts));
    return result;
}

double pairwise_potential(const PairwiseModel& model, Label a, Label b, SpatialRelation r) {
    return model.potential(a, b, r);
}

}  // namespace ctxcrf
