#include "ctxcrf/scene_prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

#include <fmt/format.h>

#include "ctxcrf/errors.hpp"

namespace ctxcrf {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double affine(std::span<const double> w, double b, std::span<const double> f) {
    double z = b;
    for (std::size_t d = 0; d < w.size(); ++d) z += w[d] * f[d];
    return z;
}

void check_dim(const SceneFeature& f, std::size_t dim) {
    if (f.dim() != dim) {
        throw ValidationError(
            fmt::format("image '{}': scene feature has dimension {}, model expects {}", f.image_id, f.dim(), dim));
    }
}

}  // namespace

ScenePriorModel::ScenePriorModel(CategorySpace categories, std::size_t dim, double lambda)
    : categories_(std::move(categories)), dim_(dim), lambda_(lambda) {
    weights_.assign(static_cast<std::size_t>(categories_.num_foreground()) * dim_, 0.0);
    biases_.assign(static_cast<std::size_t>(categories_.num_foreground()), 0.0);
}

ScenePriorModel::ScenePriorModel(CategorySpace categories, std::size_t dim, double lambda,
                                 std::vector<double> weights, std::vector<double> biases)
    : categories_(std::move(categories)),
      dim_(dim),
      lambda_(lambda),
      weights_(std::move(weights)),
      biases_(std::move(biases)) {
    const auto k = static_cast<std::size_t>(categories_.num_foreground());
    if (dim_ == 0) throw ValidationError("scene prior dimension must be positive");
    if (weights_.size() != k * dim_ || biases_.size() != k) {
        throw ValidationError(fmt::format("scene prior expects {}x{} weights and {} biases, got {} and {}", k,
                                          dim_, k, weights_.size(), biases_.size()));
    }
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(weights_.begin(), weights_.end(), finite) ||
        !std::all_of(biases_.begin(), biases_.end(), finite)) {
        throw ValidationError("scene prior weights must be finite");
    }
    if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) throw ValidationError("scene prior lambda must be >= 0");
}

std::span<const double> ScenePriorModel::weights(Label k) const {
    return {weights_.data() + static_cast<std::size_t>(k - 1) * dim_, dim_};
}

std::span<double> ScenePriorModel::weights(Label k) {
    return {weights_.data() + static_cast<std::size_t>(k - 1) * dim_, dim_};
}

double logistic_loss(std::span<const double> weights, double bias, std::span<const SceneFeature> features,
                     std::span<const bool> labels, double lambda) {
    double nll = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const double z = affine(weights, bias, features[i].values);
        nll += softplus(z) - (labels[i] ? z : 0.0);
    }
    double reg = 0.0;
    for (double w : weights) reg += w * w;
    return nll / static_cast<double>(features.size()) + 0.5 * lambda * reg;
}

std::vector<double> logistic_gradient(std::span<const double> weights, double bias,
                                      std::span<const SceneFeature> features, std::span<const bool> labels,
                                      double lambda) {
    const std::size_t dim = weights.size();
    std::vector<double> grad(dim + 1, 0.0);
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i].values;
        const double residual = sigmoid(affine(weights, bias, f)) - (labels[i] ? 1.0 : 0.0);
        for (std::size_t d = 0; d < dim; ++d) grad[d] += residual * f[d];
        grad[dim] += residual;
    }
    const double inv_n = 1.0 / static_cast<double>(features.size());
    for (std::size_t d = 0; d < dim; ++d) grad[d] = grad[d] * inv_n + lambda * weights[d];
    grad[dim] *= inv_n;
    return grad;
}

SceneTrainResult train_scene_prior(std::span<const SceneFeature> features,
                                   const std::vector<std::vector<bool>>& presence, const CategorySpace& categories,
                                   const SceneTrainOptions& options) {
    if (features.empty()) throw ValidationError("scene prior training needs at least one image");
    if (presence.size() != features.size()) {
        throw ValidationError(fmt::format("{} feature records but {} presence vectors", features.size(),
                                          presence.size()));
    }
    if (options.epochs < 0) throw ValidationError("epochs must be nonnegative");
    if (!(options.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
    if (!(options.lambda >= 0.0)) throw ValidationError("lambda must be nonnegative");

    const std::size_t dim = features.front().dim();
    if (dim == 0) throw ValidationError(fmt::format("image '{}': empty scene feature", features.front().image_id));
    const int k_count = categories.num_foreground();
    for (std::size_t i = 0; i < features.size(); ++i) {
        check_dim(features[i], dim);
        if (presence[i].size() != static_cast<std::size_t>(k_count)) {
            throw ValidationError(fmt::format("image '{}': presence vector has {} entries, expected {}",
                                              features[i].image_id, presence[i].size(), k_count));
        }
    }

    SceneTrainResult result{ScenePriorModel(categories, dim, options.lambda), {}};
    auto& model = result.model;
    result.report.loss_history.assign(static_cast<std::size_t>(options.epochs) + 1,
                                      std::vector<double>(static_cast<std::size_t>(k_count)));

    // std::vector<bool> is not contiguous, so labels live in a plain array.
    auto labels = std::make_unique<bool[]>(features.size());
    const std::span<const bool> label_span(labels.get(), features.size());
    for (Label k = 1; k <= k_count; ++k) {
        std::size_t positives = 0;
        for (std::size_t i = 0; i < features.size(); ++i) {
            labels[i] = presence[i][static_cast<std::size_t>(k - 1)];
            positives += labels[i] ? 1 : 0;
        }
        if (positives == 0 || positives == features.size()) result.report.degenerate_categories.push_back(k);

        auto w = model.weights(k);
        double& b = model.bias(k);
        const auto col = static_cast<std::size_t>(k - 1);
        for (int epoch = 0; epoch < options.epochs; ++epoch) {
            result.report.loss_history[static_cast<std::size_t>(epoch)][col] =
                logistic_loss(w, b, features, label_span, options.lambda);
            const auto grad = logistic_gradient(w, b, features, label_span, options.lambda);
            for (std::size_t d = 0; d < dim; ++d) w[d] -= options.learning_rate * grad[d];
            b -= options.learning_rate * grad[dim];
        }
        result.report.loss_history.back()[col] = logistic_loss(w, b, features, label_span, options.lambda);
    }
    return result;
}

std::vector<double> predict_presence(const ScenePriorModel& model, const SceneFeature& feature) {
    check_dim(feature, model.dim());
    constexpr double lo = std::numeric_limits<double>::min();
    const double hi = std::nextafter(1.0, 0.0);
    std::vector<double> p(static_cast<std::size_t>(model.num_foreground()));
    for (Label k = 1; k <= model.num_foreground(); ++k) {
        p[static_cast<std::size_t>(k - 1)] =
            std::clamp(sigmoid(affine(model.weights(k), model.bias(k), feature.values)), lo, hi);
    }
    return p;
}

double global_potential(const ScenePriorModel& model, const SceneFeature& feature, Label label) {
    if (label == kBackground) {
        check_dim(feature, model.dim());
        return std::numbers::ln2;
    }
    const auto p = predict_presence(model, feature);
    return -std::log(std::clamp(p[static_cast<std::size_t>(label - 1)], kPresenceClamp, 1.0 - kPresenceClamp));
}

std::vector<double> global_potentials(const ScenePriorModel& model, const SceneFeature& feature) {
    const auto p = predict_presence(model, feature);
    std::vector<double> out(p.size() + 1);
    out[0] = std::numbers::ln2;
    for (std::size_t k = 0; k < p.size(); ++k) {
        out[k + 1] = -std::log(std::clamp(p[k], kPresenceClamp, 1.0 - kPresenceClamp));
    }
    return out;
}

}  // namespace ctxcrf
