#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ctxcrf/types.hpp"

namespace ctxcrf {

/// Probability clamp applied before taking -ln of a presence probability.
inline constexpr double kPresenceClamp = 1e-6;

/// K one-vs-rest logistic regressions over a D-dimensional scene feature.
class ScenePriorModel {
public:
    ScenePriorModel() = default;
    /// All-zero weights and biases.
    ScenePriorModel(CategorySpace categories, std::size_t dim, double lambda);
    /// weights is K x D row-major. Throws ValidationError on shape mismatch or non-finite values.
    ScenePriorModel(CategorySpace categories, std::size_t dim, double lambda, std::vector<double> weights,
                    std::vector<double> biases);

    const CategorySpace& categories() const { return categories_; }
    int num_foreground() const { return categories_.num_foreground(); }
    std::size_t dim() const { return dim_; }
    double lambda() const { return lambda_; }

    std::span<const double> weights(Label k) const;
    std::span<double> weights(Label k);
    double bias(Label k) const { return biases_[static_cast<std::size_t>(k - 1)]; }
    double& bias(Label k) { return biases_[static_cast<std::size_t>(k - 1)]; }

    const std::vector<double>& all_weights() const { return weights_; }
    const std::vector<double>& all_biases() const { return biases_; }

private:
    CategorySpace categories_;
    std::size_t dim_ = 0;
    double lambda_ = 0.0;
    std::vector<double> weights_;
    std::vector<double> biases_;
};

struct SceneTrainOptions {
    double lambda = 1e-3;
    int epochs = 500;
    double learning_rate = 0.1;
    // Initialization is all zeros, so training is deterministic regardless of seed.
    std::uint64_t seed = 0;
};

struct SceneTrainReport {
    /// loss_history[e][k]: regularized loss of category k before epoch e; the
    /// final row is the loss after the last epoch.
    std::vector<std::vector<double>> loss_history;
    /// Categories whose labels were all-positive or all-negative.
    std::vector<Label> degenerate_categories;
};

struct SceneTrainResult {
    ScenePriorModel model;
    SceneTrainReport report;
};

/// Mean binary cross-entropy of one regressor plus (lambda/2)||w||^2 (bias unregularized).
double logistic_loss(std::span<const double> weights, double bias, std::span<const SceneFeature> features,
                     std::span<const bool> labels, double lambda);

/// Gradient of logistic_loss; returns D weight partials followed by the bias partial.
std::vector<double> logistic_gradient(std::span<const double> weights, double bias,
                                      std::span<const SceneFeature> features, std::span<const bool> labels,
                                      double lambda);

/// Full-batch gradient descent on each category independently.
/// presence[i][k-1] is whether category k appears in image i.
/// Throws ValidationError on empty input or a feature dimension mismatch (naming the image).
SceneTrainResult train_scene_prior(std::span<const SceneFeature> features,
                                   const std::vector<std::vector<bool>>& presence, const CategorySpace& categories,
                                   const SceneTrainOptions& options = {});

/// sigmoid(w_k . f + b_k) for each foreground category, kept strictly inside (0, 1).
std::vector<double> predict_presence(const ScenePriorModel& model, const SceneFeature& feature);

/// -ln clamp(p_k) for a foreground label; -ln 0.5 for background.
double global_potential(const ScenePriorModel& model, const SceneFeature& feature, Label label);

/// global_potential for every label 0..K in one pass.
std::vector<double> global_potentials(const ScenePriorModel& model, const SceneFeature& feature);

}  // namespace ctxcrf
