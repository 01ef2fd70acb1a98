#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "ctxcrf/context_stats.hpp"
#include "ctxcrf/geometry.hpp"
#include "ctxcrf/scene_prior.hpp"
#include "ctxcrf/types.hpp"

namespace ctxcrf {

struct CrfWeights {
    double pairwise = 0.0;  // omega_p
    double global = 0.0;    // omega_g
};

enum class UpdateRule {
    AllLabels,    // context field sums over every neighbor label
    ExcludeSelf,  // neighbor label equal to the candidate label is skipped
};

struct InferenceConfig {
    int max_iterations = 20;
    double tolerance = 1e-4;  // on max |Q_new - Q_old|
    double damping = 0.5;     // Q <- (1 - damping) Q_hat + damping Q
    double score_clamp = 1e-6;
    std::size_t max_proposals = 300;
    UpdateRule update_rule = UpdateRule::AllLabels;

    /// Throws ValidationError unless max_iterations >= 1, 0 < tolerance < 1,
    /// 0 <= damping < 1, score_clamp in (0, 1) and max_proposals >= 1.
    void validate() const;
};

struct MarginalSet {
    /// N x (K+1), rows sum to one.
    Matrix q;
    /// Row i of q belongs to input proposal kept[i] (ascending).
    std::vector<std::size_t> kept;
    int iterations = 0;
    bool converged = true;
    double max_change = 0.0;
};

/// Called after every committed iteration with (iteration, current Q).
using IterationObserver = std::function<void(int, const Matrix&)>;

/// Everything the potentials need besides the proposals themselves.
struct CrfModel {
    const PairwiseModel& pairwise;
    const ScenePriorModel& scene;
};

/// relations[i][j] = classify_relation(box_i, box_j) for i < j and its inverse
/// for i > j. The diagonal is unused.
std::vector<std::vector<SpatialRelation>> relation_matrix(const std::vector<BoundingBox>& boxes,
                                                          const ImageFrame& frame);

/// -ln max(S[i][label], clamp).
double unary_potential(const ProposalSet& proposals, std::size_t i, Label label, double score_clamp = 1e-6);

/// Total energy of a full labeling: unary + omega_p * sum_{i<j} pairwise + omega_g * global.
/// `pair_rule` picks the energy a mean-field rule approximates: AllLabels is the
/// full energy; ExcludeSelf drops the pairwise term of pairs with equal labels,
/// which is the energy whose mean-field update skips l == l'.
double energy(const ProposalSet& proposals, std::span<const Label> labeling, const CrfModel& model,
              const SceneFeature& feature, const CrfWeights& weights, double score_clamp = 1e-6,
              UpdateRule pair_rule = UpdateRule::AllLabels);

/// Indices of the proposals inference keeps: all of them when N <= limit, else
/// the `limit` with the highest max foreground score (ties by lower index),
/// returned in ascending order.
std::vector<std::size_t> select_proposals(const ProposalSet& proposals, std::size_t limit);

/// Unary-plus-global initialization, Q_i(l) proportional to exp(-phi_u - omega_g phi_g).
Matrix initial_marginals(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                         const CrfWeights& weights, double score_clamp = 1e-6);

/// Synchronous damped mean-field iteration on the kept proposals.
MarginalSet mean_field_infer(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                             const CrfWeights& weights, const InferenceConfig& config = {},
                             const IterationObserver& observer = {});

struct ExactMarginals {
    Matrix marginals;
    double log_partition = 0.0;
};

inline constexpr double kMaxEnumeratedConfigurations = 1e6;

/// Marginals of the Gibbs distribution exp(-E(x)) by enumerating every labeling.
/// Throws ValidationError when (K+1)^N exceeds kMaxEnumeratedConfigurations.
ExactMarginals exact_marginals(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                               const CrfWeights& weights, double score_clamp = 1e-6,
                               UpdateRule pair_rule = UpdateRule::AllLabels);

struct RescoreResult {
    /// Kept proposals with their scores replaced by Q.
    ProposalSet proposals;
    std::vector<std::size_t> source_indices;
    int iterations = 0;
    bool converged = true;
    double max_change = 0.0;
};

RescoreResult rescore(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                      const CrfWeights& weights, const InferenceConfig& config = {});

}  // namespace ctxcrf
