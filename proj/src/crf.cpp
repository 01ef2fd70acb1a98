#include "ctxcrf/crf.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "ctxcrf/errors.hpp"

namespace ctxcrf {

namespace {

void check_label_spaces(const ProposalSet& proposals, const CrfModel& model) {
    const int labels = model.pairwise.num_labels();
    if (model.scene.num_foreground() + 1 != labels) {
        throw ValidationError(fmt::format("pairwise model has {} labels but scene prior has {}", labels,
                                          model.scene.num_foreground() + 1));
    }
    if (proposals.size() > 0 && proposals.num_labels() != labels) {
        throw ValidationError(fmt::format("image '{}': score rows have {} labels, models expect {}",
                                          proposals.image_id, proposals.num_labels(), labels));
    }
    if (proposals.scores.rows() != proposals.size()) {
        throw ValidationError(fmt::format("image '{}': {} boxes but {} score rows", proposals.image_id,
                                          proposals.size(), proposals.scores.rows()));
    }
}

void check_weights(const CrfWeights& w) {
    if (!(w.pairwise >= 0.0) || !std::isfinite(w.pairwise) || !(w.global >= 0.0) || !std::isfinite(w.global)) {
        throw ValidationError(fmt::format("CRF weights must be finite and >= 0, got omega_p={} omega_g={}",
                                          w.pairwise, w.global));
    }
}

// In-place softmax of a row of log-potentials.
void softmax(std::span<double> row) {
    const double hi = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double& v : row) {
        v = std::exp(v - hi);
        z += v;
    }
    for (double& v : row) v /= z;
}

// -phi_u(l) - omega_g phi_g(l) for every kept proposal and label.
Matrix local_log_potentials(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                            const CrfWeights& weights, double score_clamp) {
    const std::size_t n = proposals.size();
    const auto labels = static_cast<std::size_t>(model.pairwise.num_labels());
    const auto global = global_potentials(model.scene, feature);
    Matrix out(n, labels);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < labels; ++l) {
            out(i, l) = -unary_potential(proposals, i, static_cast<Label>(l), score_clamp) -
                        weights.global * global[l];
        }
    }
    return out;
}

ProposalSet subset(const ProposalSet& proposals, const std::vector<std::size_t>& kept) {
    ProposalSet out;
    out.image_id = proposals.image_id;
    out.frame = proposals.frame;
    out.scores = Matrix(kept.size(), proposals.scores.cols());
    out.boxes.reserve(kept.size());
    for (std::size_t r = 0; r < kept.size(); ++r) {
        out.boxes.push_back(proposals.boxes[kept[r]]);
        const auto src = proposals.scores.row(kept[r]);
        std::copy(src.begin(), src.end(), out.scores.row(r).begin());
    }
    return out;
}

// Neighbor visiting order that depends only on box and score values, so the
// floating-point sums (and hence Q) are bit-identical under any input permutation.
std::vector<std::size_t> canonical_order(const ProposalSet& p) {
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    auto key = [&](std::size_t i) {
        const auto& b = p.boxes[i];
        return std::array<double, 4>{b.x_min, b.y_min, b.x_max, b.y_max};
    };
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto ka = key(a), kb = key(b);
        if (ka != kb) return ka < kb;
        const auto ra = p.scores.row(a), rb = p.scores.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    return idx;
}

bool rows_normalized(const Matrix& q) {
    for (std::size_t i = 0; i < q.rows(); ++i) {
        const auto row = q.row(i);
        if (std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) > 1e-9) return false;
    }
    return true;
}

}  // namespace

void InferenceConfig::validate() const {
    if (max_iterations < 1) throw ValidationError(fmt::format("max iterations must be >= 1, got {}", max_iterations));
    if (!(tolerance > 0.0 && tolerance < 1.0)) {
        throw ValidationError(fmt::format("tolerance must lie in (0, 1), got {}", tolerance));
    }
    if (!(damping >= 0.0 && damping < 1.0)) throw ValidationError(fmt::format("damping must lie in [0, 1), got {}", damping));
    if (!(score_clamp > 0.0 && score_clamp < 1.0)) {
        throw ValidationError(fmt::format("score clamp must lie in (0, 1), got {}", score_clamp));
    }
    if (max_proposals < 1) throw ValidationError("max proposals must be >= 1");
}

std::vector<std::vector<SpatialRelation>> relation_matrix(const std::vector<BoundingBox>& boxes,
                                                          const ImageFrame& frame) {
    const std::size_t n = boxes.size();
    std::vector<std::vector<SpatialRelation>> rel(n, std::vector<SpatialRelation>(n, SpatialRelation::FarApart));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            rel[i][j] = classify_relation(boxes[i], boxes[j], frame);
            rel[j][i] = inverse_relation(rel[i][j]);
        }
    }
    return rel;
}

double unary_potential(const ProposalSet& proposals, std::size_t i, Label label, double score_clamp) {
    return -std::log(std::max(proposals.scores(i, static_cast<std::size_t>(label)), score_clamp));
}

double energy(const ProposalSet& proposals, std::span<const Label> labeling, const CrfModel& model,
              const SceneFeature& feature, const CrfWeights& weights, double score_clamp, UpdateRule pair_rule) {
    check_label_spaces(proposals, model);
    const std::size_t n = proposals.size();
    if (labeling.size() != n) {
        throw ValidationError(fmt::format("labeling has {} entries for {} proposals", labeling.size(), n));
    }
    double unary = 0.0;
    double global = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        unary += unary_potential(proposals, i, labeling[i], score_clamp);
        global += global_potential(model.scene, feature, labeling[i]);
    }
    double pairwise = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (pair_rule == UpdateRule::ExcludeSelf && labeling[i] == labeling[j]) continue;
            const auto r = classify_relation(proposals.boxes[i], proposals.boxes[j], proposals.frame);
            pairwise += pairwise_potential(model.pairwise, labeling[i], labeling[j], r);
        }
    }
    return unary + weights.pairwise * pairwise + weights.global * global;
}

std::vector<std::size_t> select_proposals(const ProposalSet& proposals, std::size_t limit) {
    std::vector<std::size_t> idx(proposals.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() <= limit) return idx;

    std::vector<double> best(proposals.size(), 0.0);
    for (std::size_t i = 0; i < proposals.size(); ++i) {
        const auto row = proposals.scores.row(i);
        if (row.size() > 1) best[i] = *std::max_element(row.begin() + 1, row.end());
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return best[a] > best[b]; });
    idx.resize(limit);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Matrix initial_marginals(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                         const CrfWeights& weights, double score_clamp) {
    check_label_spaces(proposals, model);
    Matrix q = local_log_potentials(proposals, model, feature, weights, score_clamp);
    for (std::size_t i = 0; i < q.rows(); ++i) softmax(q.row(i));
    return q;
}

MarginalSet mean_field_infer(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                             const CrfWeights& weights, const InferenceConfig& config,
                             const IterationObserver& observer) {
    config.validate();
    check_weights(weights);
    check_label_spaces(proposals, model);

    MarginalSet result;
    result.kept = select_proposals(proposals, config.max_proposals);
    const ProposalSet kept = subset(proposals, result.kept);
    const std::size_t n = kept.size();
    const auto labels = static_cast<std::size_t>(model.pairwise.num_labels());

    const Matrix local = local_log_potentials(kept, model, feature, weights, config.score_clamp);
    Matrix q = local;
    for (std::size_t i = 0; i < n; ++i) softmax(q.row(i));

    // Without neighbors or pairwise weight the initialization is already the fixed point.
    if (n < 2 || weights.pairwise == 0.0) {
        result.q = std::move(q);
        return result;
    }

    // rel[j][i]: known object j, proposal i
    std::vector<std::vector<SpatialRelation>> rel(n, std::vector<SpatialRelation>(n, SpatialRelation::FarApart));
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i)
            if (i != j) rel[j][i] = classify_relation(kept.boxes[j], kept.boxes[i], kept.frame);
    const auto order = canonical_order(kept);
    const bool exclude_self = config.update_rule == UpdateRule::ExcludeSelf;
    Matrix next(n, labels);
    std::vector<double> field(labels);

    result.converged = false;
    for (int iter = 1; iter <= config.max_iterations; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            std::fill(field.begin(), field.end(), 0.0);
            for (std::size_t j : order) {
                if (j == i) continue;
                const SpatialRelation r = rel[j][i];
                const auto qj = q.row(j);
                for (std::size_t target = 0; target < labels; ++target) {
                    double acc = 0.0;
                    for (std::size_t l = 0; l < labels; ++l) {
                        if (exclude_self && l == target) continue;
                        acc += qj[l] * model.pairwise.potential(static_cast<Label>(l), static_cast<Label>(target), r);
                    }
                    field[target] += acc;
                }
            }
            auto row = next.row(i);
            for (std::size_t l = 0; l < labels; ++l) row[l] = local(i, l) - weights.pairwise * field[l];
            softmax(row);
        }

        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto fresh = next.row(i);
            auto cur = q.row(i);
            for (std::size_t l = 0; l < labels; ++l) {
                const double blended = (1.0 - config.damping) * fresh[l] + config.damping * cur[l];
                change = std::max(change, std::abs(blended - cur[l]));
                cur[l] = blended;
            }
        }
        // kept in release builds on purpose, the cost is O(NK) per sweep
        if (!rows_normalized(q)) throw std::logic_error("mean-field iterate left the simplex");
        result.iterations = iter;
        result.max_change = change;
        if (observer) observer(iter, q);
        if (change < config.tolerance) {
            result.converged = true;
            break;
        }
    }
    result.q = std::move(q);
    return result;
}

ExactMarginals exact_marginals(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                               const CrfWeights& weights, double score_clamp, UpdateRule pair_rule) {
    check_label_spaces(proposals, model);
    const std::size_t n = proposals.size();
    const bool exclude_self = pair_rule == UpdateRule::ExcludeSelf;
    const auto labels = static_cast<std::size_t>(model.pairwise.num_labels());
    const double configs = std::pow(static_cast<double>(labels), static_cast<double>(n));
    if (configs > kMaxEnumeratedConfigurations) {
        throw ValidationError(fmt::format("exact enumeration needs (K+1)^N = {}^{} configurations, limit is {}",
                                          labels, n, kMaxEnumeratedConfigurations));
    }

    ExactMarginals out{Matrix(n, labels, 0.0), 0.0};
    if (n == 0) return out;

    const Matrix local = local_log_potentials(proposals, model, feature, weights, score_clamp);
    const auto rel = relation_matrix(proposals.boxes, proposals.frame);
    const auto total = static_cast<std::size_t>(configs);

    std::vector<double> neg_energy(total);
    std::vector<Label> x(n, 0);
    for (std::size_t c = 0; c < total; ++c) {
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e += local(i, static_cast<std::size_t>(x[i]));
        double pair = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                if (exclude_self && x[i] == x[j]) continue;
                pair += model.pairwise.potential(x[i], x[j], rel[i][j]);
            }
        neg_energy[c] = e - weights.pairwise * pair;
        for (std::size_t i = 0; i < n; ++i) {
            if (++x[i] < static_cast<Label>(labels)) break;
            x[i] = 0;
        }
    }

    const double hi = *std::max_element(neg_energy.begin(), neg_energy.end());
    double z = 0.0;
    std::fill(x.begin(), x.end(), 0);
    for (std::size_t c = 0; c < total; ++c) {
        const double w = std::exp(neg_energy[c] - hi);
        z += w;
        for (std::size_t i = 0; i < n; ++i) out.marginals(i, static_cast<std::size_t>(x[i])) += w;
        for (std::size_t i = 0; i < n; ++i) {
            if (++x[i] < static_cast<Label>(labels)) break;
            x[i] = 0;
        }
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t l = 0; l < labels; ++l) out.marginals(i, l) /= z;
    out.log_partition = hi + std::log(z);
    return out;
}

RescoreResult rescore(const ProposalSet& proposals, const CrfModel& model, const SceneFeature& feature,
                      const CrfWeights& weights, const InferenceConfig& config) {
    MarginalSet m = mean_field_infer(proposals, model, feature, weights, config);
    RescoreResult out;
    out.proposals = subset(proposals, m.kept);
    out.proposals.scores = std::move(m.q);
    out.source_indices = std::move(m.kept);
    out.iterations = m.iterations;
    out.converged = m.converged;
    out.max_change = m.max_change;
    return out;
}

}  // namespace ctxcrf
