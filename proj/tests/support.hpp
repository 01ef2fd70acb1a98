#pragma once

// Shared generators and brute-force oracles for the test binaries.
// The oracles deliberately avoid energy()/exact_marginals() so they can check them.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "ctxcrf/context_stats.hpp"
#include "ctxcrf/crf.hpp"
#include "ctxcrf/scene_prior.hpp"
#include "ctxcrf/types.hpp"

namespace testsupport {

using namespace ctxcrf;

inline CategorySpace make_categories(int k) {
    std::vector<std::string> names;
    for (int i = 1; i <= k; ++i) names.push_back("c" + std::to_string(i));
    return CategorySpace(names);
}

inline BoundingBox random_box(const ImageFrame& frame, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> ux(0.0, frame.width), uy(0.0, frame.height);
    for (;;) {
        double x0 = ux(rng), x1 = ux(rng), y0 = uy(rng), y1 = uy(rng);
        if (x0 > x1) std::swap(x0, x1);
        if (y0 > y1) std::swap(y0, y1);
        if (x1 - x0 > 1e-3 && y1 - y0 > 1e-3) return {x0, y0, x1, y1};
    }
}

// Score rows drawn from a flat Dirichlet, with an occasional exact zero to
// exercise the clamp.
inline ProposalSet random_proposals(std::size_t n, int k, std::mt19937_64& rng, const std::string& id = "img") {
    ProposalSet p;
    p.image_id = id;
    p.frame = {640.0, 480.0};
    p.scores = Matrix(n, static_cast<std::size_t>(k + 1));
    std::exponential_distribution<double> ex(1.0);
    std::bernoulli_distribution zero(0.1);
    for (std::size_t i = 0; i < n; ++i) {
        p.boxes.push_back(random_box(p.frame, rng));
        double sum = 0.0;
        for (int l = 0; l <= k; ++l) {
            const double v = zero(rng) ? 0.0 : ex(rng);
            p.scores(i, static_cast<std::size_t>(l)) = v;
            sum += v;
        }
        if (sum == 0.0) {
            p.scores(i, 0) = 1.0;
            sum = 1.0;
        }
        for (int l = 0; l <= k; ++l) p.scores(i, static_cast<std::size_t>(l)) /= sum;
    }
    return p;
}

inline PairwiseModel random_pairwise(int k, std::mt19937_64& rng) {
    const auto n = static_cast<std::size_t>(k + 1);
    std::vector<std::uint64_t> counts(n * n * kNumRelations, 0);
    std::uniform_int_distribution<int> c(0, 20);
    for (int a = 1; a <= k; ++a)
        for (int b = 1; b <= k; ++b)
            for (int r = 0; r < kNumRelations; ++r)
                counts[(static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)) * kNumRelations +
                       static_cast<std::size_t>(r)] = static_cast<std::uint64_t>(c(rng));
    // mirror every count onto (b, a, inverse r) so the tensor is directed-consistent,
    // as every learned tensor is
    auto sym = counts;
    for (int a = 1; a <= k; ++a)
        for (int b = 1; b <= k; ++b)
            for (auto r : kAllRelations) {
                const auto src = (static_cast<std::size_t>(a) * n + static_cast<std::size_t>(b)) * kNumRelations +
                                 static_cast<std::size_t>(relation_index(r));
                const auto dst = (static_cast<std::size_t>(b) * n + static_cast<std::size_t>(a)) * kNumRelations +
                                 static_cast<std::size_t>(relation_index(inverse_relation(r)));
                sym[dst] += counts[src];
            }
    counts = sym;
    std::uniform_real_distribution<double> alpha(0.1, 2.0);
    return PairwiseModel::from_counts(make_categories(k), alpha(rng), counts);
}

inline ScenePriorModel random_scene(int k, std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(k) * dim), b(static_cast<std::size_t>(k));
    for (auto& v : w) v = g(rng);
    for (auto& v : b) v = g(rng);
    return ScenePriorModel(make_categories(k), dim, 1e-3, w, b);
}

inline SceneFeature random_feature(std::size_t dim, std::mt19937_64& rng, const std::string& id = "img") {
    std::normal_distribution<double> g(0.0, 1.0);
    SceneFeature f{id, std::vector<double>(dim)};
    for (auto& v : f.values) v = g(rng);
    return f;
}

// -- oracle ---------------------------------------------------------------

inline double oracle_global(const ScenePriorModel& scene, const SceneFeature& f, Label l) {
    if (l == kBackground) return std::log(2.0);
    double z = scene.bias(l);
    const auto w = scene.weights(l);
    for (std::size_t d = 0; d < f.values.size(); ++d) z += w[d] * f.values[d];
    double p = 1.0 / (1.0 + std::exp(-z));
    p = std::min(std::max(p, 1e-6), 1.0 - 1e-6);
    return -std::log(p);
}

inline double oracle_energy(const ProposalSet& p, const std::vector<Label>& x, const PairwiseModel& pw,
                            const ScenePriorModel& scene, const SceneFeature& f, const CrfWeights& w,
                            bool skip_equal_labels = false) {
    double e = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        e += -std::log(std::max(p.scores(i, static_cast<std::size_t>(x[i])), 1e-6));
        e += w.global * oracle_global(scene, f, x[i]);
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            if (skip_equal_labels && x[i] == x[j]) continue;
            const SpatialRelation r = classify_relation(p.boxes[i], p.boxes[j], p.frame);
            e += w.pairwise * -std::log(pw.likelihood(x[i], x[j], r));
        }
    }
    return e;
}

// Joint Gibbs distribution over all (K+1)^N labelings, index = sum x_i (K+1)^i.
inline std::vector<double> oracle_joint(const ProposalSet& p, const PairwiseModel& pw, const ScenePriorModel& scene,
                                        const SceneFeature& f, const CrfWeights& w, bool skip_equal_labels = false) {
    const int labels = pw.num_labels();
    const std::size_t n = p.size();
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= static_cast<std::size_t>(labels);
    std::vector<double> energies(total);
    std::vector<Label> x(n, 0);
    double lowest = INFINITY;
    for (std::size_t c = 0; c < total; ++c) {
        std::size_t rest = c;
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<Label>(rest % static_cast<std::size_t>(labels));
            rest /= static_cast<std::size_t>(labels);
        }
        energies[c] = oracle_energy(p, x, pw, scene, f, w, skip_equal_labels);
        lowest = std::min(lowest, energies[c]);
    }
    double z = 0.0;
    for (auto& e : energies) z += (e = std::exp(-(e - lowest)));
    for (auto& e : energies) e /= z;
    return energies;
}

inline Matrix oracle_marginals(const std::vector<double>& joint, std::size_t n, int labels) {
    Matrix m(n, static_cast<std::size_t>(labels));
    for (std::size_t c = 0; c < joint.size(); ++c) {
        std::size_t rest = c;
        for (std::size_t i = 0; i < n; ++i) {
            m(i, rest % static_cast<std::size_t>(labels)) += joint[c];
            rest /= static_cast<std::size_t>(labels);
        }
    }
    return m;
}

// KL(Q || P) for a product distribution Q against the enumerated joint P.
inline double kl_product(const Matrix& q, const std::vector<double>& joint) {
    const std::size_t n = q.rows();
    const std::size_t labels = q.cols();
    double kl = 0.0;
    for (std::size_t c = 0; c < joint.size(); ++c) {
        std::size_t rest = c;
        double qx = 1.0;
        for (std::size_t i = 0; i < n; ++i) {
            qx *= q(i, rest % labels);
            rest /= labels;
        }
        if (qx > 0.0) kl += qx * (std::log(qx) - std::log(joint[c]));
    }
    return kl;
}

inline double row_sum(const Matrix& m, std::size_t r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v;
    return s;
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        std::random_device rd;
        path = std::filesystem::temp_directory_path() /
               ("ctxcrf_" + tag + "_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

}  // namespace testsupport
