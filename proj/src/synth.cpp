#include "ctxcrf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "ctxcrf/crf.hpp"
#include "ctxcrf/errors.hpp"

namespace ctxcrf {

namespace {

// Offsets (x_min, y_min, x_max, y_max) around an anchor center. The anchor is
// 40x40 and every target stays within 44 px of the center, so groups in
// neighboring slots never touch as long as slots are more than 88 px apart.
constexpr std::array<double, 4> kAnchorOffsets = {-20, -20, 20, 20};

std::array<double, 4> target_offsets(SpatialRelation r) {
    switch (r) {
        case SpatialRelation::DisjointAbove: return {-15, -44, 15, -32};
        case SpatialRelation::DisjointBelow: return {-15, 32, 15, 44};
        case SpatialRelation::DisjointLeft: return {-44, -15, -32, 15};
        case SpatialRelation::DisjointRight: return {32, -15, 44, 15};
        case SpatialRelation::Inside: return {-26, -26, 26, 26};
        case SpatialRelation::Outside: return {-8, -8, 8, 8};
        case SpatialRelation::OverlapAbove: return {-10, -30, 10, -12};
        case SpatialRelation::OverlapBelow: return {-10, 12, 10, 30};
        case SpatialRelation::OverlapLeft: return {-30, -10, -12, 10};
        case SpatialRelation::OverlapRight: return {12, -10, 30, 10};
        case SpatialRelation::FarApart: break;
    }
    throw ValidationError("planted rules cannot use far_apart");
}

BoundingBox offset_box(const std::array<double, 4>& o, double cx, double cy) {
    return {cx + o[0], cy + o[1], cx + o[2], cy + o[3]};
}

struct Element {
    Label label;
    BoundingBox box;
    double probability;  // of being present given its anchor is present
};

double slot_center_x(const SynthConfig& c, int slot) {
    return c.frame.width * (2.0 * slot + 1.0) / (2.0 * c.num_slots);
}

// Anchor of category k at `slot` followed by every rule target it may spawn.
std::vector<Element> group_elements(const SynthConfig& c, Label k, int slot) {
    const double cx = slot_center_x(c, slot);
    const double cy = 0.5 * c.frame.height;
    std::vector<Element> out{{k, canonical_anchor_box(cx, cy), 1.0}};
    for (const auto& rule : c.rules) {
        if (rule.anchor == k) out.push_back({rule.target, canonical_target_box(rule.relation, cx, cy), rule.probability});
    }
    return out;
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

BoundingBox canonical_anchor_box(double cx, double cy) { return offset_box(kAnchorOffsets, cx, cy); }

BoundingBox canonical_target_box(SpatialRelation relation, double cx, double cy) {
    return offset_box(target_offsets(relation), cx, cy);
}

void SynthConfig::validate() const {
    const int k = categories.num_foreground();
    if (k < 1) throw ValidationError("synth config needs at least one category");
    if (num_scenes < 0) throw ValidationError("num_scenes must be nonnegative");
    if (!frame.valid()) throw ValidationError("synth frame must have positive size");
    if (num_slots < 1) throw ValidationError("num_slots must be positive");
    const auto prob_ok = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob_ok(unary_noise)) throw ValidationError("unary_noise must lie in [0, 1]");
    if (!prob_ok(background_share)) throw ValidationError("background_share must lie in [0, 1]");
    if (!(feature_noise >= 0.0) || !std::isfinite(feature_noise)) throw ValidationError("feature_noise must be >= 0");
    if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw ValidationError("jitter must be >= 0");
    if (max_placement_attempts < 1) throw ValidationError("max_placement_attempts must be positive");

    const auto label_ok = [k](Label l) { return l >= 1 && l <= k; };
    std::set<std::pair<Label, int>> seen;
    for (const auto& rule : rules) {
        if (!label_ok(rule.anchor) || !label_ok(rule.target)) throw ValidationError("planted rule label out of range");
        if (!prob_ok(rule.probability)) throw ValidationError("planted rule probability must lie in [0, 1]");
        if (rule.relation == SpatialRelation::FarApart) throw ValidationError("planted rules cannot use far_apart");
        if (!seen.insert({rule.anchor, relation_index(rule.relation)}).second) {
            throw ValidationError(fmt::format("two planted rules for anchor '{}' share relation '{}'",
                                              categories.name(rule.anchor), relation_name(rule.relation)));
        }
    }
    std::set<Label> confused;
    for (const auto& [a, b] : confusions) {
        if (!label_ok(a) || !label_ok(b) || a == b) throw ValidationError("confusion pair labels invalid");
        if (!confused.insert(a).second || !confused.insert(b).second) {
            throw ValidationError("a category may appear in at most one confusion pair");
        }
    }
    if (archetypes.empty()) throw ValidationError("synth config needs at least one scene archetype");
    const std::size_t dim = archetypes.front().feature_mean.size();
    if (dim == 0) throw ValidationError("archetype feature_mean must be nonempty");
    double total_weight = 0.0;
    for (const auto& a : archetypes) {
        if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) throw ValidationError("archetype weight must be >= 0");
        total_weight += a.weight;
        if (a.anchor_probability.size() != static_cast<std::size_t>(k)) {
            throw ValidationError(fmt::format("archetype '{}' has {} anchor probabilities, expected {}", a.name,
                                              a.anchor_probability.size(), k));
        }
        if (!std::all_of(a.anchor_probability.begin(), a.anchor_probability.end(), prob_ok)) {
            throw ValidationError(fmt::format("archetype '{}' has an anchor probability outside [0, 1]", a.name));
        }
        const auto possible = std::count_if(a.anchor_probability.begin(), a.anchor_probability.end(),
                                            [](double p) { return p > 0.0; });
        if (possible > num_slots) {
            throw ValidationError(fmt::format("archetype '{}' can place {} anchors but there are {} slots", a.name,
                                              possible, num_slots));
        }
        if (a.feature_mean.size() != dim) throw ValidationError("archetype feature means differ in dimension");
    }
    if (!(total_weight > 0.0)) throw ValidationError("archetype weights must not all be zero");
}

SynthConfig SynthConfig::default_config() {
    using R = SpatialRelation;
    SynthConfig c;
    c.categories = CategorySpace({"boat", "train", "water", "rail"});
    constexpr Label boat = 1, train = 2, water = 3, rail = 4;
    c.rules = {
        {boat, water, R::OverlapBelow, 0.8},
        {boat, boat, R::DisjointRight, 0.3},
        {train, rail, R::DisjointBelow, 0.8},
        {train, train, R::OverlapRight, 0.3},
        {water, boat, R::OverlapAbove, 0.5},
        {rail, train, R::DisjointAbove, 0.5},
    };
    c.confusions = {{boat, train}, {water, rail}};
    c.archetypes = {
        {"harbor", 1.0, {0.9, 0.1, 0.3, 0.05}, {1.0, -1.0, 0.5, 0.0, 0.0, 0.0}},
        {"station", 1.0, {0.1, 0.9, 0.05, 0.3}, {-1.0, 1.0, 0.0, 0.5, 0.0, 0.0}},
    };
    return c;
}

SynthDataset generate(const SynthConfig& config) {
    config.validate();
    const int k = config.categories.num_foreground();
    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> weights;
    for (const auto& a : config.archetypes) weights.push_back(a.weight);

    std::vector<Label> partner(static_cast<std::size_t>(k) + 1, kBackground);
    for (const auto& [a, b] : config.confusions) {
        partner[static_cast<std::size_t>(a)] = b;
        partner[static_cast<std::size_t>(b)] = a;
    }
    const double leak_lo = std::max(0.0, 2.0 * config.unary_noise - 1.0);
    const double leak_hi = std::min(1.0, 2.0 * config.unary_noise);

    SynthDataset out;
    for (int s = 0; s < config.num_scenes; ++s) {
        const std::string id = fmt::format("synth_{:05d}", s);
        const auto arch_index =
            static_cast<std::size_t>(std::discrete_distribution<int>(weights.begin(), weights.end())(rng));
        const auto& arch = config.archetypes[arch_index];

        std::vector<Label> anchors;
        for (Label c = 1; c <= k; ++c) {
            if (uniform01(rng) < arch.anchor_probability[static_cast<std::size_t>(c - 1)]) anchors.push_back(c);
        }
        std::vector<int> slots(static_cast<std::size_t>(config.num_slots));
        std::iota(slots.begin(), slots.end(), 0);
        std::shuffle(slots.begin(), slots.end(), rng);

        std::vector<Element> elements;
        for (std::size_t a = 0; a < anchors.size(); ++a) {
            for (const auto& e : group_elements(config, anchors[a], slots[a])) {
                if (e.probability >= 1.0 || uniform01(rng) < e.probability) elements.push_back(e);
            }
        }

        std::vector<BoundingBox> canonical;
        for (const auto& e : elements) canonical.push_back(e.box);
        const auto wanted = relation_matrix(canonical, config.frame);

        std::vector<BoundingBox> boxes;
        bool placed = false;
        for (int attempt = 0; attempt < config.max_placement_attempts && !placed; ++attempt) {
            boxes.clear();
            bool ok = true;
            for (const auto& b : canonical) {
                BoundingBox j{b.x_min + config.jitter * (2.0 * uniform01(rng) - 1.0),
                              b.y_min + config.jitter * (2.0 * uniform01(rng) - 1.0),
                              b.x_max + config.jitter * (2.0 * uniform01(rng) - 1.0),
                              b.y_max + config.jitter * (2.0 * uniform01(rng) - 1.0)};
                j = clip_to_frame(j, config.frame);
                ok = ok && j.valid();
                boxes.push_back(j);
            }
            placed = ok && relation_matrix(boxes, config.frame) == wanted;
        }

        std::vector<double> feature(arch.feature_mean.size());
        for (std::size_t d = 0; d < feature.size(); ++d) {
            feature[d] = arch.feature_mean[d] + config.feature_noise * gauss(rng);
        }
        std::vector<double> leaks(elements.size());
        for (auto& m : leaks) m = leak_lo + (leak_hi - leak_lo) * uniform01(rng);

        if (!placed) {
            out.skipped.push_back(id);
            continue;
        }

        SynthScene scene;
        scene.archetype = arch_index;
        scene.truth.image_id = id;
        scene.truth.frame = config.frame;
        scene.proposals.image_id = id;
        scene.proposals.frame = config.frame;
        scene.proposals.scores = Matrix(elements.size(), static_cast<std::size_t>(k) + 1, 0.0);
        scene.feature = {id, std::move(feature)};
        for (std::size_t i = 0; i < elements.size(); ++i) {
            const Label truth = elements[i].label;
            scene.truth.objects.push_back({truth, boxes[i], false});
            scene.proposals.boxes.push_back(boxes[i]);
            scene.true_labels.push_back(truth);

            const double m = leaks[i];
            auto row = scene.proposals.scores.row(i);
            row[static_cast<std::size_t>(truth)] = 1.0 - m;
            const Label conf = partner[static_cast<std::size_t>(truth)];
            if (conf != kBackground) {
                row[static_cast<std::size_t>(conf)] += (1.0 - config.background_share) * m;
                row[kBackground] += config.background_share * m;
            } else {
                row[kBackground] += m;
            }
        }
        out.scenes.push_back(std::move(scene));
    }
    return out;
}

PairwiseModel plant_oracle_stats(const SynthConfig& config) {
    config.validate();
    const int k = config.categories.num_foreground();
    const auto n = static_cast<std::size_t>(k) + 1;
    std::vector<double> expected(n * n * kNumRelations, 0.0);
    const auto add = [&](const Element& u, const Element& v, double weight) {
        const auto r = classify_relation(u.box, v.box, config.frame);
        expected[(static_cast<std::size_t>(u.label) * n + static_cast<std::size_t>(v.label)) * kNumRelations +
                 static_cast<std::size_t>(relation_index(r))] += weight * u.probability * v.probability;
    };

    double total_weight = 0.0;
    for (const auto& a : config.archetypes) total_weight += a.weight;
    const int slots = config.num_slots;
    const double slot_pair_prob = slots > 1 ? 1.0 / (slots * (slots - 1.0)) : 0.0;

    for (const auto& arch : config.archetypes) {
        const double pi = arch.weight / total_weight;
        for (Label a = 1; a <= k; ++a) {
            const double qa = arch.anchor_probability[static_cast<std::size_t>(a - 1)];
            if (qa == 0.0) continue;
            // Within-group layouts do not depend on the slot.
            const auto group = group_elements(config, a, 0);
            for (std::size_t u = 0; u < group.size(); ++u)
                for (std::size_t v = 0; v < group.size(); ++v)
                    if (u != v) add(group[u], group[v], pi * qa);

            for (Label b = 1; b <= k; ++b) {
                const double qb = arch.anchor_probability[static_cast<std::size_t>(b - 1)];
                if (b == a || qb == 0.0) continue;
                for (int s = 0; s < slots; ++s) {
                    for (int t = 0; t < slots; ++t) {
                        if (s == t) continue;
                        const auto ga = group_elements(config, a, s);
                        const auto gb = group_elements(config, b, t);
                        for (const auto& u : ga)
                            for (const auto& v : gb) add(u, v, pi * qa * qb * slot_pair_prob);
                    }
                }
            }
        }
    }

    const double k2 = static_cast<double>(k) * k;
    std::vector<double> likelihood(expected.size(), 1.0 / k2);
    for (int r = 0; r < kNumRelations; ++r) {
        double total = 0.0;
        for (std::size_t a = 1; a < n; ++a)
            for (std::size_t b = 1; b < n; ++b) total += expected[(a * n + b) * kNumRelations + r];
        if (total <= 0.0) continue;
        for (std::size_t a = 1; a < n; ++a)
            for (std::size_t b = 1; b < n; ++b) {
                const std::size_t i = (a * n + b) * kNumRelations + r;
                likelihood[i] = expected[i] / total;
            }
    }
    return PairwiseModel::reference(config.categories, std::move(likelihood));
}

}  // namespace ctxcrf
