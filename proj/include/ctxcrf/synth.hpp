#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctxcrf/context_stats.hpp"
#include "ctxcrf/geometry.hpp"
#include "ctxcrf/types.hpp"

namespace ctxcrf {

/// When an anchor of category `anchor` is placed, an object of category
/// `target` appears with `probability` at layout `relation` from the anchor,
/// i.e. classify_relation(anchor_box, target_box) == relation.
struct PlantedRule {
    Label anchor = 1;
    Label target = 1;
    SpatialRelation relation = SpatialRelation::DisjointBelow;
    double probability = 1.0;
};

struct SceneArchetype {
    std::string name;
    double weight = 1.0;
    /// Per foreground category, probability of an anchor instance (size K).
    std::vector<double> anchor_probability;
    /// Mean scene feature (size D, shared by all archetypes).
    std::vector<double> feature_mean;
};

/// Scenes are built from anchor groups. Every present anchor takes a distinct
/// slot on a horizontal row across the frame; fired rules place their targets
/// at a fixed offset per relation around the anchor. Boxes are then jittered,
/// and a jitter draw is kept only if every pairwise relation is unchanged.
struct SynthConfig {
    CategorySpace categories;
    int num_scenes = 200;
    ImageFrame frame{800.0, 600.0};
    int num_slots = 5;
    std::vector<PlantedRule> rules;
    /// Symmetric confusable pairs; a category appears in at most one pair.
    std::vector<std::pair<Label, Label>> confusions;
    /// Mean probability mass moved off the true label (rho).
    double unary_noise = 0.45;
    /// Fraction of the leaked mass that goes to background instead of the confusable label.
    double background_share = 0.2;
    std::vector<SceneArchetype> archetypes;
    double feature_noise = 1.0;  // sigma
    double jitter = 2.0;         // pixels, uniform per coordinate
    int max_placement_attempts = 100;
    std::uint64_t seed = 7;

    /// Throws ValidationError describing the first violated constraint.
    void validate() const;

    /// K=4 harbor/station fixture used by the acceptance suite.
    static SynthConfig default_config();
};

struct SynthScene {
    ImageAnnotations truth;
    ProposalSet proposals;
    std::vector<Label> true_labels;  // per proposal
    SceneFeature feature;
    std::size_t archetype = 0;
};

struct SynthDataset {
    std::vector<SynthScene> scenes;
    /// Scene ids dropped after exhausting placement attempts.
    std::vector<std::string> skipped;
};

SynthDataset generate(const SynthConfig& config);

/// Expected-count likelihood tensor implied by the generator: for every
/// relation, E[count(a, b, r)] normalized over foreground pairs (uniform when a
/// relation never occurs), background cells neutral. Uses the unjittered layout,
/// which the placement check guarantees the samples share.
PairwiseModel plant_oracle_stats(const SynthConfig& config);

/// Unjittered box of a rule target with `relation` to an anchor centered at (cx, cy).
BoundingBox canonical_target_box(SpatialRelation relation, double cx, double cy);
BoundingBox canonical_anchor_box(double cx, double cy);

}  // namespace ctxcrf
