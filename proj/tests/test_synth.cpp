#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ctxcrf/context_stats.hpp"
#include "ctxcrf/errors.hpp"
#include "ctxcrf/synth.hpp"

using namespace ctxcrf;

namespace {

GroundTruthSet truth_of(const SynthDataset& d) {
    GroundTruthSet t;
    for (const auto& s : d.scenes) t.push_back(s.truth);
    return t;
}

double max_entry_error(const PairwiseModel& a, const PairwiseModel& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.likelihoods().size(); ++i)
        worst = std::max(worst, std::abs(a.likelihoods()[i] - b.likelihoods()[i]));
    return worst;
}

}  // namespace

TEST_CASE("default fixture shape") {
    const auto c = SynthConfig::default_config();
    CHECK(c.categories.num_foreground() == 4);
    CHECK(c.num_scenes == 200);
    CHECK(c.unary_noise == 0.45);
    CHECK(c.seed == 7);
    const auto d = generate(c);
    CHECK(d.scenes.size() + d.skipped.size() == 200);
    CHECK(d.scenes.front().truth.image_id == "synth_00000");
}

TEST_CASE("generation is reproducible from the seed") {
    auto c = SynthConfig::default_config();
    c.num_scenes = 30;
    const auto a = generate(c), b = generate(c);
    REQUIRE(a.scenes.size() == b.scenes.size());
    for (std::size_t i = 0; i < a.scenes.size(); ++i) {
        CHECK(a.scenes[i].proposals == b.scenes[i].proposals);
        CHECK(a.scenes[i].feature == b.scenes[i].feature);
        CHECK(a.scenes[i].truth == b.scenes[i].truth);
    }
    c.seed = 8;
    CHECK_FALSE(generate(c).scenes[0].feature == a.scenes[0].feature);
}

TEST_CASE("score rows lie on the simplex and leak only to the partner and background") {
    const auto c = SynthConfig::default_config();
    for (const auto& s : generate(c).scenes) {
        for (std::size_t i = 0; i < s.proposals.size(); ++i) {
            const auto row = s.proposals.scores.row(i);
            double sum = 0.0;
            for (double v : row) sum += v;
            CHECK(std::abs(sum - 1.0) <= 1e-12);
            const Label t = s.true_labels[i];
            CHECK(row[static_cast<std::size_t>(t)] >= 0.1 - 1e-12);  // leak at most 2 * 0.45
            int nonzero = 0;
            for (double v : row) nonzero += v > 0.0;
            CHECK(nonzero <= 3);
        }
    }
}

TEST_CASE("noiseless unaries: baseline argmax is the true label") {
    auto c = SynthConfig::default_config();
    c.unary_noise = 0.0;
    for (const auto& s : generate(c).scenes)
        for (std::size_t i = 0; i < s.proposals.size(); ++i)
            CHECK(s.proposals.scores(i, static_cast<std::size_t>(s.true_labels[i])) == 1.0);
}

TEST_CASE("zero feature noise gives the archetype means") {
    auto c = SynthConfig::default_config();
    c.feature_noise = 0.0;
    for (const auto& s : generate(c).scenes) CHECK(s.feature.values == c.archetypes[s.archetype].feature_mean);
}

TEST_CASE("jittered boxes keep the canonical relations") {
    const auto c = SynthConfig::default_config();
    // a boat anchor with its water target below
    const auto anchor = canonical_anchor_box(100, 300);
    CHECK(classify_relation(anchor, canonical_target_box(SpatialRelation::OverlapBelow, 100, 300), c.frame) ==
          SpatialRelation::OverlapBelow);
    for (auto r : kAllRelations) {
        if (r == SpatialRelation::FarApart) continue;
        CAPTURE(relation_name(r));
        CHECK(classify_relation(anchor, canonical_target_box(r, 100, 300), c.frame) == r);
    }
    CHECK_THROWS_AS(canonical_target_box(SpatialRelation::FarApart, 0, 0), ValidationError);
}

TEST_CASE("oracle tensor is normalized and directed-consistent") {
    const auto c = SynthConfig::default_config();
    const auto oracle = plant_oracle_stats(c);
    const int k = 4;
    for (auto r : kAllRelations) {
        double sum = 0.0;
        for (Label a = 1; a <= k; ++a)
            for (Label b = 1; b <= k; ++b) {
                sum += oracle.likelihood(a, b, r);
                CHECK(std::abs(oracle.likelihood(a, b, r) - oracle.likelihood(b, a, inverse_relation(r))) <= 1e-12);
            }
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }
}

TEST_CASE("single certain rule: learned entry converges to the planted value") {
    SynthConfig c;
    c.categories = CategorySpace({"a", "b"});
    c.rules = {{1, 2, SpatialRelation::DisjointBelow, 1.0}};
    c.archetypes = {{"only", 1.0, {1.0, 0.0}, {0.0}}};
    c.num_scenes = 2000;
    const auto d = generate(c);
    const auto learned = learn_pairwise(truth_of(d), c.categories).model;
    const auto oracle = plant_oracle_stats(c);
    CHECK(oracle.likelihood(1, 2, SpatialRelation::DisjointBelow) == 1.0);
    CHECK(std::abs(learned.likelihood(1, 2, SpatialRelation::DisjointBelow) - 1.0) <= 0.05);
}

TEST_CASE("no rules: learned tensor is close to uniform") {
    SynthConfig c;
    c.categories = CategorySpace({"a", "b"});
    c.archetypes = {{"only", 1.0, {0.5, 0.5}, {0.0}}};
    // Only cross-slot pairs exist here, about a quarter of the scenes. At 2000
    // scenes the left/right split has sd ~0.023, so 0.05 would sit at 2 sigma;
    // 8000 scenes puts it past 4.
    c.num_scenes = 8000;
    const auto learned = learn_pairwise(truth_of(generate(c)), c.categories).model;
    const auto oracle = plant_oracle_stats(c);
    CHECK(max_entry_error(learned, oracle) <= 0.05);
}

TEST_CASE("default fixture at 2000 scenes matches the oracle") {
    auto c = SynthConfig::default_config();
    c.num_scenes = 2000;
    const auto learned = learn_pairwise(truth_of(generate(c)), c.categories).model;
    CHECK(max_entry_error(learned, plant_oracle_stats(c)) <= 0.05);
}

TEST_CASE("invalid configs are rejected") {
    auto c = SynthConfig::default_config();
    c.rules.push_back({1, 2, SpatialRelation::OverlapBelow, 0.5});
    CHECK_THROWS_AS(generate(c), ValidationError);
    c = SynthConfig::default_config();
    c.rules.push_back({1, 2, SpatialRelation::FarApart, 0.5});
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = SynthConfig::default_config();
    c.confusions.push_back({1, 3});
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = SynthConfig::default_config();
    c.unary_noise = 1.5;
    CHECK_THROWS_AS(c.validate(), ValidationError);
    c = SynthConfig::default_config();
    c.num_slots = 2;
    CHECK_THROWS_AS(c.validate(), ValidationError);
}
