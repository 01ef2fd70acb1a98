#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <random>

#include "ctxcrf/errors.hpp"
#include "ctxcrf/formats.hpp"
#include "support.hpp"

using namespace ctxcrf;
using namespace testsupport;

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("empty detections file") {
    TempDir dir("fmt");
    write_file(dir / "d.jsonl", "");
    const auto d = read_detections(dir / "d.jsonl");
    CHECK(d.images.empty());
    CHECK_FALSE(d.categories.has_value());
}

TEST_CASE("near-simplex rows are renormalized, far ones rejected") {
    TempDir dir("fmt");
    write_file(dir / "ok.jsonl",
               R"({"image_id":"a","width":100,"height":100,"boxes":[[0,0,10,10]],"scores":[[0.5005,0.3,0.2]]})"
               "\n");
    const auto d = read_detections(dir / "ok.jsonl");
    REQUIRE(d.images.size() == 1);
    CHECK(d.renormalized_rows == 1);
    CHECK(row_sum(d.images[0].scores, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(d.images[0].scores(0, 0) == doctest::Approx(0.5005 / 1.0005));

    write_file(dir / "bad.jsonl",
               R"({"image_id":"a","width":100,"height":100,"boxes":[[0,0,10,10]],"scores":[[1.0,0.3,0.2]]})"
               "\n");
    CHECK_THROWS_WITH_AS(read_detections(dir / "bad.jsonl"), doctest::Contains("bad.jsonl:1:"), ValidationError);
    CHECK_THROWS_WITH_AS(read_detections(dir / "bad.jsonl"), doctest::Contains("1.5"), ValidationError);
}

TEST_CASE("boxes are clipped and empty ones dropped") {
    TempDir dir("fmt");
    write_file(dir / "d.jsonl",
               R"({"image_id":"a","width":100,"height":100,"boxes":[[-5,-5,10,10],[200,200,300,300]],)"
               R"("scores":[[0.5,0.5],[0.5,0.5]]})"
               "\n");
    const auto d = read_detections(dir / "d.jsonl");
    CHECK(d.dropped_boxes == 1);
    REQUIRE(d.images[0].size() == 1);
    CHECK(d.images[0].boxes[0] == BoundingBox{0, 0, 10, 10});
}

TEST_CASE("malformed detection records name the line") {
    TempDir dir("fmt");
    write_file(dir / "d.jsonl", "\n{\"image_id\":\"a\",\"width\":10,\"height\":10,\"boxes\":[[0,0,1,1]]}\n");
    CHECK_THROWS_WITH_AS(read_detections(dir / "d.jsonl"), doctest::Contains("d.jsonl:2: missing field 'scores'"),
                         ValidationError);
    write_file(dir / "v.jsonl", R"({"format":"ctxcrf.detections","version":9})" "\n");
    CHECK_THROWS_WITH_AS(read_detections(dir / "v.jsonl"), doctest::Contains("unsupported version"), ValidationError);
    write_file(dir / "j.jsonl", "{not json}\n");
    CHECK_THROWS_AS(read_detections(dir / "j.jsonl"), ValidationError);
    CHECK_THROWS_AS(read_detections(dir / "missing.jsonl"), IoError);
}

TEST_CASE("detections round-trip bit-exactly") {
    TempDir dir("fmt");
    std::mt19937_64 rng(101);
    std::vector<ProposalSet> imgs{random_proposals(7, 3, rng, "x"), random_proposals(0, 3, rng, "y")};
    imgs[1].scores = Matrix(0, 4);
    const auto cats = make_categories(3);
    write_detections(dir / "d.jsonl", imgs, cats);
    const auto back = read_detections(dir / "d.jsonl");
    REQUIRE(back.categories == cats);
    REQUIRE(back.images.size() == 2);
    CHECK(back.images[0] == imgs[0]);
    CHECK(back.images[1].size() == 0);
    CHECK(back.renormalized_rows <= 7);
}

TEST_CASE("annotations: names, difficult flag and unknown categories") {
    TempDir dir("fmt");
    const auto cats = CategorySpace({"cat", "dog"});
    GroundTruthSet truth{{"a", {100, 80}, {{1, {0, 0, 10, 10}, false}, {2, {5, 5, 50, 50}, true}}}, {"b", {10, 10}, {}}};
    write_annotations(dir / "a.jsonl", truth, cats);
    const auto back = read_annotations(dir / "a.jsonl");
    CHECK(back.categories == cats);
    CHECK(back.images == truth);
    CHECK(read_annotations(dir / "a.jsonl", cats).images == truth);
    CHECK_THROWS_AS(read_annotations(dir / "a.jsonl", CategorySpace({"cat", "cow"})), ValidationError);

    write_file(dir / "u.jsonl", R"({"format":"ctxcrf.annotations","version":1,"categories":["cat"]})"
                                "\n"
                                R"({"image_id":"a","width":10,"height":10,"objects":[{"label":"zebra","box":[0,0,1,1]}]})"
                                "\n");
    CHECK_THROWS_WITH_AS(read_annotations(dir / "u.jsonl"), doctest::Contains("zebra"), ValidationError);

    write_file(dir / "n.jsonl", R"({"image_id":"a","width":10,"height":10,"objects":[]})" "\n");
    CHECK_THROWS_AS(read_annotations(dir / "n.jsonl"), ValidationError);
    CHECK(read_annotations(dir / "n.jsonl", cats).images.size() == 1);
}

TEST_CASE("features: dimension checks and alignment") {
    TempDir dir("fmt");
    std::vector<SceneFeature> feats{{"a", {1.0, 2.0}}, {"b", {0.1, -3.0}}};
    write_features(dir / "f.jsonl", feats);
    const auto back = read_features(dir / "f.jsonl");
    CHECK(back.dim == 2);
    CHECK(back.features == feats);

    write_file(dir / "bad.jsonl", R"({"image_id":"a","feature":[1,2]})" "\n" R"({"image_id":"b","feature":[1]})" "\n");
    CHECK_THROWS_WITH_AS(read_features(dir / "bad.jsonl"), doctest::Contains("dimension 1, expected 2"),
                         ValidationError);

    std::vector<ProposalSet> imgs(2);
    imgs[0].image_id = "b";
    imgs[1].image_id = "a";
    const auto aligned = align_features(imgs, feats);
    CHECK(aligned[0].image_id == "b");
    CHECK(aligned[1].values == feats[0].values);
    imgs[1].image_id = "zzz";
    CHECK_THROWS_WITH_AS(align_features(imgs, feats), doctest::Contains("zzz"), ValidationError);
}

TEST_CASE("wrong feature dimension is reported with both sizes at use") {
    const ScenePriorModel m(make_categories(2), 3, 0.0);
    CHECK_THROWS_WITH_AS(global_potentials(m, {"q", {1.0}}), doctest::Contains("dimension 1, model expects 3"),
                         ValidationError);
}

TEST_CASE("pairwise model round-trips bit-exactly") {
    TempDir dir("fmt");
    std::mt19937_64 rng(103);
    for (int t = 0; t < 5; ++t) {
        const auto m = random_pairwise(3, rng);
        write_pairwise_model(dir / "p.json", m);
        const auto back = read_pairwise_model(dir / "p.json");
        CHECK(back.likelihoods() == m.likelihoods());
        CHECK(back.counts() == m.counts());
        CHECK(back.alpha() == m.alpha());
        CHECK(back.categories() == m.categories());
    }
}

TEST_CASE("scene prior round-trips bit-exactly") {
    TempDir dir("fmt");
    std::mt19937_64 rng(107);
    const auto m = random_scene(3, 4, rng);
    write_scene_prior(dir / "s.json", m);
    const auto back = read_scene_prior(dir / "s.json");
    CHECK(back.all_weights() == m.all_weights());
    CHECK(back.all_biases() == m.all_biases());
    CHECK(back.lambda() == m.lambda());
    CHECK(back.dim() == 4);
}

TEST_CASE("model documents are validated") {
    std::mt19937_64 rng(109);
    auto doc = pairwise_to_json(random_pairwise(2, rng));
    doc["version"] = 2;
    CHECK_THROWS_WITH_AS(pairwise_from_json(doc), doctest::Contains("unsupported version"), ValidationError);
    doc = pairwise_to_json(random_pairwise(2, rng));
    doc["relations"][0] = "nowhere";
    CHECK_THROWS_AS(pairwise_from_json(doc), ValidationError);
    auto sdoc = scene_prior_to_json(random_scene(2, 2, rng));
    sdoc["weights"][0].push_back(1.0);
    CHECK_THROWS_AS(scene_prior_from_json(sdoc), ValidationError);
    CHECK_THROWS_AS(scene_prior_from_json(pairwise_to_json(random_pairwise(2, rng))), ValidationError);
}

TEST_CASE("report json") {
    EvalReport rep;
    rep.classes = {{1, 1.0, 1, 0, 1}, {2, std::nullopt, 0, 2, 0}};
    rep.mean_ap = 1.0;
    const auto j = report_to_json(rep, make_categories(2));
    CHECK(j["mAP"] == 1.0);
    CHECK(j["interpolation"] == "11pt");
    CHECK(j["classes"][1]["ap"].is_null());
    CHECK(j["classes"][0]["name"] == "c1");
}

TEST_CASE("synth config json round-trip and overrides") {
    const auto def = SynthConfig::default_config();
    const auto back = synth_config_from_json(synth_config_to_json(def));
    CHECK(synth_config_to_json(back) == synth_config_to_json(def));

    const auto tweaked = synth_config_from_json(nlohmann::json{{"num_scenes", 5}, {"seed", 99}});
    CHECK(tweaked.num_scenes == 5);
    CHECK(tweaked.seed == 99);
    CHECK(tweaked.rules.size() == def.rules.size());

    CHECK_THROWS_AS(synth_config_from_json(nlohmann::json{{"categories", {"x", "y"}}}), ValidationError);
    CHECK_THROWS_AS(synth_config_from_json(nlohmann::json{{"num_scenes", "many"}}), ValidationError);
    auto bad = synth_config_to_json(def);
    bad["rules"][0]["relation"] = "sideways";
    CHECK_THROWS_WITH_AS(synth_config_from_json(bad), doctest::Contains("sideways"), ValidationError);
}

TEST_CASE("category documents") {
    TempDir dir("fmt");
    write_file(dir / "c.json", R"({"categories":["a","b"]})");
    CHECK(read_categories(dir / "c.json") == CategorySpace({"a", "b"}));
    write_file(dir / "x.json", R"({"names":["a"]})");
    CHECK_THROWS_AS(read_categories(dir / "x.json"), ValidationError);
}

TEST_CASE("atomic writes leave no temporary behind") {
    TempDir dir("fmt");
    write_text_atomic(dir / "t.txt", "hello\n");
    CHECK(slurp(dir / "t.txt") == "hello\n");
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path)) ++entries;
    CHECK(entries == 1);
    CHECK_THROWS_AS(write_text_atomic(dir / "no_such_dir" / "t.txt", "x"), IoError);
}
