#include "ctxcrf/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ctxcrf/context_stats.hpp"
#include "ctxcrf/crf.hpp"
#include "ctxcrf/errors.hpp"
#include "ctxcrf/evaluation.hpp"
#include "ctxcrf/formats.hpp"
#include "ctxcrf/scene_prior.hpp"
#include "ctxcrf/synth.hpp"

namespace ctxcrf {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct InferenceFlags {
    int iterations = 20;
    double tolerance = 1e-4;
    double damping = 0.5;
    std::string update_rule = "all";
    std::size_t max_proposals = 300;

    InferenceConfig config() const {
        InferenceConfig c;
        c.max_iterations = iterations;
        c.tolerance = tolerance;
        c.damping = damping;
        c.max_proposals = max_proposals;
        c.update_rule = update_rule == "exclude-self" ? UpdateRule::ExcludeSelf : UpdateRule::AllLabels;
        c.validate();
        return c;
    }
};

struct EvalFlags {
    double iou = 0.5;
    std::string interp = "11pt";
    double threshold = 0.01;

    EvalConfig config() const {
        if (!(iou > 0.0 && iou <= 1.0)) throw ValidationError(fmt::format("--iou must lie in (0, 1], got {}", iou));
        return {iou, interp == "all" ? Interpolation::AllPoints : Interpolation::ElevenPoint, threshold};
    }
};

void add_inference_flags(CLI::App* cmd, InferenceFlags& f) {
    cmd->add_option("--iters", f.iterations, "maximum mean-field iterations")->capture_default_str();
    cmd->add_option("--tol", f.tolerance, "convergence tolerance on max marginal change")->capture_default_str();
    cmd->add_option("--damping", f.damping, "damping factor in [0, 1)")->capture_default_str();
    cmd->add_option("--update-rule", f.update_rule, "context field rule")
        ->check(CLI::IsMember({"all", "exclude-self"}))
        ->capture_default_str();
    cmd->add_option("--max-proposals", f.max_proposals, "proposals kept per image")->capture_default_str();
}

void add_eval_flags(CLI::App* cmd, EvalFlags& f) {
    cmd->add_option("--iou", f.iou, "IoU threshold for a true positive")->capture_default_str();
    cmd->add_option("--interp", f.interp, "AP interpolation")
        ->check(CLI::IsMember({"11pt", "all"}))
        ->capture_default_str();
    cmd->add_option("--threshold", f.threshold, "minimum marginal for a detection")->capture_default_str();
}

std::vector<double> parse_grid(const std::string& text, const std::string& flag) {
    std::vector<double> parts;
    std::size_t start = 0;
    for (;;) {
        const std::size_t colon = text.find(':', start);
        const std::string piece = text.substr(start, colon == std::string::npos ? std::string::npos : colon - start);
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(piece, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != piece.size()) {
            throw ValidationError(fmt::format("{}: '{}' is not of the form start:stop:step", flag, text));
        }
        parts.push_back(value);
        if (colon == std::string::npos) break;
        start = colon + 1;
    }
    if (parts.size() != 3) throw ValidationError(fmt::format("{}: '{}' is not of the form start:stop:step", flag, text));
    try {
        return grid_values(parts[0], parts[1], parts[2]);
    } catch (const ValidationError& e) {
        throw ValidationError(fmt::format("{}: {}", flag, e.what()));
    }
}

void require_same(const CategorySpace& a, const CategorySpace& b, const std::string& what) {
    if (a != b) throw ValidationError(fmt::format("category lists differ between {}", what));
}

void check_detection_width(const DetectionsFile& dets, const CategorySpace& cats, const std::string& path) {
    if (dets.categories) require_same(*dets.categories, cats, fmt::format("'{}' and the models", path));
    for (const auto& image : dets.images) {
        if (image.size() > 0 && image.num_labels() != cats.num_labels()) {
            throw ValidationError(fmt::format("{}: image '{}' has {} score columns, expected {}", path, image.image_id,
                                              image.num_labels(), cats.num_labels()));
        }
    }
}

unsigned default_threads() { return std::max(1u, std::thread::hardware_concurrency()); }

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Context rescoring of object detections with a fully connected CRF"};
    app.require_subcommand(1);
    app.name("ctxcrf");

    // learn-pairwise
    std::string lp_annotations, lp_categories, lp_out;
    double lp_alpha = 1.0;
    auto* learn = app.add_subcommand("learn-pairwise", "learn co-occurrence/layout statistics from annotations");
    learn->add_option("--annotations", lp_annotations, "annotations JSON-lines file")->required();
    learn->add_option("--categories", lp_categories, "JSON document with a 'categories' array")->required();
    learn->add_option("--alpha", lp_alpha, "add-alpha smoothing constant")->capture_default_str();
    learn->add_option("--out", lp_out, "output pairwise model JSON")->required();

    // train-scene
    std::string ts_features, ts_annotations, ts_out;
    SceneTrainOptions ts_opts;
    auto* train = app.add_subcommand("train-scene", "train the logistic-regression scene prior");
    train->add_option("--features", ts_features, "scene features JSON-lines file")->required();
    train->add_option("--annotations", ts_annotations, "annotations JSON-lines file")->required();
    train->add_option("--lambda", ts_opts.lambda, "L2 regularization on weights")->capture_default_str();
    train->add_option("--epochs", ts_opts.epochs, "full-batch gradient steps")->capture_default_str();
    train->add_option("--lr", ts_opts.learning_rate, "learning rate")->capture_default_str();
    train->add_option("--out", ts_out, "output scene prior JSON")->required();

    // rescore
    std::string rs_detections, rs_pairwise, rs_scene, rs_features, rs_out;
    CrfWeights rs_weights;
    InferenceFlags rs_inf;
    unsigned rs_threads = default_threads();
    auto* rescore_cmd = app.add_subcommand("rescore", "rescore detections by mean-field inference");
    rescore_cmd->add_option("--detections", rs_detections, "detections JSON-lines file")->required();
    rescore_cmd->add_option("--pairwise", rs_pairwise, "pairwise model JSON")->required();
    rescore_cmd->add_option("--scene-prior", rs_scene, "scene prior JSON")->required();
    rescore_cmd->add_option("--features", rs_features, "scene features JSON-lines file")->required();
    rescore_cmd->add_option("--omega-p", rs_weights.pairwise, "pairwise weight")->required();
    rescore_cmd->add_option("--omega-g", rs_weights.global, "global weight")->required();
    add_inference_flags(rescore_cmd, rs_inf);
    rescore_cmd->add_option("--threads", rs_threads, "worker threads")->capture_default_str();
    rescore_cmd->add_option("--out", rs_out, "output detections JSON-lines file")->required();

    // evaluate
    std::string ev_detections, ev_annotations, ev_out;
    EvalFlags ev_flags;
    auto* evaluate = app.add_subcommand("evaluate", "VOC-style AP/mAP of detections");
    evaluate->add_option("--detections", ev_detections, "detections JSON-lines file")->required();
    evaluate->add_option("--annotations", ev_annotations, "annotations JSON-lines file")->required();
    add_eval_flags(evaluate, ev_flags);
    evaluate->add_option("--out", ev_out, "output report JSON")->required();

    // sweep
    std::string sw_detections, sw_annotations, sw_pairwise, sw_scene, sw_features, sw_out, sw_pgrid, sw_ggrid;
    InferenceFlags sw_inf;
    EvalFlags sw_eval;
    unsigned sw_threads = default_threads();
    auto* sweep = app.add_subcommand("sweep", "evaluate a grid of (omega_p, omega_g)");
    sweep->add_option("--detections", sw_detections, "detections JSON-lines file")->required();
    sweep->add_option("--annotations", sw_annotations, "annotations JSON-lines file")->required();
    sweep->add_option("--pairwise", sw_pairwise, "pairwise model JSON")->required();
    sweep->add_option("--scene-prior", sw_scene, "scene prior JSON")->required();
    sweep->add_option("--features", sw_features, "scene features JSON-lines file")->required();
    sweep->add_option("--omega-p-grid", sw_pgrid, "pairwise weights start:stop:step")->required();
    sweep->add_option("--omega-g-grid", sw_ggrid, "global weights start:stop:step")->required();
    add_inference_flags(sweep, sw_inf);
    add_eval_flags(sweep, sw_eval);
    sweep->add_option("--threads", sw_threads, "worker threads")->capture_default_str();
    sweep->add_option("--out", sw_out, "output CSV")->required();

    // synth
    std::string sy_config, sy_out_dir;
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic benchmark");
    synth->add_option("--config", sy_config, "synth config JSON")->required();
    synth->add_option("--out-dir", sy_out_dir, "output directory")->required();

    std::string command = "ctxcrf";
    const auto status = [&](json s) { out << s.dump() << "\n"; };
    const auto fail = [&](const char* kind, const std::string& message, int code) {
        err << "error: " << message << "\n";
        status({{"command", command}, {"status", "error"}, {"kind", kind}, {"message", message}});
        return code;
    };

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        if (!args.empty()) command = args.front();
        return fail("usage", e.what(), kExitValidation);
    }

    try {
        if (learn->parsed()) {
            command = "learn-pairwise";
            const CategorySpace cats = read_categories(lp_categories);
            const auto ann = read_annotations(lp_annotations, cats);
            const auto result = learn_pairwise(ann.images, cats, lp_alpha);
            for (const auto& w : result.warnings) err << "warning: " << w << "\n";
            write_pairwise_model(lp_out, result.model);
            status({{"command", command},
                    {"status", "ok"},
                    {"images", result.images},
                    {"ordered_pairs", result.ordered_pairs},
                    {"warnings", result.warnings},
                    {"out", lp_out}});
        } else if (train->parsed()) {
            command = "train-scene";
            const auto ann = read_annotations(ts_annotations);
            const auto feats = read_features(ts_features);
            std::map<std::string, const SceneFeature*> by_id;
            for (const auto& f : feats.features) by_id.emplace(f.image_id, &f);
            std::vector<SceneFeature> aligned;
            std::vector<std::vector<bool>> presence;
            for (const auto& image : ann.images) {
                const auto it = by_id.find(image.image_id);
                if (it == by_id.end()) {
                    throw ValidationError(
                        fmt::format("{}: image '{}' has no scene feature", ts_features, image.image_id));
                }
                aligned.push_back(*it->second);
                presence.push_back(presence_from_annotations(image, ann.categories.num_foreground()));
            }
            const auto result = train_scene_prior(aligned, presence, ann.categories, ts_opts);
            json degenerate = json::array();
            for (Label k : result.report.degenerate_categories) {
                degenerate.push_back(ann.categories.name(k));
                err << "warning: category '" << ann.categories.name(k) << "' is present in all or no images\n";
            }
            write_scene_prior(ts_out, result.model);
            status({{"command", command},
                    {"status", "ok"},
                    {"images", aligned.size()},
                    {"final_loss", result.report.loss_history.back()},
                    {"degenerate_categories", std::move(degenerate)},
                    {"out", ts_out}});
        } else if (rescore_cmd->parsed()) {
            command = "rescore";
            const InferenceConfig cfg = rs_inf.config();
            const auto pairwise = read_pairwise_model(rs_pairwise);
            const auto scene = read_scene_prior(rs_scene);
            require_same(pairwise.categories(), scene.categories(), "the pairwise model and the scene prior");
            const auto dets = read_detections(rs_detections);
            check_detection_width(dets, pairwise.categories(), rs_detections);
            const auto feats = align_features(dets.images, read_features(rs_features).features);
            const CrfModel model{pairwise, scene};
            const auto results = rescore_all(dets.images, feats, model, rs_weights, cfg, rs_threads);

            std::vector<ProposalSet> sets;
            std::vector<RescoreMeta> meta;
            std::size_t converged = 0;
            for (const auto& r : results) {
                sets.push_back(r.proposals);
                meta.push_back({r.source_indices, r.iterations, r.converged, r.max_change});
                converged += r.converged ? 1 : 0;
            }
            write_detections(rs_out, sets, pairwise.categories(), &meta);
            status({{"command", command},
                    {"status", "ok"},
                    {"images", sets.size()},
                    {"converged_images", converged},
                    {"dropped_boxes", dets.dropped_boxes},
                    {"out", rs_out}});
        } else if (evaluate->parsed()) {
            command = "evaluate";
            const EvalConfig cfg = ev_flags.config();
            const auto ann = read_annotations(ev_annotations);
            const auto dets = read_detections(ev_detections);
            check_detection_width(dets, ann.categories, ev_detections);
            const auto records = extract_detections(dets.images, cfg.score_threshold);
            const auto report = mean_average_precision(records, ann.images, ann.categories.num_foreground(), cfg);
            err << format_report_table(report, ann.categories);
            write_report(ev_out, report, ann.categories);
            status({{"command", command}, {"status", "ok"}, {"mAP", report.mean_ap}, {"out", ev_out}});
        } else if (sweep->parsed()) {
            command = "sweep";
            const InferenceConfig inf = sw_inf.config();
            const EvalConfig ev = sw_eval.config();
            const auto pgrid = parse_grid(sw_pgrid, "--omega-p-grid");
            const auto ggrid = parse_grid(sw_ggrid, "--omega-g-grid");
            const auto pairwise = read_pairwise_model(sw_pairwise);
            const auto scene = read_scene_prior(sw_scene);
            require_same(pairwise.categories(), scene.categories(), "the pairwise model and the scene prior");
            const auto ann = read_annotations(sw_annotations);
            require_same(ann.categories, pairwise.categories(), "the annotations and the models");
            const auto dets = read_detections(sw_detections);
            check_detection_width(dets, pairwise.categories(), sw_detections);
            const auto feats = align_features(dets.images, read_features(sw_features).features);
            const CrfModel model{pairwise, scene};
            const Dataset data{dets.images, feats, ann.images};
            const auto table = sweep_weights(data, model, pgrid, ggrid, inf, ev, sw_threads);
            write_text_atomic(sw_out, sweep_csv(table, pairwise.categories()));

            const auto& best = table.points[table.best];
            json status_line{{"command", command},
                             {"status", "ok"},
                             {"points", table.points.size()},
                             {"best", {{"omega_p", best.weights.pairwise},
                                       {"omega_g", best.weights.global},
                                       {"mAP", best.report.mean_ap}}},
                             {"out", sw_out}};
            for (const auto& p : table.points) {
                if (p.weights.pairwise == 0.0 && p.weights.global == 0.0) status_line["baseline_mAP"] = p.report.mean_ap;
            }
            status(std::move(status_line));
        } else if (synth->parsed()) {
            command = "synth";
            const SynthConfig cfg = synth_config_from_json(read_json_file(sy_config));
            const auto data = generate(cfg);
            const fs::path dir(sy_out_dir);
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec) throw IoError(fmt::format("{}: cannot create directory: {}", dir.string(), ec.message()));

            GroundTruthSet truth;
            std::vector<ProposalSet> proposals;
            std::vector<SceneFeature> features;
            for (const auto& s : data.scenes) {
                truth.push_back(s.truth);
                proposals.push_back(s.proposals);
                features.push_back(s.feature);
            }
            write_detections(dir / "detections.jsonl", proposals, cfg.categories);
            write_annotations(dir / "annotations.jsonl", truth, cfg.categories);
            write_features(dir / "features.jsonl", features);
            json manifest{{"version", kFormatVersion},
                          {"kind", "ctxcrf.synth_manifest"},
                          {"seed", cfg.seed},
                          {"categories", cfg.categories.names()},
                          {"scenes", data.scenes.size()},
                          {"skipped", data.skipped},
                          {"files", {{"detections", "detections.jsonl"},
                                     {"annotations", "annotations.jsonl"},
                                     {"features", "features.jsonl"}}},
                          {"config", synth_config_to_json(cfg)}};
            write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
            status({{"command", command},
                    {"status", "ok"},
                    {"scenes", data.scenes.size()},
                    {"skipped", data.skipped.size()},
                    {"out_dir", sy_out_dir}});
        }
    } catch (const ValidationError& e) {
        return fail("validation", e.what(), kExitValidation);
    } catch (const IoError& e) {
        return fail("io", e.what(), kExitIo);
    } catch (const fs::filesystem_error& e) {
        return fail("io", e.what(), kExitIo);
    }
    return kExitOk;
}

}  // namespace ctxcrf
