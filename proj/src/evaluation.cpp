#include "ctxcrf/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "ctxcrf/errors.hpp"
#include "parallel.hpp"

namespace ctxcrf {

std::vector<DetectionRecord> extract_detections(std::span<const ProposalSet> images, double threshold) {
    std::vector<DetectionRecord> out;
    for (const auto& image : images) {
        for (std::size_t i = 0; i < image.size(); ++i) {
            const auto row = image.scores.row(i);
            for (std::size_t l = 1; l < row.size(); ++l) {
                if (row[l] >= threshold) {
                    out.push_back({image.image_id, i, static_cast<Label>(l), image.boxes[i], row[l]});
                }
            }
        }
    }
    return out;
}

namespace {

struct TruthBox {
    BoundingBox box;
    bool difficult = false;
    bool matched = false;
};

double eleven_point(const std::vector<double>& recall, const std::vector<double>& precision) {
    double sum = 0.0;
    for (int t = 0; t <= 10; ++t) {
        const double level = t / 10.0;
        double best = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i) {
            if (recall[i] >= level) best = std::max(best, precision[i]);
        }
        sum += best;
    }
    return sum / 11.0;
}

double all_points(const std::vector<double>& recall, const std::vector<double>& precision) {
    std::vector<double> mrec{0.0};
    std::vector<double> mpre{0.0};
    mrec.insert(mrec.end(), recall.begin(), recall.end());
    mpre.insert(mpre.end(), precision.begin(), precision.end());
    mrec.push_back(1.0);
    mpre.push_back(0.0);
    for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
    double ap = 0.0;
    for (std::size_t i = 1; i < mrec.size(); ++i) {
        if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
    }
    return ap;
}

}  // namespace

ClassResult average_precision(std::span<const DetectionRecord> detections, const GroundTruthSet& truth, Label label,
                              const EvalConfig& config) {
    ClassResult result;
    result.label = label;

    std::map<std::string, std::vector<TruthBox>, std::less<>> boxes;
    for (const auto& image : truth) {
        auto& slot = boxes[image.image_id];
        for (const auto& obj : image.objects) {
            if (obj.label != label) continue;
            slot.push_back({obj.box, obj.difficult, false});
            if (!obj.difficult) ++result.ground_truth;
        }
    }

    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (const auto& d : detections) {
        if (d.label != label) {
            throw ValidationError(fmt::format("average_precision for class {} received a record of class {}", label,
                                              d.label));
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& da = detections[a];
        const auto& db = detections[b];
        if (da.confidence != db.confidence) return da.confidence > db.confidence;
        if (da.image_id != db.image_id) return da.image_id < db.image_id;
        return da.proposal_index < db.proposal_index;
    });

    std::vector<double> recall;
    std::vector<double> precision;
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t idx : order) {
        const auto& det = detections[idx];
        TruthBox* best = nullptr;
        double best_iou = -1.0;
        if (auto it = boxes.find(det.image_id); it != boxes.end()) {
            for (auto& gt : it->second) {
                const double overlap = iou(det.box, gt.box);
                if (overlap > best_iou) {
                    best_iou = overlap;
                    best = &gt;
                }
            }
        }
        if (best != nullptr && best_iou >= config.iou_threshold) {
            if (best->difficult) continue;
            if (!best->matched) {
                best->matched = true;
                ++tp;
            } else {
                ++fp;
            }
        } else {
            ++fp;
        }
        if (result.ground_truth > 0) {
            recall.push_back(static_cast<double>(tp) / static_cast<double>(result.ground_truth));
            precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
        }
    }
    result.true_positives = tp;
    result.false_positives = fp;
    if (result.ground_truth == 0) return result;

    result.average_precision = config.interpolation == Interpolation::ElevenPoint ? eleven_point(recall, precision)
                                                                                   : all_points(recall, precision);
    return result;
}

EvalReport mean_average_precision(std::span<const DetectionRecord> detections, const GroundTruthSet& truth,
                                  int num_foreground, const EvalConfig& config) {
    EvalReport report;
    report.iou_threshold = config.iou_threshold;
    report.interpolation = config.interpolation;

    std::vector<std::vector<DetectionRecord>> per_class(static_cast<std::size_t>(num_foreground));
    for (const auto& d : detections) {
        if (d.label < 1 || d.label > num_foreground) {
            throw ValidationError(fmt::format("image '{}': detection label {} outside 1..{}", d.image_id, d.label,
                                              num_foreground));
        }
        per_class[static_cast<std::size_t>(d.label - 1)].push_back(d);
    }

    double sum = 0.0;
    int defined = 0;
    for (Label k = 1; k <= num_foreground; ++k) {
        report.classes.push_back(average_precision(per_class[static_cast<std::size_t>(k - 1)], truth, k, config));
        if (const auto& ap = report.classes.back().average_precision) {
            sum += *ap;
            ++defined;
        }
    }
    report.mean_ap = defined > 0 ? sum / defined : 0.0;
    return report;
}

std::string format_report_table(const EvalReport& report, const CategorySpace& categories) {
    std::vector<std::string> header;
    std::vector<std::string> values;
    for (const auto& c : report.classes) {
        header.push_back(categories.name(c.label));
        values.push_back(c.average_precision ? fmt::format("{:.1f}", 100.0 * *c.average_precision) : "-");
    }
    header.emplace_back("mAP");
    values.push_back(fmt::format("{:.1f}", 100.0 * report.mean_ap));

    std::string top;
    std::string bottom;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::size_t width = std::max(header[i].size(), values[i].size());
        top += fmt::format("{:>{}}", header[i], width + (i == 0 ? 0 : 2));
        bottom += fmt::format("{:>{}}", values[i], width + (i == 0 ? 0 : 2));
    }
    return top + "\n" + bottom + "\n";
}

std::vector<RescoreResult> rescore_all(std::span<const ProposalSet> images, std::span<const SceneFeature> features,
                                       const CrfModel& model, const CrfWeights& weights,
                                       const InferenceConfig& config, unsigned threads) {
    if (images.size() != features.size()) {
        throw ValidationError(
            fmt::format("{} images but {} scene features after alignment", images.size(), features.size()));
    }
    std::vector<RescoreResult> out(images.size());
    detail::parallel_for(images.size(), threads,
                         [&](std::size_t i) { out[i] = rescore(images[i], model, features[i], weights, config); });
    return out;
}

std::vector<double> grid_values(double start, double stop, double step) {
    if (!std::isfinite(start) || !std::isfinite(stop) || !std::isfinite(step)) {
        throw ValidationError("grid bounds must be finite");
    }
    if (!(step > 0.0)) throw ValidationError(fmt::format("grid step must be positive, got {}", step));
    if (stop < start) throw ValidationError(fmt::format("grid stop {} is below start {}", stop, start));
    std::vector<double> values;
    for (std::size_t i = 0;; ++i) {
        double v = start + static_cast<double>(i) * step;
        if (v > stop + 1e-12) break;
        // 7 * 0.1 is 0.7000000000000001; snap so CSVs print the decimal the user typed
        if (std::abs(v) < 1e3) v = std::round(v * 1e12) / 1e12;
        values.push_back(v);
    }
    return values;
}

SweepTable sweep_weights(const Dataset& data, const CrfModel& model, std::span<const double> omega_p,
                         std::span<const double> omega_g, const InferenceConfig& inference, const EvalConfig& eval,
                         unsigned threads) {
    if (omega_p.empty() || omega_g.empty()) throw ValidationError("weight grid is empty");
    const int k = model.pairwise.categories().num_foreground();

    SweepTable table;
    table.points.resize(omega_p.size() * omega_g.size());
    for (std::size_t a = 0; a < omega_p.size(); ++a)
        for (std::size_t b = 0; b < omega_g.size(); ++b)
            table.points[a * omega_g.size() + b].weights = {omega_p[a], omega_g[b]};

    detail::parallel_for(table.points.size(), threads, [&](std::size_t p) {
        auto& point = table.points[p];
        const auto rescored = rescore_all(data.images, data.features, model, point.weights, inference, 1);
        std::vector<ProposalSet> sets;
        sets.reserve(rescored.size());
        for (const auto& r : rescored) sets.push_back(r.proposals);
        const auto dets = extract_detections(sets, eval.score_threshold);
        point.report = mean_average_precision(dets, data.truth, k, eval);
    });

    for (std::size_t p = 1; p < table.points.size(); ++p) {
        const auto& cand = table.points[p];
        const auto& best = table.points[table.best];
        const bool better =
            cand.report.mean_ap > best.report.mean_ap ||
            (cand.report.mean_ap == best.report.mean_ap &&
             (cand.weights.pairwise < best.weights.pairwise ||
              (cand.weights.pairwise == best.weights.pairwise && cand.weights.global < best.weights.global)));
        if (better) table.best = p;
    }
    return table;
}

std::string sweep_csv(const SweepTable& table, const CategorySpace& categories) {
    std::string out = "omega_p,omega_g";
    for (const auto& name : categories.names()) out += ",AP_" + name;
    out += ",mAP\n";
    for (const auto& point : table.points) {
        out += fmt::format("{},{}", point.weights.pairwise, point.weights.global);
        for (const auto& c : point.report.classes) {
            out += ",";
            if (c.average_precision) out += fmt::format("{}", *c.average_precision);
        }
        out += fmt::format(",{}\n", point.report.mean_ap);
    }
    return out;
}

}  // namespace ctxcrf
