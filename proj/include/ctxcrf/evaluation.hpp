#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxcrf/crf.hpp"
#include "ctxcrf/types.hpp"

namespace ctxcrf {

enum class Interpolation {
    ElevenPoint,  // VOC2007
    AllPoints,    // VOC2010+ area under the precision envelope
};

struct EvalConfig {
    double iou_threshold = 0.5;
    Interpolation interpolation = Interpolation::ElevenPoint;
    /// Minimum marginal for a (proposal, label) to become a detection.
    double score_threshold = 0.01;
};

struct DetectionRecord {
    std::string image_id;
    std::size_t proposal_index = 0;
    Label label = 1;
    BoundingBox box;
    double confidence = 0.0;
};

/// One record per (proposal, foreground label) with score >= threshold,
/// ordered by image (input order), proposal index, label.
std::vector<DetectionRecord> extract_detections(std::span<const ProposalSet> images, double threshold);

struct ClassResult {
    Label label = 1;
    /// Empty when the class has no non-difficult ground truth.
    std::optional<double> average_precision;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t ground_truth = 0;  // non-difficult instances
};

/// VOC-style AP for one class. Detections are ranked by confidence (ties by
/// image id, then proposal index); each is matched to the highest-IoU ground
/// truth box of the class in its image. IoU >= threshold with an unmatched box
/// is a TP, with an already matched box an FP, with a difficult box ignored.
/// Throws ValidationError when a record carries a different label.
ClassResult average_precision(std::span<const DetectionRecord> detections, const GroundTruthSet& truth,
                              Label label, const EvalConfig& config = {});

struct EvalReport {
    std::vector<ClassResult> classes;  // labels 1..K
    /// Mean over classes with a defined AP; 0 when none is defined.
    double mean_ap = 0.0;
    double iou_threshold = 0.5;
    Interpolation interpolation = Interpolation::ElevenPoint;
};

EvalReport mean_average_precision(std::span<const DetectionRecord> detections, const GroundTruthSet& truth,
                                  int num_foreground, const EvalConfig& config = {});

/// Aligned text table, one column per class plus mAP, values in percent.
std::string format_report_table(const EvalReport& report, const CategorySpace& categories);

/// Scores for a whole dataset; images[i] pairs with features[i].
struct Dataset {
    std::span<const ProposalSet> images;
    std::span<const SceneFeature> features;
    const GroundTruthSet& truth;
};

/// Rescore every image; parallel over images with results in input order.
std::vector<RescoreResult> rescore_all(std::span<const ProposalSet> images, std::span<const SceneFeature> features,
                                       const CrfModel& model, const CrfWeights& weights,
                                       const InferenceConfig& config, unsigned threads = 1);

struct SweepPoint {
    CrfWeights weights;
    EvalReport report;
};

struct SweepTable {
    std::vector<SweepPoint> points;
    /// Highest mAP; ties go to the smaller omega_p, then the smaller omega_g.
    std::size_t best = 0;
};

/// Inclusive arithmetic grid start, start + step, ... up to stop (+1e-12).
/// Throws ValidationError on a nonpositive step or stop < start.
std::vector<double> grid_values(double start, double stop, double step);

/// Evaluates the cartesian grid omega_p x omega_g (omega_p outer).
/// Throws ValidationError on an empty grid.
SweepTable sweep_weights(const Dataset& data, const CrfModel& model, std::span<const double> omega_p,
                         std::span<const double> omega_g, const InferenceConfig& inference,
                         const EvalConfig& eval, unsigned threads = 1);

/// CSV with header omega_p,omega_g,<class APs>,mAP; undefined APs are empty fields.
std::string sweep_csv(const SweepTable& table, const CategorySpace& categories);

}  // namespace ctxcrf
