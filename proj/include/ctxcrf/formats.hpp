#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctxcrf/context_stats.hpp"
#include "ctxcrf/crf.hpp"
#include "ctxcrf/evaluation.hpp"
#include "ctxcrf/scene_prior.hpp"
#include "ctxcrf/synth.hpp"
#include "ctxcrf/types.hpp"

namespace ctxcrf {

inline constexpr int kFormatVersion = 1;

/// Row sums within this distance of 1 are renormalized on ingest; beyond it the row is rejected.
inline constexpr double kSimplexTolerance = 1e-3;

// JSON-lines files optionally start with a header record
//   {"format": "<kind>", "version": 1, "categories": [...]}
// identified by its "format" key. Every other nonblank line is one image.

struct DetectionsFile {
    std::optional<CategorySpace> categories;
    std::vector<ProposalSet> images;
    std::size_t dropped_boxes = 0;      // nonpositive area after clipping
    std::size_t renormalized_rows = 0;
};

/// Throws IoError when the file cannot be opened and ValidationError
/// ("path:line: ...") on malformed records or off-simplex score rows.
DetectionsFile read_detections(const std::filesystem::path& path);

/// Per-image inference metadata attached to rescored output.
struct RescoreMeta {
    std::vector<std::size_t> source_indices;
    int iterations = 0;
    bool converged = true;
    double max_change = 0.0;
};

void write_detections(const std::filesystem::path& path, const std::vector<ProposalSet>& images,
                      const std::optional<CategorySpace>& categories,
                      const std::vector<RescoreMeta>* meta = nullptr);

struct AnnotationsFile {
    CategorySpace categories;
    GroundTruthSet images;
};

/// Labels are category names. The category space comes from the header, or
/// from `categories` when given (a header must then agree with it).
AnnotationsFile read_annotations(const std::filesystem::path& path,
                                 const std::optional<CategorySpace>& categories = std::nullopt);
void write_annotations(const std::filesystem::path& path, const GroundTruthSet& images,
                       const CategorySpace& categories);

struct FeaturesFile {
    std::size_t dim = 0;
    std::vector<SceneFeature> features;
};

/// All records must share one dimension (the header "dim" when present).
FeaturesFile read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const std::vector<SceneFeature>& features);

/// Picks the feature of every image by id. Throws ValidationError naming the
/// first image without a feature.
std::vector<SceneFeature> align_features(const std::vector<ProposalSet>& images,
                                         const std::vector<SceneFeature>& features);

/// Category list from a JSON document with a "categories" array (a manifest or
/// a bare {"categories": [...]}).
CategorySpace read_categories(const std::filesystem::path& path);

nlohmann::json pairwise_to_json(const PairwiseModel& model);
PairwiseModel pairwise_from_json(const nlohmann::json& doc);
void write_pairwise_model(const std::filesystem::path& path, const PairwiseModel& model);
PairwiseModel read_pairwise_model(const std::filesystem::path& path);

nlohmann::json scene_prior_to_json(const ScenePriorModel& model);
ScenePriorModel scene_prior_from_json(const nlohmann::json& doc);
void write_scene_prior(const std::filesystem::path& path, const ScenePriorModel& model);
ScenePriorModel read_scene_prior(const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& report, const CategorySpace& categories);
void write_report(const std::filesystem::path& path, const EvalReport& report, const CategorySpace& categories);

nlohmann::json synth_config_to_json(const SynthConfig& config);
/// Missing keys keep the values of SynthConfig::default_config().
SynthConfig synth_config_from_json(const nlohmann::json& doc);

/// Writes through a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path& path, const std::string& contents);

nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace ctxcrf
