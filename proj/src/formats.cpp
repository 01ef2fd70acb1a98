#include "ctxcrf/formats.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "ctxcrf/errors.hpp"

namespace ctxcrf {

using nlohmann::json;

namespace {

// built-in json keeps small integers signed, parsed text gives unsigned
bool nonneg_int(const nlohmann::json& v) {
    return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

constexpr const char* kDetectionsFormat = "ctxcrf.detections";
constexpr const char* kAnnotationsFormat = "ctxcrf.annotations";
constexpr const char* kFeaturesFormat = "ctxcrf.features";
constexpr const char* kPairwiseKind = "ctxcrf.pairwise_model";
constexpr const char* kScenePriorKind = "ctxcrf.scene_prior";
constexpr const char* kReportKind = "ctxcrf.eval_report";

// Location prefix for ingest errors.
struct Where {
    const std::filesystem::path& path;
    std::size_t line = 0;

    std::string operator()(std::string_view msg) const {
        if (line == 0) return fmt::format("{}: {}", path.string(), msg);
        return fmt::format("{}:{}: {}", path.string(), line, msg);
    }
};

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("{}: cannot open for reading", path.string()));
    return in;
}

// Calls fn(line_number, record) for each nonblank line.
template <typename Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
    auto in = open_input(path);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(Where{path, number}(fmt::format("malformed JSON: {}", e.what())));
        }
        if (!record.is_object()) throw ValidationError(Where{path, number}("record is not a JSON object"));
        fn(number, record);
    }
    if (in.bad()) throw IoError(fmt::format("{}: read failure", path.string()));
}

const json& field(const json& obj, const char* key, const Where& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(where(fmt::format("missing field '{}'", key)));
    return *it;
}

double number(const json& value, const std::string& what, const Where& where) {
    if (!value.is_number()) throw ValidationError(where(fmt::format("field '{}' must be a number", what)));
    const double v = value.get<double>();
    if (!std::isfinite(v)) throw ValidationError(where(fmt::format("field '{}' must be finite", what)));
    return v;
}

std::string string_field(const json& obj, const char* key, const Where& where) {
    const auto& v = field(obj, key, where);
    if (!v.is_string()) throw ValidationError(where(fmt::format("field '{}' must be a string", key)));
    return v.get<std::string>();
}

const json& array_field(const json& obj, const char* key, const Where& where) {
    const auto& v = field(obj, key, where);
    if (!v.is_array()) throw ValidationError(where(fmt::format("field '{}' must be an array", key)));
    return v;
}

ImageFrame read_frame(const json& rec, const Where& where) {
    ImageFrame frame{number(field(rec, "width", where), "width", where),
                     number(field(rec, "height", where), "height", where)};
    if (!frame.valid()) throw ValidationError(where("width and height must be positive"));
    return frame;
}

BoundingBox read_box(const json& value, const std::string& what, const Where& where) {
    if (!value.is_array() || value.size() != 4) {
        throw ValidationError(where(fmt::format("{} must be [x_min, y_min, x_max, y_max]", what)));
    }
    return {number(value[0], what, where), number(value[1], what, where), number(value[2], what, where),
            number(value[3], what, where)};
}

json box_json(const BoundingBox& b) { return json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

CategorySpace categories_from(const json& value, const Where& where) {
    if (!value.is_array()) throw ValidationError(where("'categories' must be an array of names"));
    std::vector<std::string> names;
    for (const auto& n : value) {
        if (!n.is_string()) throw ValidationError(where("category names must be strings"));
        names.push_back(n.get<std::string>());
    }
    try {
        return CategorySpace(std::move(names));
    } catch (const ValidationError& e) {
        throw ValidationError(where(e.what()));
    }
}

// Returns true when `rec` is a header of the expected format.
bool check_header(const json& rec, const char* format, const Where& where) {
    const auto it = rec.find("format");
    if (it == rec.end()) return false;
    if (!it->is_string() || it->get<std::string>() != format) {
        throw ValidationError(where(fmt::format("expected a '{}' header, found {}", format, it->dump())));
    }
    const auto& version = field(rec, "version", where);
    if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
        throw ValidationError(where(fmt::format("unsupported version {} (supported: {})", version.dump(), kFormatVersion)));
    }
    return true;
}

void check_document(const json& doc, const char* kind, const Where& where) {
    if (!doc.is_object()) throw ValidationError(where("document is not a JSON object"));
    const auto& version = field(doc, "version", where);
    if (!version.is_number_integer() || version.get<int>() != kFormatVersion) {
        throw ValidationError(where(fmt::format("unsupported version {} (supported: {})", version.dump(), kFormatVersion)));
    }
    if (const auto it = doc.find("kind"); it != doc.end() && (!it->is_string() || it->get<std::string>() != kind)) {
        throw ValidationError(where(fmt::format("expected kind '{}', found {}", kind, it->dump())));
    }
}

json header(const char* format) { return json{{"format", format}, {"version", kFormatVersion}}; }

std::string jsonl(const std::vector<json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

}  // namespace

void write_text_atomic(const std::filesystem::path& path, const std::string& contents) {
    auto tmp = path;
    tmp += fmt::format(".tmp{}", static_cast<long>(::getpid()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError(fmt::format("{}: cannot open for writing", tmp.string()));
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw IoError(fmt::format("{}: write failed", tmp.string()));
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw IoError(fmt::format("{}: cannot move into place: {}", path.string(), ec.message()));
    }
}

json read_json_file(const std::filesystem::path& path) {
    auto in = open_input(path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
    }
}

// ---------------------------------------------------------------- detections

DetectionsFile read_detections(const std::filesystem::path& path) {
    DetectionsFile out;
    std::optional<std::size_t> width;
    bool first = true;
    for_each_record(path, [&](std::size_t line, const json& rec) {
        const Where where{path, line};
        const bool is_header = check_header(rec, kDetectionsFormat, where);
        if (is_header) {
            if (!first) throw ValidationError(where("header must be the first record"));
            first = false;
            if (const auto it = rec.find("categories"); it != rec.end()) {
                out.categories = categories_from(*it, where);
                width = static_cast<std::size_t>(out.categories->num_labels());
            }
            return;
        }
        first = false;

        ProposalSet set;
        set.image_id = string_field(rec, "image_id", where);
        set.frame = read_frame(rec, where);
        const auto& boxes = array_field(rec, "boxes", where);
        const auto& scores = array_field(rec, "scores", where);
        if (boxes.size() != scores.size()) {
            throw ValidationError(where(fmt::format("image '{}': {} boxes but {} score rows", set.image_id,
                                                    boxes.size(), scores.size())));
        }
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            const BoundingBox box = read_box(boxes[i], fmt::format("boxes[{}]", i), where);
            const auto& row_json = scores[i];
            if (!row_json.is_array()) throw ValidationError(where(fmt::format("scores[{}] must be an array", i)));
            if (!width) width = row_json.size();
            if (row_json.size() != *width || *width < 2) {
                throw ValidationError(where(fmt::format("image '{}': scores[{}] has {} entries, expected {}",
                                                        set.image_id, i, row_json.size(), *width)));
            }
            std::vector<double> row;
            for (const auto& v : row_json) {
                const double s = number(v, fmt::format("scores[{}]", i), where);
                if (s < 0.0) throw ValidationError(where(fmt::format("image '{}': negative score in row {}", set.image_id, i)));
                row.push_back(s);
            }
            const double sum = std::accumulate(row.begin(), row.end(), 0.0);
            if (std::abs(sum - 1.0) > kSimplexTolerance) {
                throw ValidationError(where(fmt::format("image '{}': score row {} sums to {}, outside 1 +/- {}",
                                                        set.image_id, i, sum, kSimplexTolerance)));
            }
            if (std::abs(sum - 1.0) > 1e-12) {
                for (double& s : row) s /= sum;
                ++out.renormalized_rows;
            }
            const BoundingBox clipped = clip_to_frame(box, set.frame);
            if (!clipped.valid()) {
                ++out.dropped_boxes;
                continue;
            }
            set.boxes.push_back(clipped);
            rows.push_back(std::move(row));
        }
        set.scores = Matrix(rows.size(), width.value_or(0));
        for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), set.scores.row(i).begin());
        out.images.push_back(std::move(set));
    });
    return out;
}

void write_detections(const std::filesystem::path& path, const std::vector<ProposalSet>& images,
                      const std::optional<CategorySpace>& categories, const std::vector<RescoreMeta>* meta) {
    std::vector<json> lines;
    json head = header(kDetectionsFormat);
    if (categories) head["categories"] = categories->names();
    lines.push_back(std::move(head));
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& set = images[i];
        json boxes = json::array();
        json scores = json::array();
        for (std::size_t p = 0; p < set.size(); ++p) {
            boxes.push_back(box_json(set.boxes[p]));
            const auto row = set.scores.row(p);
            scores.push_back(std::vector<double>(row.begin(), row.end()));
        }
        json rec{{"image_id", set.image_id},
                 {"width", set.frame.width},
                 {"height", set.frame.height},
                 {"boxes", std::move(boxes)},
                 {"scores", std::move(scores)}};
        if (meta != nullptr) {
            const auto& m = meta->at(i);
            rec["rescore"] = {{"source_indices", m.source_indices},
                              {"iterations", m.iterations},
                              {"converged", m.converged},
                              {"max_change", m.max_change}};
        }
        lines.push_back(std::move(rec));
    }
    write_text_atomic(path, jsonl(lines));
}

// --------------------------------------------------------------- annotations

AnnotationsFile read_annotations(const std::filesystem::path& path, const std::optional<CategorySpace>& categories) {
    AnnotationsFile out;
    std::optional<CategorySpace> space = categories;
    bool first = true;
    for_each_record(path, [&](std::size_t line, const json& rec) {
        const Where where{path, line};
        if (check_header(rec, kAnnotationsFormat, where)) {
            if (!first) throw ValidationError(where("header must be the first record"));
            first = false;
            if (const auto it = rec.find("categories"); it != rec.end()) {
                auto declared = categories_from(*it, where);
                if (space && *space != declared) {
                    throw ValidationError(where("header categories differ from the supplied category list"));
                }
                space = std::move(declared);
            }
            return;
        }
        first = false;
        if (!space) throw ValidationError(where("no category list: add a header with 'categories'"));

        ImageAnnotations image;
        image.image_id = string_field(rec, "image_id", where);
        image.frame = read_frame(rec, where);
        const auto& objects = array_field(rec, "objects", where);
        for (std::size_t i = 0; i < objects.size(); ++i) {
            const auto& obj = objects[i];
            if (!obj.is_object()) throw ValidationError(where(fmt::format("objects[{}] must be an object", i)));
            const std::string name = string_field(obj, "label", where);
            const auto label = space->label_of(name);
            if (!label) {
                throw ValidationError(
                    where(fmt::format("image '{}': unknown category '{}'", image.image_id, name)));
            }
            GroundTruthObject gt;
            gt.label = *label;
            gt.box = clip_to_frame(read_box(field(obj, "box", where), fmt::format("objects[{}].box", i), where),
                                   image.frame);
            if (!gt.box.valid()) {
                throw ValidationError(where(fmt::format("image '{}': objects[{}] has no area inside the frame",
                                                        image.image_id, i)));
            }
            if (const auto it = obj.find("difficult"); it != obj.end()) {
                if (!it->is_boolean()) throw ValidationError(where(fmt::format("objects[{}].difficult must be a boolean", i)));
                gt.difficult = it->get<bool>();
            }
            image.objects.push_back(gt);
        }
        out.images.push_back(std::move(image));
    });
    if (!space) throw ValidationError(Where{path}("no category list: add a header with 'categories'"));
    out.categories = std::move(*space);
    return out;
}

void write_annotations(const std::filesystem::path& path, const GroundTruthSet& images,
                       const CategorySpace& categories) {
    std::vector<json> lines;
    json head = header(kAnnotationsFormat);
    head["categories"] = categories.names();
    lines.push_back(std::move(head));
    for (const auto& image : images) {
        json objects = json::array();
        for (const auto& obj : image.objects) {
            objects.push_back({{"label", categories.name(obj.label)},
                               {"box", box_json(obj.box)},
                               {"difficult", obj.difficult}});
        }
        lines.push_back({{"image_id", image.image_id},
                         {"width", image.frame.width},
                         {"height", image.frame.height},
                         {"objects", std::move(objects)}});
    }
    write_text_atomic(path, jsonl(lines));
}

// ------------------------------------------------------------------ features

FeaturesFile read_features(const std::filesystem::path& path) {
    FeaturesFile out;
    std::optional<std::size_t> dim;
    bool first = true;
    for_each_record(path, [&](std::size_t line, const json& rec) {
        const Where where{path, line};
        if (check_header(rec, kFeaturesFormat, where)) {
            if (!first) throw ValidationError(where("header must be the first record"));
            first = false;
            if (const auto it = rec.find("dim"); it != rec.end()) {
                if (!nonneg_int(*it) || it->get<std::size_t>() == 0) {
                    throw ValidationError(where("'dim' must be a positive integer"));
                }
                dim = it->get<std::size_t>();
            }
            return;
        }
        first = false;
        SceneFeature f;
        f.image_id = string_field(rec, "image_id", where);
        const auto& values = array_field(rec, "feature", where);
        for (const auto& v : values) f.values.push_back(number(v, "feature", where));
        if (!dim) dim = f.dim();
        if (f.dim() != *dim || f.dim() == 0) {
            throw ValidationError(where(fmt::format("image '{}': feature has dimension {}, expected {}", f.image_id,
                                                    f.dim(), *dim)));
        }
        out.features.push_back(std::move(f));
    });
    out.dim = dim.value_or(0);
    return out;
}

void write_features(const std::filesystem::path& path, const std::vector<SceneFeature>& features) {
    std::vector<json> lines;
    json head = header(kFeaturesFormat);
    if (!features.empty()) head["dim"] = features.front().dim();
    lines.push_back(std::move(head));
    for (const auto& f : features) lines.push_back({{"image_id", f.image_id}, {"feature", f.values}});
    write_text_atomic(path, jsonl(lines));
}

std::vector<SceneFeature> align_features(const std::vector<ProposalSet>& images,
                                         const std::vector<SceneFeature>& features) {
    std::map<std::string_view, const SceneFeature*> by_id;
    for (const auto& f : features) by_id.emplace(f.image_id, &f);
    std::vector<SceneFeature> out;
    out.reserve(images.size());
    for (const auto& image : images) {
        const auto it = by_id.find(image.image_id);
        if (it == by_id.end()) throw ValidationError(fmt::format("image '{}': no scene feature record", image.image_id));
        out.push_back(*it->second);
    }
    return out;
}

CategorySpace read_categories(const std::filesystem::path& path) {
    const json doc = read_json_file(path);
    const Where where{path};
    if (!doc.is_object()) throw ValidationError(where("document is not a JSON object"));
    return categories_from(field(doc, "categories", where), where);
}

// -------------------------------------------------------------------- models

json pairwise_to_json(const PairwiseModel& model) {
    const int n = model.num_labels();
    json counts = json::array();
    json likelihood = json::array();
    for (Label a = 0; a < n; ++a) {
        json crow = json::array();
        json lrow = json::array();
        for (Label b = 0; b < n; ++b) {
            json c = json::array();
            json l = json::array();
            for (auto r : kAllRelations) {
                c.push_back(model.count(a, b, r));
                l.push_back(model.likelihood(a, b, r));
            }
            crow.push_back(std::move(c));
            lrow.push_back(std::move(l));
        }
        counts.push_back(std::move(crow));
        likelihood.push_back(std::move(lrow));
    }
    json relations = json::array();
    for (auto r : kAllRelations) relations.push_back(std::string(relation_name(r)));
    return {{"version", kFormatVersion},
            {"kind", kPairwiseKind},
            {"categories", model.categories().names()},
            {"relations", std::move(relations)},
            {"alpha", model.alpha()},
            {"counts", std::move(counts)},
            {"likelihood", std::move(likelihood)}};
}

namespace {

PairwiseModel pairwise_from_json_at(const json& doc, const Where& where) {
    check_document(doc, kPairwiseKind, where);
    auto categories = categories_from(field(doc, "categories", where), where);
    if (const auto it = doc.find("relations"); it != doc.end()) {
        bool same = it->is_array() && it->size() == kNumRelations;
        for (int r = 0; same && r < kNumRelations; ++r) {
            same = (*it)[r].is_string() && (*it)[r].get<std::string>() == relation_name(kAllRelations[r]);
        }
        if (!same) throw ValidationError(where("'relations' does not match the supported relation order"));
    }
    const double alpha = number(field(doc, "alpha", where), "alpha", where);
    const auto n = static_cast<std::size_t>(categories.num_labels());
    std::vector<std::uint64_t> counts;
    std::vector<double> likelihood;
    const auto& cj = array_field(doc, "counts", where);
    const auto& lj = array_field(doc, "likelihood", where);
    const auto shape_ok = [n](const json& t) {
        if (!t.is_array() || t.size() != n) return false;
        for (const auto& row : t) {
            if (!row.is_array() || row.size() != n) return false;
            for (const auto& cell : row)
                if (!cell.is_array() || cell.size() != kNumRelations) return false;
        }
        return true;
    };
    if (!shape_ok(cj) || !shape_ok(lj)) {
        throw ValidationError(where(fmt::format("'counts' and 'likelihood' must have shape {}x{}x{}", n, n, kNumRelations)));
    }
    for (const auto& row : cj)
        for (const auto& cell : row)
            for (const auto& v : cell) {
                if (!nonneg_int(v)) throw ValidationError(where("counts must be nonnegative integers"));
                counts.push_back(v.get<std::uint64_t>());
            }
    for (const auto& row : lj)
        for (const auto& cell : row)
            for (const auto& v : cell) likelihood.push_back(number(v, "likelihood", where));
    try {
        return PairwiseModel(std::move(categories), alpha, std::move(counts), std::move(likelihood));
    } catch (const ValidationError& e) {
        throw ValidationError(where(e.what()));
    }
}

ScenePriorModel scene_prior_from_json_at(const json& doc, const Where& where) {
    check_document(doc, kScenePriorKind, where);
    auto categories = categories_from(field(doc, "categories", where), where);
    const auto& dim_json = field(doc, "dim", where);
    if (!nonneg_int(dim_json) || dim_json.get<std::size_t>() == 0) throw ValidationError(where("'dim' must be a positive integer"));
    const auto dim = dim_json.get<std::size_t>();
    const double lambda = number(field(doc, "lambda", where), "lambda", where);
    std::vector<double> weights;
    for (const auto& row : array_field(doc, "weights", where)) {
        if (!row.is_array() || row.size() != dim) {
            throw ValidationError(where(fmt::format("every weight row must have {} entries", dim)));
        }
        for (const auto& v : row) weights.push_back(number(v, "weights", where));
    }
    std::vector<double> biases;
    for (const auto& v : array_field(doc, "biases", where)) biases.push_back(number(v, "biases", where));
    try {
        return ScenePriorModel(std::move(categories), dim, lambda, std::move(weights), std::move(biases));
    } catch (const ValidationError& e) {
        throw ValidationError(where(e.what()));
    }
}

}  // namespace

PairwiseModel pairwise_from_json(const json& doc) {
    static const std::filesystem::path inline_doc{"<pairwise model>"};
    return pairwise_from_json_at(doc, Where{inline_doc});
}

void write_pairwise_model(const std::filesystem::path& path, const PairwiseModel& model) {
    write_text_atomic(path, pairwise_to_json(model).dump() + "\n");
}

PairwiseModel read_pairwise_model(const std::filesystem::path& path) {
    return pairwise_from_json_at(read_json_file(path), Where{path});
}

json scene_prior_to_json(const ScenePriorModel& model) {
    json weights = json::array();
    for (Label k = 1; k <= model.num_foreground(); ++k) {
        const auto w = model.weights(k);
        weights.push_back(std::vector<double>(w.begin(), w.end()));
    }
    return {{"version", kFormatVersion},
            {"kind", kScenePriorKind},
            {"categories", model.categories().names()},
            {"dim", model.dim()},
            {"lambda", model.lambda()},
            {"weights", std::move(weights)},
            {"biases", model.all_biases()}};
}

ScenePriorModel scene_prior_from_json(const json& doc) {
    static const std::filesystem::path inline_doc{"<scene prior>"};
    return scene_prior_from_json_at(doc, Where{inline_doc});
}

void write_scene_prior(const std::filesystem::path& path, const ScenePriorModel& model) {
    write_text_atomic(path, scene_prior_to_json(model).dump() + "\n");
}

ScenePriorModel read_scene_prior(const std::filesystem::path& path) {
    return scene_prior_from_json_at(read_json_file(path), Where{path});
}

// ------------------------------------------------------------------- reports

json report_to_json(const EvalReport& report, const CategorySpace& categories) {
    json classes = json::array();
    for (const auto& c : report.classes) {
        classes.push_back({{"label", c.label},
                           {"name", categories.name(c.label)},
                           {"ap", c.average_precision ? json(*c.average_precision) : json(nullptr)},
                           {"tp", c.true_positives},
                           {"fp", c.false_positives},
                           {"num_gt", c.ground_truth}});
    }
    return {{"version", kFormatVersion},
            {"kind", kReportKind},
            {"iou_threshold", report.iou_threshold},
            {"interpolation", report.interpolation == Interpolation::ElevenPoint ? "11pt" : "all"},
            {"mAP", report.mean_ap},
            {"classes", std::move(classes)}};
}

void write_report(const std::filesystem::path& path, const EvalReport& report, const CategorySpace& categories) {
    write_text_atomic(path, report_to_json(report, categories).dump(2) + "\n");
}

// --------------------------------------------------------------- synth config

json synth_config_to_json(const SynthConfig& c) {
    const auto& cats = c.categories;
    json rules = json::array();
    for (const auto& r : c.rules) {
        rules.push_back({{"anchor", cats.name(r.anchor)},
                         {"target", cats.name(r.target)},
                         {"relation", std::string(relation_name(r.relation))},
                         {"probability", r.probability}});
    }
    json confusions = json::array();
    for (const auto& [a, b] : c.confusions) confusions.push_back({cats.name(a), cats.name(b)});
    json archetypes = json::array();
    for (const auto& a : c.archetypes) {
        json probs = json::object();
        for (Label k = 1; k <= cats.num_foreground(); ++k) probs[cats.name(k)] = a.anchor_probability[static_cast<std::size_t>(k - 1)];
        archetypes.push_back(
            {{"name", a.name}, {"weight", a.weight}, {"anchor_probability", std::move(probs)}, {"feature_mean", a.feature_mean}});
    }
    return {{"categories", cats.names()},
            {"num_scenes", c.num_scenes},
            {"frame", {{"width", c.frame.width}, {"height", c.frame.height}}},
            {"num_slots", c.num_slots},
            {"rules", std::move(rules)},
            {"confusions", std::move(confusions)},
            {"unary_noise", c.unary_noise},
            {"background_share", c.background_share},
            {"archetypes", std::move(archetypes)},
            {"feature_noise", c.feature_noise},
            {"jitter", c.jitter},
            {"max_placement_attempts", c.max_placement_attempts},
            {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& doc) {
    static const std::filesystem::path inline_doc{"<synth config>"};
    const Where where{inline_doc};
    if (!doc.is_object()) throw ValidationError(where("synth config must be a JSON object"));
    SynthConfig c = SynthConfig::default_config();
    const auto label = [&](const json& v, const char* what) {
        if (!v.is_string()) throw ValidationError(where(fmt::format("{} must be a category name", what)));
        const auto l = c.categories.label_of(v.get<std::string>());
        if (!l) throw ValidationError(where(fmt::format("{}: unknown category '{}'", what, v.get<std::string>())));
        return *l;
    };
    const auto integer = [&](const char* key) {
        const auto& v = field(doc, key, where);
        if (!v.is_number_integer()) throw ValidationError(where(fmt::format("'{}' must be an integer", key)));
        return v.get<long long>();
    };

    if (doc.contains("categories")) {
        c.categories = categories_from(doc["categories"], where);
        for (const char* key : {"rules", "confusions", "archetypes"}) {
            if (!doc.contains(key)) {
                throw ValidationError(where(fmt::format("custom 'categories' require an explicit '{}'", key)));
            }
        }
    }
    if (doc.contains("num_scenes")) c.num_scenes = static_cast<int>(integer("num_scenes"));
    if (doc.contains("frame")) c.frame = read_frame(doc["frame"], where);
    if (doc.contains("num_slots")) c.num_slots = static_cast<int>(integer("num_slots"));
    if (doc.contains("rules")) {
        c.rules.clear();
        for (const auto& r : array_field(doc, "rules", where)) {
            const auto rel_name = string_field(r, "relation", where);
            const auto rel = relation_from_name(rel_name);
            if (!rel) throw ValidationError(where(fmt::format("unknown relation '{}'", rel_name)));
            c.rules.push_back({label(field(r, "anchor", where), "rule anchor"), label(field(r, "target", where), "rule target"),
                               *rel, number(field(r, "probability", where), "probability", where)});
        }
    }
    if (doc.contains("confusions")) {
        c.confusions.clear();
        for (const auto& p : array_field(doc, "confusions", where)) {
            if (!p.is_array() || p.size() != 2) throw ValidationError(where("each confusion must be a pair of names"));
            c.confusions.emplace_back(label(p[0], "confusion"), label(p[1], "confusion"));
        }
    }
    if (doc.contains("unary_noise")) c.unary_noise = number(doc["unary_noise"], "unary_noise", where);
    if (doc.contains("background_share")) c.background_share = number(doc["background_share"], "background_share", where);
    if (doc.contains("archetypes")) {
        c.archetypes.clear();
        for (const auto& a : array_field(doc, "archetypes", where)) {
            SceneArchetype arch;
            arch.name = string_field(a, "name", where);
            if (a.contains("weight")) arch.weight = number(a["weight"], "weight", where);
            const auto& probs = field(a, "anchor_probability", where);
            arch.anchor_probability.assign(static_cast<std::size_t>(c.categories.num_foreground()), 0.0);
            if (probs.is_object()) {
                for (const auto& [name, value] : probs.items()) {
                    arch.anchor_probability[static_cast<std::size_t>(label(json(name), "anchor_probability") - 1)] =
                        number(value, "anchor_probability", where);
                }
            } else if (probs.is_array()) {
                arch.anchor_probability.clear();
                for (const auto& v : probs) arch.anchor_probability.push_back(number(v, "anchor_probability", where));
            } else {
                throw ValidationError(where("'anchor_probability' must be an object or an array"));
            }
            for (const auto& v : array_field(a, "feature_mean", where)) arch.feature_mean.push_back(number(v, "feature_mean", where));
            c.archetypes.push_back(std::move(arch));
        }
    }
    if (doc.contains("feature_noise")) c.feature_noise = number(doc["feature_noise"], "feature_noise", where);
    if (doc.contains("jitter")) c.jitter = number(doc["jitter"], "jitter", where);
    if (doc.contains("max_placement_attempts")) c.max_placement_attempts = static_cast<int>(integer("max_placement_attempts"));
    if (doc.contains("seed")) {
        const auto& v = doc["seed"];
        if (!nonneg_int(v)) throw ValidationError(where("'seed' must be a nonnegative integer"));
        c.seed = v.get<std::uint64_t>();
    }
    c.validate();
    return c;
}

}  // namespace ctxcrf
