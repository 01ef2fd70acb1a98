#include "ctxcrf/types.hpp"

#include <set>

#include <fmt/format.h>

#include "ctxcrf/errors.hpp"

namespace ctxcrf {

CategorySpace::CategorySpace(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ValidationError("category space must contain at least one category");
    std::set<std::string_view> seen;
    for (const auto& n : names_) {
        if (n.empty()) throw ValidationError("category names must be nonempty");
        if (!seen.insert(n).second) throw ValidationError(fmt::format("duplicate category name '{}'", n));
    }
}

const std::string& CategorySpace::name(Label label) const {
    static const std::string background = "__background__";
    if (label == kBackground) return background;
    return names_.at(static_cast<std::size_t>(label - 1));
}

std::optional<Label> CategorySpace::label_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return static_cast<Label>(i + 1);
    }
    return std::nullopt;
}

std::vector<bool> presence_from_annotations(const ImageAnnotations& image, int num_foreground) {
    std::vector<bool> present(static_cast<std::size_t>(num_foreground), false);
    for (const auto& obj : image.objects) {
        if (obj.label < 1 || obj.label > num_foreground) {
            throw ValidationError(
                fmt::format("image '{}': label {} outside 1..{}", image.image_id, obj.label, num_foreground));
        }
        present[static_cast<std::size_t>(obj.label - 1)] = true;
    }
    return present;
}

}  // namespace ctxcrf
