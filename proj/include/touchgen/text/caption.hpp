#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace touchgen::text {

// "the touch of <shape> is <texture>", lowercased. Both parts must be non-empty.
std::string build_caption(const std::string& shape_caption, const std::string& texture_caption);

// Inverse of build_caption; nullopt when the text does not follow the template.
std::optional<std::pair<std::string, std::string>> parse_caption(const std::string& caption);

// Which object-level / sensor-level factors condition the generator.
struct ConditionToggles {
    bool texture = true;
    bool shape = true;
    bool gel = true;

    friend bool operator==(const ConditionToggles&, const ConditionToggles&) = default;
};

// Object-level text for the enabled factors: the full template when both
// texture and shape are on, otherwise the single enabled phrase.
std::string condition_text(const ConditionToggles& toggles, const std::string& shape_caption,
                           const std::string& texture_caption);

std::string to_lower(std::string s);
std::vector<std::string> split_words(const std::string& text);

}  // namespace touchgen::text
