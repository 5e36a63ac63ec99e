#include "touchgen/text/caption.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "touchgen/core/errors.hpp"

namespace touchgen::text {

namespace {

constexpr std::string_view kPrefix = "the touch of ";
constexpr std::string_view kJoin = " is ";

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> split_words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> words;
    for (std::string w; in >> w;) words.push_back(std::move(w));
    return words;
}

std::string build_caption(const std::string& shape_caption, const std::string& texture_caption) {
    const std::string shape = trim(shape_caption);
    const std::string texture = trim(texture_caption);
    if (shape.empty() || texture.empty())
        throw CaptionError("contact captions need both a shape and a texture (got '" + shape_caption + "', '" +
                           texture_caption + "')");
    return to_lower(std::string(kPrefix) + shape + std::string(kJoin) + texture);
}

std::optional<std::pair<std::string, std::string>> parse_caption(const std::string& caption) {
    const std::string lower = to_lower(trim(caption));
    if (lower.rfind(kPrefix, 0) != 0) return std::nullopt;
    const auto rest = lower.substr(kPrefix.size());
    // Shapes may not contain " is "; textures are single adjectives in practice.
    const auto pos = rest.find(kJoin);
    if (pos == std::string::npos || pos == 0 || pos + kJoin.size() >= rest.size()) return std::nullopt;
    return std::make_pair(rest.substr(0, pos), rest.substr(pos + kJoin.size()));
}

std::string condition_text(const ConditionToggles& toggles, const std::string& shape_caption,
                           const std::string& texture_caption) {
    if (toggles.texture && toggles.shape) return build_caption(shape_caption, texture_caption);
    if (toggles.texture) {
        if (trim(texture_caption).empty()) throw CaptionError("texture condition requested but caption is empty");
        return to_lower(trim(texture_caption));
    }
    if (toggles.shape) {
        if (trim(shape_caption).empty()) throw CaptionError("shape condition requested but caption is empty");
        return to_lower(trim(shape_caption));
    }
    return {};
}

}  // namespace touchgen::text
