#include "touchgen/data/annotation.hpp"

#include <cstdlib>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "touchgen/core/errors.hpp"

namespace touchgen::data {

std::string build_annotation_prompt(const std::string& context) {
    std::ostringstream out;
    out << "You are helping annotate tactile sensor recordings (" << context << "). "
        << "Reason step by step about the collection process.\n"
        << "Step 1: The sensor is about to touch an object. Describe the object visible in the image.\n"
        << "Step 2: The sensor is in contact with the object. Describe the part of the object under the sensor.\n"
        << "Step 3: Consider special situations, such as occlusion, the sensor not touching anything, or several objects.\n"
        << "Step 4: Answer with the touched object in the form \"Step 4: the object is <object>\".";
    return out.str();
}

AnnotationResult parse_annotation_response(const std::string& text) {
    static const std::regex step_four(R"(step\s*4\s*[:.)-]\s*(?:the\s+object\s+is\s+)?([^\n.]*))", std::regex::icase);
    std::smatch match;
    // The last step-four occurrence wins; models sometimes restate the question first.
    std::string caption;
    auto begin = text.cbegin();
    while (std::regex_search(begin, text.cend(), match, step_four)) {
        caption = match[1].str();
        begin = match.suffix().first;
    }
    const auto first = caption.find_first_not_of(" \t\"'");
    const auto last = caption.find_last_not_of(" \t\"'");
    caption = first == std::string::npos ? std::string{} : caption.substr(first, last - first + 1);
    if (caption.empty() || caption.find('<') != std::string::npos) return {"", true};
    for (char& c : caption) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return {caption, false};
}

AnnotationResult SidecarAnnotator::annotate(const TactileSample& sample, const std::string&) {
    if (!sample.contact || sample.shape_caption.empty()) return {"", true};
    return {sample.shape_caption, false};
}

HttpAnnotator::HttpAnnotator(std::string url) : url_(std::move(url)) {
    static const std::regex valid(R"(^https?://[^/]+(/.*)?$)");
    if (!std::regex_match(url_, valid)) throw ConfigError("annotator URL must look like http://host[:port]/path, got " + url_);
}

AnnotationResult HttpAnnotator::annotate(const TactileSample& sample, const std::string& context) {
    static const std::regex split(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    std::regex_match(url_, m, split);
    const std::string host = m[1].str();
    const std::string path = m[2].matched ? m[2].str() : "/";

    std::ostringstream ppm;
    ppm << "P6\n" << sample.image.width << " " << sample.image.height << "\n255\n";
    for (float v : sample.image.data) ppm.put(static_cast<char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
    const nlohmann::json body = {{"prompt", build_annotation_prompt(context)},
                                 {"image_base64", httplib::detail::base64_encode(ppm.str())}};

    httplib::Client client(host);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    const auto response = client.Post(path, body.dump(), "application/json");
    if (!response || response->status != 200) return {"", true};
    const auto parsed = nlohmann::json::parse(response->body, nullptr, false);
    if (parsed.is_object()) {
        for (const char* key : {"response", "text"})
            if (parsed.contains(key) && parsed[key].is_string()) return parse_annotation_response(parsed[key].get<std::string>());
        return {"", true};
    }
    return parse_annotation_response(response->body);
}

std::unique_ptr<Annotator> make_annotator(std::optional<std::string> url) {
    if (!url) {
        const char* env = std::getenv("ANNOTATOR_URL");
        url = env != nullptr ? std::string(env) : std::string{};
    }
    if (url->empty()) return std::make_unique<SidecarAnnotator>();
    return std::make_unique<HttpAnnotator>(*url);
}

}  // namespace touchgen::data
