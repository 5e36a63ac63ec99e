#pragma once

// Object-level shape captions are produced by a staged question template:
// the annotator is walked through "about to touch", "in contact" and
// "special situations" before answering with the touched object in step four.

#include <memory>
#include <optional>
#include <string>

#include "touchgen/data/generator.hpp"

namespace touchgen::data {

std::string build_annotation_prompt(const std::string& context);

struct AnnotationResult {
    std::string shape_caption;
    // Set when the step-four answer could not be extracted; caption is empty.
    bool warning = false;
};

// Total: never throws, unparseable input gives an empty caption and a warning.
AnnotationResult parse_annotation_response(const std::string& text);

class Annotator {
public:
    virtual ~Annotator() = default;
    virtual AnnotationResult annotate(const TactileSample& sample, const std::string& context) = 0;
};

// Returns the caption already stored alongside the sample.
class SidecarAnnotator final : public Annotator {
public:
    AnnotationResult annotate(const TactileSample& sample, const std::string& context) override;
};

// POSTs {"prompt", "image_base64"} (image as P6 PPM bytes) to an endpoint and
// parses the step-four answer from the "response" (or "text") field, or the
// raw body when it is not JSON.
class HttpAnnotator final : public Annotator {
public:
    explicit HttpAnnotator(std::string url);
    AnnotationResult annotate(const TactileSample& sample, const std::string& context) override;
    const std::string& url() const { return url_; }

private:
    std::string url_;
};

// HttpAnnotator when `url` (or ANNOTATOR_URL if url is nullopt) is non-empty,
// SidecarAnnotator otherwise.
std::unique_ptr<Annotator> make_annotator(std::optional<std::string> url = std::nullopt);

}  // namespace touchgen::data
