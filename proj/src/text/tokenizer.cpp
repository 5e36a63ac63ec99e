#include "touchgen/text/tokenizer.hpp"

#include "touchgen/core/errors.hpp"
#include "touchgen/data/dataset.hpp"
#include "touchgen/text/caption.hpp"

namespace touchgen::text {

Tokenizer::Tokenizer(std::vector<std::string> words, int max_length) : max_length_(max_length) {
    if (max_length <= 0) throw ConfigError("tokenizer max length must be positive");
    for (auto& w : words) {
        w = to_lower(w);
        if (w.empty() || w.find_first_of(" \t\r\n") != std::string::npos)
            throw ConfigError("vocabulary entries must be single non-empty words (got '" + w + "')");
        if (index_.count(w)) continue;
        index_.emplace(w, static_cast<int>(words_.size()) + 2);
        words_.push_back(w);
    }
}

int Tokenizer::id(const std::string& word) const {
    const auto it = index_.find(to_lower(word));
    return it == index_.end() ? kUnknown : it->second;
}

const std::string& Tokenizer::word(int id) const {
    static const std::string pad = "<pad>";
    static const std::string unk = "<unk>";
    if (id == kPad) return pad;
    if (id == kUnknown) return unk;
    if (id < 2 || id >= vocab_size()) throw IndexError("token id " + std::to_string(id) + " out of range");
    return words_[static_cast<std::size_t>(id - 2)];
}

TokenSequence Tokenizer::tokenize(const std::string& text) const {
    TokenSequence seq;
    for (const auto& w : split_words(to_lower(text))) {
        if (static_cast<int>(seq.ids.size()) == max_length_) {
            seq.truncated = true;
            break;
        }
        seq.ids.push_back(id(w));
    }
    return seq;
}

void Tokenizer::save(const std::filesystem::path& path) const { data::write_vocabulary(path, words_); }

Tokenizer Tokenizer::load(const std::filesystem::path& path, int max_length) {
    return Tokenizer(data::read_vocabulary(path), max_length);
}

std::vector<std::string> caption_vocabulary(const std::vector<std::string>& shape_captions,
                                            const std::vector<std::string>& texture_captions) {
    std::vector<std::string> words = {"the", "touch", "of", "is"};
    for (const auto* list : {&shape_captions, &texture_captions})
        for (const auto& phrase : *list)
            for (const auto& w : split_words(to_lower(phrase))) words.push_back(w);
    return words;
}

}  // namespace touchgen::text
