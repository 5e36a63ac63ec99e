#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace touchgen::text {

struct TokenSequence {
    std::vector<int> ids;
    bool truncated = false;

    std::size_t size() const { return ids.size(); }
    bool empty() const { return ids.empty(); }
    friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Lowercase whitespace split with a fixed word list. Id 0 is padding, id 1 the
// out-of-vocabulary bucket, words start at 2.
class Tokenizer {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnknown = 1;
    static constexpr int kDefaultMaxLength = 32;

    explicit Tokenizer(std::vector<std::string> words, int max_length = kDefaultMaxLength);

    TokenSequence tokenize(const std::string& text) const;
    int id(const std::string& word) const;
    const std::string& word(int id) const;
    int vocab_size() const { return static_cast<int>(words_.size()) + 2; }
    int max_length() const { return max_length_; }
    const std::vector<std::string>& words() const { return words_; }

    void save(const std::filesystem::path& path) const;
    static Tokenizer load(const std::filesystem::path& path, int max_length = kDefaultMaxLength);

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    int max_length_;
};

// Template words plus every word of the given caption phrases, deduplicated
// in first-seen order.
std::vector<std::string> caption_vocabulary(const std::vector<std::string>& shape_captions,
                                            const std::vector<std::string>& texture_captions);

}  // namespace touchgen::text
