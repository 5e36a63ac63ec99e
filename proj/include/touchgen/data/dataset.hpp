#pragma once

// On-disk dataset layout:
//
//   <root>/manifest.json        counts, vocabularies, sample records, splits
//   <root>/images/<id>.ppm      binary P6, 8-bit
//   <root>/captions/<id>.json   {"texture", "shape", "gel_id", "contact"}

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "touchgen/data/generator.hpp"

namespace touchgen::data {

enum class Split { train, val, test };

const char* split_name(Split split);
Split parse_split(const std::string& name);

struct SampleRecord {
    std::string id;
    int texture_id = -1;
    int shape_id = -1;
    int gel_id = 0;
    std::uint64_t seed = 0;
    bool contact = true;
};

struct DatasetManifest {
    std::filesystem::path root;
    int sample_count = 0;
    int gel_count = 0;
    int image_size = 0;
    int channels = 3;
    std::vector<std::string> texture_vocabulary;
    std::vector<std::string> shape_vocabulary;
    // Manifest order; iteration follows it.
    std::vector<SampleRecord> samples;
    std::vector<std::string> train;
    std::vector<std::string> val;
    std::vector<std::string> test;

    const std::vector<std::string>& split(Split s) const;
    // Throws IntegrityError/ConfigError when an invariant is violated.
    void validate() const;
};

struct GridSpec {
    int seeds_per_combination = 64;
    int non_contact_per_gel = 0;
    double val_fraction = 0.1;
    double test_fraction = 0.1;
    std::uint64_t seed = 43;
};

struct GeneratedDataset {
    DatasetManifest manifest;
    std::vector<TactileSample> samples;
};

// Full factorial grid gel x shape x texture x seed (plus optional no-contact
// frames), with a seeded split assignment.
GeneratedDataset generate_dataset(const TactileGenerator& generator, const GridSpec& grid);

void write_dataset(const DatasetManifest& manifest, std::span<const TactileSample> samples);

// Lazily loads samples in manifest order.
class DatasetReader {
public:
    explicit DatasetReader(const std::filesystem::path& root);

    const DatasetManifest& manifest() const { return manifest_; }
    std::size_t size() const { return manifest_.samples.size(); }
    TactileSample load(std::size_t index) const;
    TactileSample load(const std::string& id) const;
    std::vector<TactileSample> load_all() const;
    std::vector<TactileSample> load_split(Split split) const;

    class iterator {
    public:
        using value_type = TactileSample;
        using difference_type = std::ptrdiff_t;
        iterator(const DatasetReader* reader, std::size_t index) : reader_(reader), index_(index) {}
        TactileSample operator*() const { return reader_->load(index_); }
        iterator& operator++() {
            ++index_;
            return *this;
        }
        bool operator==(const iterator& other) const { return index_ == other.index_; }

    private:
        const DatasetReader* reader_;
        std::size_t index_;
    };
    iterator begin() const { return {this, 0}; }
    iterator end() const { return {this, size()}; }

private:
    DatasetManifest manifest_;
};

// Equivalent to constructing a DatasetReader.
DatasetReader read_dataset(const std::filesystem::path& root);

// Newline-delimited UTF-8 word list.
void write_vocabulary(const std::filesystem::path& path, const std::vector<std::string>& words);
std::vector<std::string> read_vocabulary(const std::filesystem::path& path);

}  // namespace touchgen::data
