#include "touchgen/data/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "touchgen/core/errors.hpp"
#include "touchgen/core/rng.hpp"

namespace touchgen::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string make_id(std::size_t index) {
    char buffer[16];
    std::snprintf(buffer, sizeof buffer, "s%06zu", index);
    return buffer;
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IntegrityError("missing file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("corrupt metadata file " + path.string() + ": " + e.what());
    }
}

void write_json_file(const fs::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

template <class F>
auto parse_field(const fs::path& path, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ParseError("corrupt metadata file " + path.string() + ": " + e.what());
    }
}

}  // namespace

const char* split_name(Split split) {
    switch (split) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw ConfigError("unknown split '" + name + "'");
}

const std::vector<std::string>& DatasetManifest::split(Split s) const {
    switch (s) {
        case Split::train: return train;
        case Split::val: return val;
        case Split::test: return test;
    }
    return train;
}

void DatasetManifest::validate() const {
    if (sample_count != static_cast<int>(samples.size()))
        throw IntegrityError("manifest sample_count " + std::to_string(sample_count) + " but " +
                             std::to_string(samples.size()) + " records");
    auto check_vocab = [](const std::vector<std::string>& vocab, const char* what) {
        if (vocab.empty()) throw ConfigError(std::string(what) + " vocabulary is empty");
        std::set<std::string> unique(vocab.begin(), vocab.end());
        if (unique.size() != vocab.size()) throw ConfigError(std::string(what) + " vocabulary has duplicates");
    };
    check_vocab(texture_vocabulary, "texture");
    check_vocab(shape_vocabulary, "shape");
    std::unordered_map<std::string, int> seen;
    for (const auto& r : samples) {
        if (!seen.emplace(r.id, 0).second) throw IntegrityError("duplicate sample id " + r.id);
        if (r.gel_id < 0 || r.gel_id >= gel_count) throw IntegrityError("sample " + r.id + " has gel id outside gel count");
    }
    for (const auto* list : {&train, &val, &test}) {
        for (const auto& id : *list) {
            auto it = seen.find(id);
            if (it == seen.end()) throw IntegrityError("split lists unknown sample " + id);
            if (++it->second > 1) throw IntegrityError("sample " + id + " appears in more than one split");
        }
    }
    for (const auto& [id, count] : seen)
        if (count != 1) throw IntegrityError("sample " + id + " is not assigned to a split");
}

GeneratedDataset generate_dataset(const TactileGenerator& generator, const GridSpec& grid) {
    const auto& cfg = generator.config();
    GeneratedDataset out;
    DatasetManifest& m = out.manifest;
    m.gel_count = cfg.gel_count;
    m.image_size = cfg.image_size;
    m.channels = 3;
    m.texture_vocabulary = generator.texture_vocabulary();
    m.shape_vocabulary = generator.shape_vocabulary();

    std::size_t index = 0;
    auto add = [&](int texture, int shape, int gel, std::uint64_t seed) {
        TactileSample s = generator.generate(texture, shape, gel, seed);
        s.id = make_id(index++);
        m.samples.push_back({s.id, s.texture_id, s.shape_id, s.gel_id, s.seed, s.contact});
        out.samples.push_back(std::move(s));
    };
    const int textures = static_cast<int>(cfg.textures.size());
    const int shapes = static_cast<int>(cfg.shapes.size());
    for (int gel = 0; gel < cfg.gel_count; ++gel)
        for (int shape = 0; shape < shapes; ++shape)
            for (int texture = 0; texture < textures; ++texture)
                for (int k = 0; k < grid.seeds_per_combination; ++k)
                    add(texture, shape, gel, derive_seed(grid.seed, index));
    for (int gel = 0; gel < cfg.gel_count; ++gel)
        for (int k = 0; k < grid.non_contact_per_gel; ++k) add(0, kNoContact, gel, derive_seed(grid.seed, index));
    m.sample_count = static_cast<int>(m.samples.size());

    // Seeded shuffle, then contiguous val/test/train blocks.
    std::vector<std::size_t> order(m.samples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(grid.seed, 0x5917ULL));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    const auto n = order.size();
    const auto n_val = static_cast<std::size_t>(std::floor(grid.val_fraction * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::floor(grid.test_fraction * static_cast<double>(n)));
    std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_val),
                                  order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), order.end());
    for (auto* v : {&val, &test, &train}) std::sort(v->begin(), v->end());
    for (auto i : train) m.train.push_back(m.samples[i].id);
    for (auto i : val) m.val.push_back(m.samples[i].id);
    for (auto i : test) m.test.push_back(m.samples[i].id);
    m.validate();
    return out;
}

void write_dataset(const DatasetManifest& manifest, std::span<const TactileSample> samples) {
    manifest.validate();
    if (samples.size() != manifest.samples.size())
        throw IntegrityError("write_dataset: manifest lists " + std::to_string(manifest.samples.size()) + " samples, got " +
                             std::to_string(samples.size()));
    const fs::path& root = manifest.root;
    fs::create_directories(root / "images");
    fs::create_directories(root / "captions");

    json records = json::array();
    for (const auto& r : manifest.samples)
        records.push_back({{"id", r.id}, {"texture_id", r.texture_id}, {"shape_id", r.shape_id},
                           {"gel_id", r.gel_id}, {"seed", r.seed}, {"contact", r.contact}});
    const json j = {{"sample_count", manifest.sample_count},
                    {"gel_count", manifest.gel_count},
                    {"image_size", manifest.image_size},
                    {"channels", manifest.channels},
                    {"texture_vocabulary", manifest.texture_vocabulary},
                    {"shape_vocabulary", manifest.shape_vocabulary},
                    {"samples", records},
                    {"splits", {{"train", manifest.train}, {"val", manifest.val}, {"test", manifest.test}}}};
    write_json_file(root / "manifest.json", j);

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const TactileSample& s = samples[i];
        if (s.id != manifest.samples[i].id) throw IntegrityError("sample order differs from manifest at " + s.id);
        write_ppm(root / "images" / (s.id + ".ppm"), s.image);
        write_json_file(root / "captions" / (s.id + ".json"),
                        {{"texture", s.texture_caption}, {"shape", s.shape_caption}, {"gel_id", s.gel_id}, {"contact", s.contact}});
    }
}

DatasetReader::DatasetReader(const fs::path& root) {
    const fs::path path = root / "manifest.json";
    const json j = read_json_file(path);
    manifest_ = parse_field(path, [&] {
        DatasetManifest m;
        m.root = root;
        m.sample_count = j.at("sample_count").get<int>();
        m.gel_count = j.at("gel_count").get<int>();
        m.image_size = j.at("image_size").get<int>();
        m.channels = j.value("channels", 3);
        m.texture_vocabulary = j.at("texture_vocabulary").get<std::vector<std::string>>();
        m.shape_vocabulary = j.at("shape_vocabulary").get<std::vector<std::string>>();
        for (const auto& r : j.at("samples"))
            m.samples.push_back({r.at("id").get<std::string>(), r.value("texture_id", -1), r.value("shape_id", -1),
                                 r.at("gel_id").get<int>(), r.value("seed", std::uint64_t{0}), r.value("contact", true)});
        const json& splits = j.at("splits");
        m.train = splits.at("train").get<std::vector<std::string>>();
        m.val = splits.at("val").get<std::vector<std::string>>();
        m.test = splits.at("test").get<std::vector<std::string>>();
        return m;
    });
    manifest_.validate();

    std::size_t images = 0;
    if (fs::is_directory(root / "images"))
        for (const auto& entry : fs::directory_iterator(root / "images"))
            if (entry.path().extension() == ".ppm") ++images;
    if (images != manifest_.samples.size())
        throw IntegrityError("manifest lists " + std::to_string(manifest_.samples.size()) + " samples but " +
                             std::to_string(images) + " image files are present");
    for (const auto& r : manifest_.samples) {
        if (!fs::exists(root / "images" / (r.id + ".ppm"))) throw IntegrityError("missing image for sample " + r.id);
        if (!fs::exists(root / "captions" / (r.id + ".json"))) throw IntegrityError("missing caption for sample " + r.id);
    }
}

TactileSample DatasetReader::load(std::size_t index) const {
    if (index >= manifest_.samples.size()) throw IndexError("sample index out of range");
    const SampleRecord& r = manifest_.samples[index];
    const fs::path caption_path = manifest_.root / "captions" / (r.id + ".json");
    const json caption = read_json_file(caption_path);
    TactileSample s;
    s.id = r.id;
    s.image = read_ppm(manifest_.root / "images" / (r.id + ".ppm"));
    parse_field(caption_path, [&] {
        s.texture_caption = caption.at("texture").get<std::string>();
        s.shape_caption = caption.at("shape").get<std::string>();
        s.gel_id = caption.at("gel_id").get<int>();
        s.contact = caption.at("contact").get<bool>();
        return 0;
    });
    s.texture_id = r.texture_id;
    s.shape_id = r.shape_id;
    s.seed = r.seed;
    if (s.image.height != manifest_.image_size || s.image.width != manifest_.image_size)
        throw IntegrityError("image " + r.id + " does not match manifest image size");
    return s;
}

TactileSample DatasetReader::load(const std::string& id) const {
    for (std::size_t i = 0; i < manifest_.samples.size(); ++i)
        if (manifest_.samples[i].id == id) return load(i);
    throw IndexError("unknown sample id " + id);
}

std::vector<TactileSample> DatasetReader::load_all() const {
    std::vector<TactileSample> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(load(i));
    return out;
}

std::vector<TactileSample> DatasetReader::load_split(Split split) const {
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < manifest_.samples.size(); ++i) index.emplace(manifest_.samples[i].id, i);
    std::vector<TactileSample> out;
    for (const auto& id : manifest_.split(split)) out.push_back(load(index.at(id)));
    return out;
}

DatasetReader read_dataset(const fs::path& root) { return DatasetReader(root); }

void write_vocabulary(const fs::path& path, const std::vector<std::string>& words) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& w : words) out << w << "\n";
}

std::vector<std::string> read_vocabulary(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read vocabulary file " + path.string());
    std::vector<std::string> words;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && seen.insert(line).second) words.push_back(line);
    }
    return words;
}

}  // namespace touchgen::data
