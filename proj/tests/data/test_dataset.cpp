#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "touchgen/core/errors.hpp"
#include "touchgen/data/dataset.hpp"

using namespace touchgen;
using namespace touchgen::data;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

GeneratedDataset small_dataset(int seeds, int non_contact = 0) {
    GeneratorConfig cfg;
    cfg.image_size = 16;
    TactileGenerator gen(cfg);
    GridSpec grid;
    grid.seeds_per_combination = seeds;
    grid.non_contact_per_gel = non_contact;
    return generate_dataset(gen, grid);
}

}  // namespace

TEST_CASE("default grid has the expected size and a clean split") {
    GeneratorConfig cfg;
    cfg.image_size = 8;
    TactileGenerator gen(cfg);
    GridSpec grid;
    grid.seeds_per_combination = 2;
    grid.non_contact_per_gel = 1;
    const auto ds = generate_dataset(gen, grid);
    CHECK(ds.manifest.sample_count == 3 * 4 * 4 * 2 + 3);
    CHECK(ds.manifest.train.size() + ds.manifest.val.size() + ds.manifest.test.size() == 99);
    CHECK_NOTHROW(ds.manifest.validate());
    int no_contact = 0;
    for (const auto& s : ds.samples) no_contact += !s.contact;
    CHECK(no_contact == 3);
}

TEST_CASE("write then read is lossless and ordered") {
    auto ds = small_dataset(1);
    ds.manifest.root = fresh_dir("touchgen_ds_roundtrip");
    // keep only 10 samples
    ds.samples.resize(10);
    ds.manifest.samples.resize(10);
    ds.manifest.sample_count = 10;
    ds.manifest.train.clear();
    ds.manifest.val.clear();
    ds.manifest.test.clear();
    for (const auto& r : ds.manifest.samples) ds.manifest.train.push_back(r.id);
    write_dataset(ds.manifest, ds.samples);

    const auto reader = read_dataset(ds.manifest.root);
    CHECK(reader.manifest().gel_count == 3);
    std::size_t i = 0;
    for (const TactileSample& s : reader) {
        CHECK(s.id == ds.samples[i].id);
        CHECK(s.image == ds.samples[i].image);
        CHECK(s.texture_caption == ds.samples[i].texture_caption);
        CHECK(s.shape_caption == ds.samples[i].shape_caption);
        CHECK(s.gel_id == ds.samples[i].gel_id);
        ++i;
    }
    CHECK(i == 10);
    fs::remove_all(ds.manifest.root);
}

TEST_CASE("a missing image file is an integrity error") {
    auto ds = small_dataset(1);
    ds.manifest.root = fresh_dir("touchgen_ds_missing");
    write_dataset(ds.manifest, ds.samples);
    fs::remove(ds.manifest.root / "images" / (ds.samples[3].id + ".ppm"));
    CHECK_THROWS_AS(read_dataset(ds.manifest.root), IntegrityError);
    fs::remove_all(ds.manifest.root);
}

TEST_CASE("corrupt metadata names the offending file") {
    auto ds = small_dataset(1);
    ds.manifest.root = fresh_dir("touchgen_ds_corrupt");
    write_dataset(ds.manifest, ds.samples);
    {
        std::ofstream out(ds.manifest.root / "captions" / (ds.samples[0].id + ".json"));
        out << "{\"texture\": ";
    }
    const auto reader = read_dataset(ds.manifest.root);
    try {
        reader.load(0);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find(ds.samples[0].id + ".json") != std::string::npos);
    }
    {
        std::ofstream out(ds.manifest.root / "manifest.json");
        out << "not json";
    }
    try {
        read_dataset(ds.manifest.root);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("manifest.json") != std::string::npos);
    }
    fs::remove_all(ds.manifest.root);
}

TEST_CASE("manifest validation enforces split and vocabulary invariants") {
    auto ds = small_dataset(1);
    auto m = ds.manifest;
    m.val.push_back(m.train.front());
    CHECK_THROWS_AS(m.validate(), IntegrityError);
    m = ds.manifest;
    m.train.pop_back();
    CHECK_THROWS_AS(m.validate(), IntegrityError);
    m = ds.manifest;
    m.texture_vocabulary.push_back(m.texture_vocabulary.front());
    CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("vocabulary files are newline-delimited and deduplicated") {
    const auto path = fs::temp_directory_path() / "touchgen_vocab.txt";
    write_vocabulary(path, {"the", "touch", "the", "of"});
    CHECK(read_vocabulary(path) == std::vector<std::string>{"the", "touch", "of"});
    fs::remove(path);
}
