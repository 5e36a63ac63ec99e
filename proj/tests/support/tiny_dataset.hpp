#pragma once

#include <filesystem>
#include <string>

#include "touchgen/data/dataset.hpp"
#include "touchgen/eval/experiment.hpp"

namespace touchgen::testing {

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    return dir;
}

// Full factor grid at reduced size, written to a fresh temp directory.
inline std::filesystem::path write_tiny_dataset(const std::string& name, int seeds, int non_contact = 0,
                                                int image_size = 16) {
    data::GeneratorConfig cfg;
    cfg.image_size = image_size;
    data::TactileGenerator gen(cfg);
    data::GridSpec grid;
    grid.seeds_per_combination = seeds;
    grid.non_contact_per_gel = non_contact;
    auto ds = data::generate_dataset(gen, grid);
    ds.manifest.root = fresh_dir(name);
    data::write_dataset(ds.manifest, ds.samples);
    return ds.manifest.root;
}

// A model small enough for unit tests on 16x16 images.
inline eval::ExperimentConfig tiny_config(const std::filesystem::path& root) {
    eval::ExperimentConfig c = eval::desk_preset();
    c.dataset_root = root.string();
    c.dit.image_size = 16;
    c.dit.width = 32;
    c.dit.depth = 2;
    c.dit.heads = 2;
    c.dit.mlp_ratio = 2;
    c.dit.cond_dim = 16;
    c.dit.freq_dim = 16;
    c.dit.gel_prompt_layers = {1};
    c.text_heads = 2;
    c.train.steps = 40;
    c.train.warmup = 10;
    c.train.log_every = 10;
    c.sample.steps = 5;
    c.eval.max_samples = 6;
    c.cttp.encoder.width = 16;
    c.cttp.encoder.depth = 1;
    c.cttp.encoder.heads = 2;
    c.cttp.encoder.embed_dim = 16;
    c.cttp.train.epochs = 2;
    c.validate();
    return c;
}

}  // namespace touchgen::testing
