#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "touchgen/core/nn.hpp"
#include "touchgen/text/condition.hpp"

namespace touchgen::dit {

using ag::Matrix;
using ag::Parameter;
using ag::ParameterList;
using ag::Tape;
using ag::Var;

enum class Mechanism { modulation, joint, cross };

const char* mechanism_name(Mechanism m);
// Throws ConfigError on unknown names.
Mechanism parse_mechanism(const std::string& name);

struct DiTConfig {
    int image_size = 32;
    int in_channels = 3;
    int patch_size = 2;
    int width = 128;
    int depth = 6;
    int heads = 4;
    int mlp_ratio = 4;
    int cond_dim = 64;
    int freq_dim = 64;
    int timesteps = 1000;
    Mechanism mechanism = Mechanism::cross;
    // 1-based block indices that see the gel prompt rows.
    std::set<int> gel_prompt_layers = {1, 2, 3, 4, 5, 6};

    int grid() const { return image_size / patch_size; }
    int tokens() const { return grid() * grid(); }
    int patch_dim() const { return patch_size * patch_size * in_channels; }
    int out_channels() const { return 2 * in_channels; }
    void validate() const;
};

nlohmann::json to_json(const DiTConfig& config);
DiTConfig dit_config_from_json(const nlohmann::json& j);

// Per-forward bookkeeping used by tests and diagnostics.
struct ForwardTrace {
    std::vector<int> cond_rows;         // condition rows seen by each block
    std::vector<int> attention_length;  // self-attention sequence length per block
    int output_tokens = 0;
};

template <class T>
struct DiTOutput {
    Var<T> eps;    // n x p^2 C
    Var<T> extra;  // n x p^2 C, unsupervised variance channels
};

template <class T>
class DiT {
public:
    DiT(const DiTConfig& config, Rng& rng);

    // x: n x p^2 C patch tokens of the noisy latent.
    DiTOutput<T> forward(Tape<T>& tape, const Var<T>& x, int t, const text::FusedCondition<T>& cond,
                         ForwardTrace* trace = nullptr);

    const DiTConfig& config() const { return config_; }
    void collect(const std::string& prefix, ParameterList<T>& out);

private:
    struct Block {
        nn::Linear<T> ada;  // width -> 6 width, zero-initialised
        nn::Linear<T> qkv;
        nn::Linear<T> attn_out;
        nn::Mlp<T> mlp;
        // cross mechanism only
        nn::Linear<T> cross_q;
        nn::Linear<T> cross_kv;
        nn::Linear<T> cross_out;  // zero-initialised
        // modulation mechanism only
        nn::Linear<T> fuse1;
        nn::Linear<T> fuse2;
    };

    Var<T> timestep_embedding(Tape<T>& tape, int t);
    Var<T> block_forward(Tape<T>& tape, Block& block, const Var<T>& x, const Var<T>& c, const Var<T>& cond,
                         ForwardTrace* trace);

    DiTConfig config_;
    nn::Linear<T> patch_embed_;
    Matrix<T> pos_embed_;
    nn::Linear<T> t_fc1_, t_fc2_;
    nn::Linear<T> cond_proj_;
    std::vector<Block> blocks_;
    nn::Linear<T> final_ada_;
    nn::Linear<T> head_;
};

}  // namespace touchgen::dit
