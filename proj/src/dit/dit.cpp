#include "touchgen/dit/dit.hpp"

#include "touchgen/core/errors.hpp"
#include "touchgen/dit/patch.hpp"

namespace touchgen::dit {

const char* mechanism_name(Mechanism m) {
    switch (m) {
        case Mechanism::modulation: return "modulation";
        case Mechanism::joint: return "joint";
        case Mechanism::cross: return "cross";
    }
    return "?";
}

Mechanism parse_mechanism(const std::string& name) {
    if (name == "modulation") return Mechanism::modulation;
    if (name == "joint") return Mechanism::joint;
    if (name == "cross") return Mechanism::cross;
    throw ConfigError("unknown conditioning mechanism '" + name + "' (expected modulation, joint or cross)");
}

void DiTConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0 || in_channels <= 0) throw ConfigError("image/patch sizes must be positive");
    if (image_size % patch_size != 0)
        throw ShapeError("image size " + std::to_string(image_size) + " not divisible by patch size " +
                         std::to_string(patch_size));
    if (width <= 0 || heads <= 0 || width % heads != 0)
        throw ConfigError("width " + std::to_string(width) + " not divisible by heads " + std::to_string(heads));
    if (width % 4 != 0) throw ConfigError("width must be divisible by 4 for 2-D position embeddings");
    if (depth <= 0 || mlp_ratio <= 0 || cond_dim <= 0 || timesteps <= 0) throw ConfigError("invalid DiT dimensions");
    if (freq_dim <= 0 || freq_dim % 2 != 0) throw ConfigError("freq_dim must be positive and even");
    for (int layer : gel_prompt_layers)
        if (layer < 1 || layer > depth)
            throw ConfigError("gel prompt layer " + std::to_string(layer) + " outside [1, " + std::to_string(depth) + "]");
}

nlohmann::json to_json(const DiTConfig& c) {
    return {{"image_size", c.image_size}, {"in_channels", c.in_channels}, {"patch_size", c.patch_size},
            {"width", c.width},           {"depth", c.depth},             {"heads", c.heads},
            {"mlp_ratio", c.mlp_ratio},   {"cond_dim", c.cond_dim},       {"freq_dim", c.freq_dim},
            {"timesteps", c.timesteps},   {"mechanism", mechanism_name(c.mechanism)},
            {"gel_prompt_layers", std::vector<int>(c.gel_prompt_layers.begin(), c.gel_prompt_layers.end())}};
}

DiTConfig dit_config_from_json(const nlohmann::json& j) {
    DiTConfig c;
    try {
        c.image_size = j.at("image_size").get<int>();
        c.in_channels = j.at("in_channels").get<int>();
        c.patch_size = j.at("patch_size").get<int>();
        c.width = j.at("width").get<int>();
        c.depth = j.at("depth").get<int>();
        c.heads = j.at("heads").get<int>();
        c.mlp_ratio = j.at("mlp_ratio").get<int>();
        c.cond_dim = j.at("cond_dim").get<int>();
        c.freq_dim = j.at("freq_dim").get<int>();
        c.timesteps = j.at("timesteps").get<int>();
        c.mechanism = parse_mechanism(j.at("mechanism").get<std::string>());
        const auto layers = j.at("gel_prompt_layers").get<std::vector<int>>();
        c.gel_prompt_layers = std::set<int>(layers.begin(), layers.end());
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed DiT config: ") + e.what());
    }
    c.validate();
    return c;
}

template <class T>
DiT<T>::DiT(const DiTConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const int w = config_.width;
    patch_embed_ = nn::Linear<T>(config_.patch_dim(), w, rng);
    pos_embed_ = position_embedding_2d<T>(config_.grid(), config_.grid(), w);
    t_fc1_ = nn::Linear<T>(config_.freq_dim, w, rng);
    t_fc2_ = nn::Linear<T>(w, w, rng);
    if (config_.mechanism != Mechanism::modulation) cond_proj_ = nn::Linear<T>(config_.cond_dim, w, rng);
    blocks_.resize(static_cast<std::size_t>(config_.depth));
    for (auto& b : blocks_) {
        b.ada = nn::Linear<T>(w, 6 * w, rng, nn::Init::zero);
        b.qkv = nn::Linear<T>(w, 3 * w, rng);
        b.attn_out = nn::Linear<T>(w, w, rng);
        b.mlp = nn::Mlp<T>(w, config_.mlp_ratio * w, w, rng);
        if (config_.mechanism == Mechanism::cross) {
            b.cross_q = nn::Linear<T>(w, w, rng);
            b.cross_kv = nn::Linear<T>(w, 2 * w, rng);
            b.cross_out = nn::Linear<T>(w, w, rng, nn::Init::zero);
        }
        if (config_.mechanism == Mechanism::modulation) {
            b.fuse1 = nn::Linear<T>(config_.cond_dim, w, rng);
            b.fuse2 = nn::Linear<T>(w, w, rng);
        }
    }
    final_ada_ = nn::Linear<T>(w, 2 * w, rng, nn::Init::zero);
    head_ = nn::Linear<T>(w, config_.patch_size * config_.patch_size * config_.out_channels(), rng, nn::Init::zero);
}

template <class T>
Var<T> DiT<T>::timestep_embedding(Tape<T>& tape, int t) {
    if (t < 0 || t > config_.timesteps)
        throw ConfigError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(config_.timesteps) + "]");
    Var<T> f = tape.constant(timestep_sinusoid<T>(t, config_.freq_dim));
    return t_fc2_(tape, ag::silu(t_fc1_(tape, f)));
}

template <class T>
Var<T> DiT<T>::block_forward(Tape<T>& tape, Block& b, const Var<T>& x, const Var<T>& c, const Var<T>& cond,
                             ForwardTrace* trace) {
    const Eigen::Index w = config_.width;
    const Eigen::Index n = x.rows();
    Var<T> mod = b.ada(tape, ag::silu(c));
    auto chunk = [&](int i) { return ag::slice_cols(mod, i * w, w); };

    Var<T> h = ag::modulate(ag::layer_norm(x), chunk(0), chunk(1));
    Eigen::Index m = 0;
    if (config_.mechanism == Mechanism::joint && cond.rows() > 0) {
        m = cond.rows();
        const Var<T> parts[] = {ag::layer_norm(cond), h};
        h = ag::concat_rows<T>(parts);
    }
    Var<T> qkv = b.qkv(tape, h);
    Var<T> attn = nn::multi_head_attention(tape, ag::slice_cols(qkv, 0, w), ag::slice_cols(qkv, w, w),
                                           ag::slice_cols(qkv, 2 * w, w), config_.heads);
    // Condition-token outputs are dropped; only image tokens continue.
    if (m > 0) attn = ag::slice_rows(attn, m, n);
    if (trace) trace->attention_length.push_back(static_cast<int>(n + m));
    Var<T> out = ag::add(x, ag::mul_row(b.attn_out(tape, attn), chunk(2)));

    if (config_.mechanism == Mechanism::cross) {
        Var<T> q = b.cross_q(tape, ag::layer_norm(out));
        Var<T> kv = b.cross_kv(tape, cond);
        Var<T> ca = nn::multi_head_attention(tape, q, ag::slice_cols(kv, 0, w), ag::slice_cols(kv, w, w), config_.heads);
        out = ag::add(out, b.cross_out(tape, ca));
    }

    Var<T> h2 = ag::modulate(ag::layer_norm(out), chunk(3), chunk(4));
    return ag::add(out, ag::mul_row(b.mlp(tape, h2), chunk(5)));
}

template <class T>
DiTOutput<T> DiT<T>::forward(Tape<T>& tape, const Var<T>& x, int t, const text::FusedCondition<T>& cond,
                             ForwardTrace* trace) {
    if (x.rows() != config_.tokens() || x.cols() != config_.patch_dim())
        throw ShapeError("latent tokens are " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                         ", expected " + std::to_string(config_.tokens()) + "x" + std::to_string(config_.patch_dim()));
    if (!cond.rows.defined() || cond.rows.cols() != config_.cond_dim)
        throw ShapeError("condition width " + std::to_string(cond.rows.defined() ? cond.rows.cols() : 0) +
                         " does not match cond_dim " + std::to_string(config_.cond_dim));
    if (cond.sen_rows < 0 || cond.sen_rows > cond.rows.rows()) throw ShapeError("invalid gel prompt row count");
    if (!x.value().allFinite()) throw ShapeError("latent input contains non-finite values");

    Var<T> h = ag::add(patch_embed_(tape, x), tape.constant(pos_embed_));
    const Var<T> t_emb = timestep_embedding(tape, t);

    // Raw rows feed the modulation MLP; the other mechanisms attend to a
    // projection into the backbone width.
    const Var<T> cond_all = config_.mechanism == Mechanism::modulation ? cond.rows : cond_proj_(tape, cond.rows);
    const Eigen::Index m_all = cond.rows.rows();
    Var<T> cond_obj = cond_all;
    if (cond.sen_rows > 0) cond_obj = ag::slice_rows(cond_all, cond.sen_rows, m_all - cond.sen_rows);

    Var<T> c = t_emb;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto& b = blocks_[i];
        const bool with_gel = config_.gel_prompt_layers.count(static_cast<int>(i) + 1) > 0;
        const Var<T>& view = with_gel ? cond_all : cond_obj;
        if (trace) trace->cond_rows.push_back(static_cast<int>(view.rows()));
        c = t_emb;
        if (config_.mechanism == Mechanism::modulation)
            c = ag::add(t_emb, b.fuse2(tape, ag::silu(b.fuse1(tape, ag::mean_rows(view)))));
        h = block_forward(tape, b, h, c, view, trace);
    }

    Var<T> mod = final_ada_(tape, ag::silu(c));
    const Eigen::Index w = config_.width;
    Var<T> out = head_(tape, ag::modulate(ag::layer_norm(h), ag::slice_cols(mod, 0, w), ag::slice_cols(mod, w, w)));
    if (trace) trace->output_tokens = static_cast<int>(out.rows());
    const Eigen::Index pd = config_.patch_dim();
    return {ag::slice_cols(out, 0, pd), ag::slice_cols(out, pd, pd)};
}

template <class T>
void DiT<T>::collect(const std::string& prefix, ParameterList<T>& out) {
    patch_embed_.collect(prefix + ".patch_embed", out);
    t_fc1_.collect(prefix + ".t_embed.fc1", out);
    t_fc2_.collect(prefix + ".t_embed.fc2", out);
    if (config_.mechanism != Mechanism::modulation) cond_proj_.collect(prefix + ".cond_proj", out);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        auto& b = blocks_[i];
        const std::string p = prefix + ".blocks." + std::to_string(i);
        b.ada.collect(p + ".ada", out);
        b.qkv.collect(p + ".qkv", out);
        b.attn_out.collect(p + ".attn_out", out);
        b.mlp.collect(p + ".mlp", out);
        if (config_.mechanism == Mechanism::cross) {
            b.cross_q.collect(p + ".cross_q", out);
            b.cross_kv.collect(p + ".cross_kv", out);
            b.cross_out.collect(p + ".cross_out", out);
        }
        if (config_.mechanism == Mechanism::modulation) {
            b.fuse1.collect(p + ".fuse1", out);
            b.fuse2.collect(p + ".fuse2", out);
        }
    }
    final_ada_.collect(prefix + ".final_ada", out);
    head_.collect(prefix + ".head", out);
}

template class DiT<float>;
template class DiT<double>;

}  // namespace touchgen::dit
