#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "touchgen/core/checkpoint.hpp"
#include "touchgen/core/errors.hpp"
#include "touchgen/core/log.hpp"
#include "touchgen/core/optim.hpp"
#include "touchgen/cttp/cttp.hpp"
#include "touchgen/text/caption.hpp"

namespace touchgen::cttp {

TextEmbedder::TextEmbedder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed), unseen_weight_(1.0) {
    if (dim <= 0) throw ConfigError("text embedding width must be positive");
}

std::vector<double> TextEmbedder::word_vector(const std::string& word) const {
    Rng rng(derive_seed(seed_, fnv1a(word)));
    std::vector<double> v(static_cast<std::size_t>(dim_));
    double norm = 0.0;
    for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
    }
    for (auto& x : v) x /= std::sqrt(norm);
    return v;
}

void TextEmbedder::fit(std::span<const std::string> captions) {
    if (captions.empty()) throw DataError("cannot fit the text embedder on zero captions");
    std::map<std::string, int> df;
    for (const auto& c : captions) {
        const auto words = text::split_words(text::to_lower(c));
        for (const auto& w : std::set<std::string>(words.begin(), words.end())) ++df[w];
    }
    const double n = static_cast<double>(captions.size());
    idf_.clear();
    for (const auto& [w, count] : df) idf_[w] = std::log(n / count);
    unseen_weight_ = std::log(n + 1.0);
}

std::vector<double> TextEmbedder::embed(const std::string& caption) const {
    std::vector<double> out(static_cast<std::size_t>(dim_), 0.0);
    for (const auto& w : text::split_words(text::to_lower(caption))) {
        const auto it = idf_.find(w);
        const double weight = it == idf_.end() ? unseen_weight_ : it->second;
        if (weight == 0.0) continue;
        const auto v = word_vector(w);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += weight * v[i];
    }
    return out;
}

nlohmann::json TextEmbedder::to_json() const {
    return {{"dim", dim_}, {"seed", seed_}, {"idf", idf_}, {"unseen_weight", unseen_weight_}};
}

TextEmbedder TextEmbedder::from_json(const nlohmann::json& j) {
    try {
        TextEmbedder e(j.at("dim").get<int>(), j.at("seed").get<std::uint64_t>());
        e.idf_ = j.at("idf").get<std::map<std::string, double>>();
        e.unseen_weight_ = j.at("unseen_weight").get<double>();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ConfigError(std::string("malformed text embedder: ") + ex.what());
    }
}

CttpModel::CttpModel(const CttpConfig& config, std::uint64_t seed)
    : config_(config),
      rng_(derive_seed(seed, 0xc77b)),
      encoder_(config.encoder, rng_),
      text_(config.encoder.embed_dim, config.text_seed) {
    if (!(config.tau > 0.0)) throw ConfigError("CTTP temperature must be positive");
}

std::vector<double> CttpModel::embed_image(const Image& image) {
    Tape<float> tape(false);
    const auto row = encoder_(tape, image).value();
    return std::vector<double>(row.data(), row.data() + row.size());
}

double CttpModel::score(const Image& image, const std::string& caption) {
    return cosine(embed_image(image), embed_text(caption));
}

TexturePrediction CttpModel::predict_texture(const Image& image, const std::vector<std::string>& textures,
                                             const std::string& shape_caption, int k) {
    if (textures.empty()) throw InputError("texture vocabulary is empty");
    if (k < 1 || k > static_cast<int>(textures.size()))
        throw InputError("k=" + std::to_string(k) + " outside [1, " + std::to_string(textures.size()) + "]");
    const auto tac = embed_image(image);
    std::vector<std::pair<std::string, double>> scored;
    for (const auto& t : textures) scored.emplace_back(t, cosine(tac, embed_text(text::build_caption(shape_caption, t))));
    // Stable: ties keep vocabulary order.
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    TexturePrediction p;
    p.lowest = scored.back();
    scored.resize(static_cast<std::size_t>(k));
    p.top = std::move(scored);
    return p;
}

ag::ParameterList<float> CttpModel::parameters() {
    ag::ParameterList<float> out;
    encoder_.collect("tactile", out);
    return out;
}

CttpTrainReport train_cttp(CttpModel& model, std::span<const CaptionedImage> data, const CttpTrainConfig& config) {
    if (data.empty()) throw DataError("CTTP training needs at least one captioned image");
    if (config.epochs < 0 || config.batch_size < 1) throw ConfigError("CTTP epochs/batch size must be positive");
    CttpTrainReport report;
    if (config.batch_size < 2) {
        report.warnings.push_back("batch size < 2: no negatives, InfoNCE is identically zero");
        log::warning(report.warnings.back());
    }

    std::vector<std::string> captions;
    for (const auto& d : data) captions.push_back(d.caption);
    model.text().fit(captions);
    const int dim = model.text().dim();
    Matrix<float> text_rows(static_cast<Eigen::Index>(data.size()), dim);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto e = model.embed_text(data[i].caption);
        for (int c = 0; c < dim; ++c) text_rows(static_cast<Eigen::Index>(i), c) = static_cast<float>(e[static_cast<std::size_t>(c)]);
    }

    auto params = model.parameters();
    optim::AdamW<float> opt(params, {config.lr, 0.9, 0.999, 1e-8, config.weight_decay});
    Rng rng(derive_seed(config.seed, 0xc771));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const double tau = model.config().tau;

    const long steps_per_epoch = static_cast<long>((order.size() + config.batch_size - 1) / config.batch_size);
    const long total_steps = steps_per_epoch * config.epochs;
    long step = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double total = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            opt.zero_grad();
            Tape<float> tape;
            std::vector<Var<float>> rows;
            Matrix<float> text(static_cast<Eigen::Index>(end - start), dim);
            for (std::size_t j = start; j < end; ++j) {
                rows.push_back(model.encoder()(tape, data[order[j]].image));
                text.row(static_cast<Eigen::Index>(j - start)) = text_rows.row(static_cast<Eigen::Index>(order[j]));
            }
            const Var<float> loss = info_nce_loss(ag::concat_rows<float>(rows), tape.constant(std::move(text)), tau);
            if (!std::isfinite(loss.item())) throw TrainingError("non-finite CTTP loss in epoch " + std::to_string(epoch));
            tape.backward(loss);
            // Cosine decay to zero over the run.
            const double progress = static_cast<double>(step++) / static_cast<double>(std::max(1L, total_steps));
            opt.step(config.lr * 0.5 * (1.0 + std::cos(3.141592653589793 * progress)));
            total += loss.item();
            ++batches;
        }
        report.epoch_loss.push_back(total / batches);
    }
    return report;
}

double retrieval_at_1(CttpModel& model, std::span<const CaptionedImage> data) {
    if (data.empty()) throw DataError("retrieval needs at least one sample");
    std::vector<std::vector<double>> text;
    for (const auto& d : data) text.push_back(model.embed_text(d.caption));
    int hits = 0;
    for (const auto& d : data) {
        const auto tac = model.embed_image(d.image);
        std::size_t best = 0;
        double best_score = -2.0;
        for (std::size_t j = 0; j < text.size(); ++j) {
            const double s = cosine(tac, text[j]);
            if (s > best_score) {
                best_score = s;
                best = j;
            }
        }
        if (data[best].caption == d.caption) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

namespace {

nlohmann::json config_json(const CttpConfig& c) {
    const auto& e = c.encoder;
    return {{"image_size", e.image_size}, {"channels", e.channels}, {"patch_size", e.patch_size},
            {"width", e.width},           {"depth", e.depth},       {"heads", e.heads},
            {"embed_dim", e.embed_dim},   {"tau", c.tau},           {"text_seed", c.text_seed}};
}

}  // namespace

void save_cttp(const std::filesystem::path& path, CttpModel& model, const nlohmann::json& extra) {
    nlohmann::json meta = extra;
    meta["kind"] = "cttp";
    meta["cttp"] = config_json(model.config());
    meta["text"] = model.text().to_json();
    save_checkpoint(path, meta, model.parameters());
}

std::unique_ptr<CttpModel> load_cttp(const std::filesystem::path& path) {
    const auto meta = read_checkpoint_metadata(path);
    if (meta.value("kind", "") != "cttp") throw ConfigError(path.string() + " is not a CTTP checkpoint");
    CttpConfig c;
    try {
        const auto& j = meta.at("cttp");
        c.encoder.image_size = j.at("image_size").get<int>();
        c.encoder.channels = j.at("channels").get<int>();
        c.encoder.patch_size = j.at("patch_size").get<int>();
        c.encoder.width = j.at("width").get<int>();
        c.encoder.depth = j.at("depth").get<int>();
        c.encoder.heads = j.at("heads").get<int>();
        c.encoder.embed_dim = j.at("embed_dim").get<int>();
        c.tau = j.at("tau").get<double>();
        c.text_seed = j.at("text_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed CTTP checkpoint header: ") + e.what());
    }
    auto model = std::make_unique<CttpModel>(c, 0);
    model->text() = TextEmbedder::from_json(meta.at("text"));
    load_checkpoint(path, model->parameters());
    return model;
}

}  // namespace touchgen::cttp
