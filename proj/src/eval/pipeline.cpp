#include "touchgen/eval/pipeline.hpp"

#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "touchgen/core/checkpoint.hpp"
#include "touchgen/core/errors.hpp"
#include "touchgen/core/log.hpp"
#include "touchgen/core/optim.hpp"
#include "touchgen/diffusion/loss.hpp"
#include "touchgen/eval/metrics.hpp"

namespace touchgen::eval {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << content;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string optional_field(const std::optional<double>& v) { return v ? fmt(*v) : "n/a"; }

std::string true_caption(const data::TactileSample& s) { return text::build_caption(s.shape_caption, s.texture_caption); }

std::vector<data::TactileSample> contact_samples(const ExperimentConfig& config, const data::DatasetReader& reader) {
    std::vector<data::TactileSample> out;
    for (auto& s : reader.load_split(data::parse_split(config.eval.split)))
        if (s.contact) out.push_back(std::move(s));
    if (config.eval.max_samples > 0 && static_cast<int>(out.size()) > config.eval.max_samples)
        out.resize(static_cast<std::size_t>(config.eval.max_samples));
    if (out.empty()) throw DataError("no contact samples in the '" + config.eval.split + "' split");
    return out;
}

std::string samples_csv(const MetricReport& r) {
    std::ostringstream out;
    out << "id,caption,gel_id,probe_gel,ssim,psnr,lpips,cttp,cttp_shuffled\n";
    for (const auto& s : r.samples)
        out << s.id << ',' << csv_field(s.caption) << ',' << s.gel_id << ',' << s.probe_gel << ',' << fmt(s.ssim) << ','
            << fmt(s.psnr) << ",n/a," << optional_field(s.cttp) << ',' << optional_field(s.cttp_shuffled) << '\n';
    return out.str();
}

void finish_report(MetricReport& r, const ExperimentConfig& config) {
    const double n = static_cast<double>(r.samples.size());
    double ssim_sum = 0.0, psnr_sum = 0.0, cttp_sum = 0.0, shuffled_sum = 0.0;
    int gel_hits = 0;
    for (const auto& s : r.samples) {
        ssim_sum += s.ssim;
        psnr_sum += s.psnr;
        if (s.cttp) cttp_sum += *s.cttp;
        if (s.cttp_shuffled) shuffled_sum += *s.cttp_shuffled;
        if (s.probe_gel == s.gel_id) ++gel_hits;
    }
    r.ssim = ssim_sum / n;
    r.psnr = psnr_sum / n;
    if (r.samples.front().cttp) {
        r.cttp = cttp_sum / n;
        r.cttp_shuffled = shuffled_sum / n;
    }
    r.gel_accuracy = static_cast<double>(gel_hits) / n;
    r.config_hash = content_hash(to_json(config));
    r.content_id = content_hash(nlohmann::json(samples_csv(r)));
}

// Random cyclic permutation (Sattolo), so no caption is paired with itself.
std::vector<std::size_t> derangement(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    Rng rng(derive_seed(seed, 0x5affe1));
    for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i - 1)]);
    return p;
}

void score_cttp(MetricReport& r, cttp::CttpModel* model, const std::vector<Image>& images,
                const std::vector<std::string>& captions, std::uint64_t seed) {
    if (model == nullptr) {
        r.warnings.push_back("no CTTP checkpoint: CTTP columns skipped");
        log::warning(r.warnings.back());
        return;
    }
    const auto perm = derangement(images.size(), seed);
    for (std::size_t i = 0; i < images.size(); ++i) {
        r.samples[i].cttp = model->score(images[i], captions[i]);
        r.samples[i].cttp_shuffled = model->score(images[i], captions[perm[i]]);
    }
}

}  // namespace

std::string condition_text(const ExperimentConfig& config, const data::TactileSample& sample) {
    return text::condition_text(config.conditions, sample.shape_caption, sample.texture_caption);
}

int condition_gel(const ExperimentConfig& config, const data::TactileSample& sample) {
    return config.conditions.gel ? sample.gel_id : -1;
}

PreparedData prepare_training_data(const ExperimentConfig& config, const data::DatasetReader& reader, data::Split split) {
    const auto& manifest = reader.manifest();
    if (manifest.image_size != config.dit.image_size || manifest.channels != config.dit.in_channels)
        throw ConfigError("dataset images are " + std::to_string(manifest.image_size) + "x" +
                          std::to_string(manifest.image_size) + "x" + std::to_string(manifest.channels) +
                          " but the model expects " + std::to_string(config.dit.image_size) + "x" +
                          std::to_string(config.dit.image_size) + "x" + std::to_string(config.dit.in_channels));
    PreparedData out;
    out.tokenizer = std::make_unique<text::Tokenizer>(
        text::caption_vocabulary(manifest.shape_vocabulary, manifest.texture_vocabulary), config.max_length);
    out.gel_count = manifest.gel_count;
    const auto codec = diffusion::make_codec(config.codec);
    const int patch = config.dit.patch_size;
    for (const auto& s : reader.load_split(split)) {
        if (!s.contact) {
            ++out.skipped_non_contact;
            continue;
        }
        PreparedSample p;
        p.id = s.id;
        p.x0 = diffusion::to_model_space(s.image, *codec, patch);
        p.tokens = out.tokenizer->tokenize(condition_text(config, s));
        p.gel_id = condition_gel(config, s);
        out.samples.push_back(std::move(p));
    }
    if (out.samples.empty())
        throw DataError("no contact frames in the " + std::string(data::split_name(split)) + " split of " +
                        manifest.root.string());
    return out;
}

TrainedModel train_diffusion(const ExperimentConfig& config, PreparedData data, const ProgressFn& progress) {
    config.validate();
    TrainedModel out;
    out.tokenizer = std::move(data.tokenizer);
    out.model = std::make_unique<diffusion::TextToTouchModel<float>>(
        model_config(config, out.tokenizer->vocab_size(), data.gel_count), config.seed);
    auto& model = *out.model;
    const auto sched = schedule(config);
    auto params = model.parameters();
    optim::AdamW<float> opt(params, {config.train.lr, 0.9, 0.999, 1e-8, config.train.weight_decay});

    Rng rng(derive_seed(config.seed, 0x7a1e));
    const std::size_t n = data.samples.size();
    const std::size_t batch = static_cast<std::size_t>(config.train.batch_size);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = n;
    int epoch = -1;
    double epoch_sum = 0.0, window_sum = 0.0;
    long epoch_steps = 0, window_steps = 0;
    const auto rows = data.samples.front().x0.rows(), cols = data.samples.front().x0.cols();

    TrainResult& result = out.result;
    for (long step = 0; step < config.train.steps; ++step) {
        opt.zero_grad();
        ag::Tape<float> tape;
        std::vector<ag::Var<float>> losses;
        for (std::size_t b = 0; b < batch; ++b) {
            if (cursor == n) {
                if (epoch >= 0 && epoch_steps > 0) result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
                epoch_sum = 0.0;
                epoch_steps = 0;
                ++epoch;
                for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
                cursor = 0;
            }
            const PreparedSample& s = data.samples[order[cursor++]];
            const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.timesteps)));
            ag::Matrix<float> eps(rows, cols);
            for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = static_cast<float>(rng.normal());
            const bool drop = rng.bernoulli(config.train.cfg_drop);
            const auto bundle = model.bundle(tape, s.tokens, s.gel_id);
            losses.push_back(diffusion::training_loss(tape, model, sched, s.x0, bundle, t, eps, drop,
                                                      config.train.time_adaptive));
        }
        ag::Var<float> loss = losses.front();
        for (std::size_t i = 1; i < losses.size(); ++i) loss = ag::add(loss, losses[i]);
        loss = ag::scale(loss, 1.0f / static_cast<float>(losses.size()));
        tape.backward(loss);
        if (config.train.grad_clip > 0.0) ag::clip_grad_norm(params, config.train.grad_clip);
        const double lr = optim::warmup_lr(config.train.lr, step, config.train.warmup);
        opt.step(lr);

        const double value = loss.item();
        epoch_sum += value;
        ++epoch_steps;
        window_sum += value;
        ++window_steps;
        if (window_steps == config.train.log_every || step + 1 == config.train.steps) {
            const double mean = window_sum / static_cast<double>(window_steps);
            result.curve.push_back({step + 1, epoch, mean, lr});
            result.final_loss = mean;
            if (progress) progress(step + 1, mean);
            window_sum = 0.0;
            window_steps = 0;
        }
    }
    if (epoch_steps > 0) result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
    result.steps = config.train.steps;
    return out;
}

void write_loss_csv(const TrainResult& result, const std::filesystem::path& out_dir) {
    std::ostringstream curve;
    curve << "step,epoch,loss,lr\n";
    for (const auto& p : result.curve) curve << p.step << ',' << p.epoch << ',' << fmt(p.loss) << ',' << fmt(p.lr) << '\n';
    write_text(out_dir / "loss.csv", curve.str());
    std::ostringstream epochs;
    epochs << "epoch,loss\n";
    for (std::size_t i = 0; i < result.epoch_loss.size(); ++i) epochs << i << ',' << fmt(result.epoch_loss[i]) << '\n';
    write_text(out_dir / "epoch_loss.csv", epochs.str());
}

TrainResult train_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                           const ProgressFn& progress) {
    config.validate();
    check_paths(config);
    const data::DatasetReader reader(config.dataset_root);
    PreparedData prepared = prepare_training_data(config, reader);
    log::info("stage 1: " + std::to_string(prepared.samples.size()) + " contact frames cached, " +
              std::to_string(prepared.skipped_non_contact) + " non-contact frames skipped");
    TrainedModel trained = train_diffusion(config, std::move(prepared), progress);
    std::filesystem::create_directories(out_dir);
    nlohmann::json extra;
    extra["experiment"] = to_json(config);
    extra["final_loss"] = trained.result.final_loss;
    extra["textures"] = reader.manifest().texture_vocabulary;
    extra["shapes"] = reader.manifest().shape_vocabulary;
    extra["gel_count"] = reader.manifest().gel_count;
    diffusion::save_model(out_dir / "model.ckpt", *trained.model, *trained.tokenizer, extra);
    write_loss_csv(trained.result, out_dir);
    return trained.result;
}

ExperimentConfig experiment_from_checkpoint(const diffusion::LoadedModel& loaded) {
    if (!loaded.metadata.contains("experiment")) throw ConfigError("checkpoint carries no experiment config");
    ExperimentConfig c = experiment_from_json(loaded.metadata.at("experiment"));
    return c;
}

GelProbe train_gel_probe(const data::DatasetReader& reader, double* val_accuracy) {
    auto collect = [&](data::Split split, std::vector<Image>& images, std::vector<int>& labels) {
        for (auto& s : reader.load_split(split)) {
            images.push_back(std::move(s.image));
            labels.push_back(s.gel_id);
        }
    };
    std::vector<Image> train_images, val_images;
    std::vector<int> train_labels, val_labels;
    collect(data::Split::train, train_images, train_labels);
    collect(data::Split::val, val_images, val_labels);
    GelProbe probe(reader.manifest().gel_count);
    probe.fit(train_images, train_labels);
    if (val_accuracy)
        *val_accuracy = val_images.empty() ? probe.accuracy(train_images, train_labels)
                                           : probe.accuracy(val_images, val_labels);
    return probe;
}

MetricReport evaluate(const ExperimentConfig& config, const data::DatasetReader& reader, const EvalInputs& inputs,
                      std::vector<Image>* generated) {
    if (inputs.model == nullptr || inputs.tokenizer == nullptr || inputs.probe == nullptr)
        throw ConfigError("evaluate needs a model, a tokenizer and a gel probe");
    const auto samples = contact_samples(config, reader);
    auto& model = *inputs.model;
    const auto codec = diffusion::make_codec(model.config().codec);
    const auto sched = schedule(config);

    MetricReport report;
    report.probe_val_accuracy = inputs.probe_val_accuracy;
    std::vector<Image> images;
    std::vector<std::string> captions;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        const auto tokens = inputs.tokenizer->tokenize(condition_text(config, s));
        const auto options = sample_options(config, config.seed + i);
        Image image = diffusion::sample_image(model, sched, *codec, tokens, condition_gel(config, s), options);
        SampleMetrics m;
        m.id = s.id;
        m.caption = true_caption(s);
        m.gel_id = s.gel_id;
        m.probe_gel = inputs.probe->predict(image);
        m.ssim = ssim(image, s.image);
        m.psnr = psnr(image, s.image);
        report.samples.push_back(m);
        captions.push_back(m.caption);
        images.push_back(std::move(image));
    }
    score_cttp(report, inputs.cttp, images, captions, config.seed);
    finish_report(report, config);
    if (generated) *generated = std::move(images);
    return report;
}

MetricReport evaluate_references(const ExperimentConfig& config, const data::DatasetReader& reader,
                                 cttp::CttpModel* cttp, const GelProbe* probe) {
    const auto samples = contact_samples(config, reader);
    MetricReport report;
    std::vector<Image> images;
    std::vector<std::string> captions;
    for (const auto& s : samples) {
        SampleMetrics m;
        m.id = s.id;
        m.caption = true_caption(s);
        m.gel_id = s.gel_id;
        m.probe_gel = probe ? probe->predict(s.image) : -1;
        m.ssim = ssim(s.image, s.image);
        m.psnr = psnr(s.image, s.image);
        report.samples.push_back(m);
        captions.push_back(m.caption);
        images.push_back(s.image);
    }
    score_cttp(report, cttp, images, captions, config.seed);
    finish_report(report, config);
    return report;
}

CttpRun train_cttp_pipeline(const ExperimentConfig& config, const data::DatasetReader& reader) {
    config.validate();
    std::vector<cttp::CaptionedImage> train, held_out;
    for (auto& s : reader.load_split(data::Split::train))
        if (s.contact) train.push_back({std::move(s.image), true_caption(s)});
    if (train.empty()) throw DataError("no contact frames to train CTTP on");
    const auto eval_samples = contact_samples(config, reader);
    for (const auto& s : eval_samples) held_out.push_back({s.image, true_caption(s)});

    CttpRun run;
    run.model = std::make_unique<cttp::CttpModel>(cttp_config(config), config.seed);
    cttp::CttpTrainConfig tc = config.cttp.train;
    tc.seed = config.seed;
    run.report = cttp::train_cttp(*run.model, train, tc);
    run.retrieval_at_1 = cttp::retrieval_at_1(*run.model, held_out);
    run.texture_accuracy = texture_accuracy(*run.model, eval_samples, reader.manifest().texture_vocabulary);
    return run;
}

double texture_accuracy(cttp::CttpModel& model, std::span<const data::TactileSample> samples,
                        const std::vector<std::string>& textures) {
    int correct = 0, total = 0;
    for (const auto& s : samples) {
        if (!s.contact) continue;
        ++total;
        if (model.predict_texture(s.image, textures, s.shape_caption, 1).top.front().first == s.texture_caption)
            ++correct;
    }
    if (total == 0) throw DataError("texture accuracy needs contact samples");
    return static_cast<double>(correct) / static_cast<double>(total);
}

void write_report(const MetricReport& r, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_text(out_dir / "samples.csv", samples_csv(r));
    std::ostringstream s;
    s << "samples,ssim,psnr,lpips,cttp,cttp_shuffled,gel_accuracy,probe_val_accuracy,config_hash,content_id\n";
    s << r.samples.size() << ',' << fmt(r.ssim) << ',' << fmt(r.psnr) << ",n/a," << optional_field(r.cttp) << ','
      << optional_field(r.cttp_shuffled) << ',' << fmt(r.gel_accuracy) << ',' << fmt(r.probe_val_accuracy) << ','
      << r.config_hash << ',' << r.content_id << '\n';
    write_text(out_dir / "summary.csv", s.str());
}

}  // namespace touchgen::eval
