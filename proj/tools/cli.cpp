#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "touchgen/core/errors.hpp"
#include "touchgen/core/checkpoint.hpp"
#include "touchgen/core/log.hpp"
#include "touchgen/data/annotation.hpp"
#include "touchgen/data/dataset.hpp"
#include "touchgen/eval/ablation.hpp"
#include "touchgen/eval/pipeline.hpp"

namespace touchgen::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << content;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

// Options of one subcommand. Values given on the command line win over the
// config echo, which wins over the defaults.
class ArgTable {
public:
    explicit ArgTable(CLI::App* app) : app_(app) {}

    template <class T>
    void add(const std::string& key, const std::string& flag, T def, const std::string& help) {
        auto value = std::make_shared<T>(def);
        CLI::Option* opt = app_->add_option(flag, *value, help);
        if constexpr (!std::is_same_v<T, std::string>) opt->capture_default_str();
        entries_.push_back({key, opt, json(def), [value] { return json(*value); }});
    }

    // Config override without a default: null unless given.
    template <class T>
    void add_override(const std::string& key, const std::string& flag, const std::string& help) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app_->add_option(flag, *value, help);
        entries_.push_back({key, opt, json(nullptr), [value] { return json(*value); }});
    }

    void add_flag(const std::string& key, const std::string& flag, const std::string& help) {
        auto value = std::make_shared<bool>(false);
        CLI::Option* opt = app_->add_flag(flag, *value, help);
        entries_.push_back({key, opt, json(false), [value] { return json(*value); }});
    }

    void add_list(const std::string& key, const std::string& flag, const std::string& help) {
        auto value = std::make_shared<std::vector<std::string>>();
        CLI::Option* opt = app_->add_option(flag, *value, help);
        entries_.push_back({key, opt, json::array(), [value] { return json(*value); }});
    }

    json resolve(const json& echo_args) const {
        json out = json::object();
        for (const auto& e : entries_) {
            if (e.option->count() > 0)
                out[e.key] = e.get();
            else if (echo_args.is_object() && echo_args.contains(e.key))
                out[e.key] = echo_args[e.key];
            else
                out[e.key] = e.def;
        }
        return out;
    }

private:
    struct Entry {
        std::string key;
        CLI::Option* option;
        json def;
        std::function<json()> get;
    };
    CLI::App* app_;
    std::vector<Entry> entries_;
};

struct Echo {
    json args = json::object();
    json config;  // null when absent
};

// --config accepts either a config echo (has "command") or a plain
// experiment config.
Echo load_echo(const std::string& path, const std::string& command) {
    Echo echo;
    if (path.empty()) return echo;
    json j = read_json_file(path);
    if (j.is_object() && j.contains("command")) {
        if (j["command"] != command)
            throw ConfigError(path + " echoes '" + j["command"].get<std::string>() + "', not '" + command + "'");
        echo.args = j.value("args", json::object());
        echo.config = j.value("config", json());
    } else {
        echo.config = std::move(j);
    }
    return echo;
}

void write_echo(const fs::path& out_dir, const std::string& command, const json& args, const json& config) {
    fs::create_directories(out_dir);
    json echo = {{"command", command}, {"args", args}};
    if (!config.is_null()) echo["config"] = config;
    write_text(out_dir / "config_echo.json", echo.dump(2) + "\n");
}

// "--set key=value": value parsed as JSON when possible, else taken as a string.
json parse_set_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return json(text);
    }
}

// base <- config file <- dataset flag <- overrides.
eval::ExperimentConfig resolve_experiment(const json& args, const json& file_config,
                                          const eval::ExperimentConfig& base = eval::desk_preset()) {
    eval::ExperimentConfig config = file_config.is_null() ? base : eval::experiment_from_json(file_config, base);
    if (args.contains("data") && !args["data"].get<std::string>().empty())
        config.dataset_root = args["data"].get<std::string>();
    static const std::vector<std::pair<std::string, std::string>> mapped = {
        {"steps", "train.steps"},
        {"lr", "train.lr"},
        {"batch_size", "train.batch_size"},
        {"seed", "seed"},
        {"theta_t", "theta_t"},
        {"mechanism", "mechanism"},
        {"conditions", "conditions"},
        {"layers", "layers"},
        {"n_gs", "n_gs"},
        {"sample_steps", "sample.steps"},
        {"cfg_scale", "sample.cfg_scale"},
        {"sampler", "sample.sampler"},
        {"split", "eval.split"},
        {"max_samples", "eval.max_samples"},
        {"epochs", "cttp.epochs"},
    };
    for (const auto& [arg, path] : mapped)
        if (args.contains(arg) && !args[arg].is_null()) eval::apply_override(config, path, args[arg]);
    if (args.contains("set"))
        for (const auto& item : args["set"]) {
            const std::string s = item.get<std::string>();
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
            eval::apply_override(config, s.substr(0, eq), parse_set_value(s.substr(eq + 1)));
        }
    return config;
}

void add_experiment_overrides(ArgTable& t, bool training) {
    t.add<std::string>("data", "--data", "", "Dataset root (overrides dataset_root)");
    t.add_override<std::uint64_t>("seed", "--seed", "Global seed");
    if (training) {
        t.add_override<long>("steps", "--steps", "Diffusion training steps");
        t.add_override<double>("lr", "--lr", "Learning rate");
        t.add_override<int>("batch_size", "--batch-size", "Batch size");
        t.add_override<int>("theta_t", "--theta-t", "Gel prompt timestep threshold");
        t.add_override<std::string>("mechanism", "--mechanism", "modulation | joint | cross");
        t.add_override<std::string>("conditions", "--conditions", "e.g. texture+shape+gel");
        t.add_override<std::string>("layers", "--layers", "Gel prompt blocks, e.g. 1-2");
        t.add_override<int>("n_gs", "--n-gs", "Gel prompt tokens");
    }
    t.add_override<int>("sample_steps", "--sample-steps", "Sampler steps");
    t.add_override<double>("cfg_scale", "--cfg-scale", "Classifier-free guidance scale");
    t.add_override<std::string>("sampler", "--sampler", "ddim | ddpm");
    t.add_list("set", "--set", "Generic override key=value (repeatable)");
}

void progress_logger(long step, double loss) {
    log::info("step " + std::to_string(step) + " loss " + fmt(loss));
}

// ---- gen-data ------------------------------------------------------------

void cmd_gen_data(const json& a, const json&, std::ostream& out) {
    const fs::path out_dir = a["out"].get<std::string>();
    data::GeneratorConfig gc;
    gc.image_size = a["image_size"].get<int>();
    gc.gel_count = a["gel_count"].get<int>();
    data::TactileGenerator generator(gc);
    data::GridSpec grid;
    grid.seeds_per_combination = a["seeds_per_combination"].get<int>();
    grid.non_contact_per_gel = a["non_contact_per_gel"].get<int>();
    grid.val_fraction = a["val_fraction"].get<double>();
    grid.test_fraction = a["test_fraction"].get<double>();
    grid.seed = a["seed"].get<std::uint64_t>();
    auto generated = data::generate_dataset(generator, grid);
    int flagged = 0;
    if (a["annotate"].get<bool>()) {
        const std::string url = a["annotator_url"].get<std::string>();
        auto annotator = data::make_annotator(url.empty() ? std::nullopt : std::optional<std::string>(url));
        for (auto& s : generated.samples) {
            if (!s.contact) continue;
            const auto r = annotator->annotate(s, "synthetic capture " + s.id);
            if (r.warning) {
                ++flagged;
                continue;  // keep the generator caption
            }
            s.shape_caption = r.shape_caption;
        }
    }
    generated.manifest.root = out_dir;
    data::write_dataset(generated.manifest, generated.samples);

    // One preview per (gel, shape, texture): the first seed of each.
    std::vector<Image> preview;
    std::set<std::tuple<int, int, int>> seen;
    for (const auto& s : generated.samples)
        if (s.contact && seen.insert({s.gel_id, s.shape_id, s.texture_id}).second) preview.push_back(s.image);
    if (!preview.empty())
        write_ppm(out_dir / "preview.ppm", make_grid(preview, static_cast<int>(gc.textures.size())));
    out << "wrote " << generated.samples.size() << " samples (" << generated.manifest.train.size() << " train, "
        << generated.manifest.val.size() << " val, " << generated.manifest.test.size() << " test) to "
        << out_dir.string() << "\n";
    if (flagged > 0) out << flagged << " annotations flagged; generator captions kept\n";
}

// ---- train-diffusion -----------------------------------------------------

void cmd_train_diffusion(const json& a, const json& file_config, std::ostream& out, json& resolved) {
    const auto config = resolve_experiment(a, file_config);
    eval::check_paths(config);
    resolved = eval::to_json(config);
    const fs::path out_dir = a["out"].get<std::string>();
    const auto result = eval::train_pipeline(config, out_dir, progress_logger);
    std::ostringstream s;
    s << "steps,final_loss,first_epoch_loss,last_epoch_loss,config_hash\n"
      << result.steps << ',' << fmt(result.final_loss) << ','
      << (result.epoch_loss.empty() ? std::string("n/a") : fmt(result.epoch_loss.front())) << ','
      << (result.epoch_loss.empty() ? std::string("n/a") : fmt(result.epoch_loss.back())) << ','
      << eval::content_hash(resolved) << '\n';
    write_text(out_dir / "train_summary.csv", s.str());
    out << "trained " << result.steps << " steps, final loss " << fmt(result.final_loss) << "; checkpoint "
        << (out_dir / "model.ckpt").string() << "\n";
}

// ---- train-cttp ----------------------------------------------------------

void cmd_train_cttp(const json& a, const json& file_config, std::ostream& out, json& resolved) {
    const auto config = resolve_experiment(a, file_config);
    eval::check_paths(config);
    resolved = eval::to_json(config);
    const fs::path out_dir = a["out"].get<std::string>();
    fs::create_directories(out_dir);
    const data::DatasetReader reader(config.dataset_root);
    auto run = eval::train_cttp_pipeline(config, reader);
    json extra;
    extra["experiment"] = resolved;
    extra["textures"] = reader.manifest().texture_vocabulary;
    cttp::save_cttp(out_dir / "cttp.ckpt", *run.model, extra);
    std::ostringstream loss;
    loss << "epoch,loss\n";
    for (std::size_t i = 0; i < run.report.epoch_loss.size(); ++i) loss << i << ',' << fmt(run.report.epoch_loss[i]) << '\n';
    write_text(out_dir / "cttp_loss.csv", loss.str());
    std::ostringstream s;
    s << "split,retrieval_at_1,texture_accuracy\n"
      << config.eval.split << ',' << fmt(run.retrieval_at_1) << ',' << fmt(run.texture_accuracy) << '\n';
    write_text(out_dir / "cttp_summary.csv", s.str());
    for (const auto& w : run.report.warnings) out << "warning: " << w << "\n";
    out << "CTTP texture top-1 " << fmt(run.texture_accuracy) << ", R@1 " << fmt(run.retrieval_at_1) << "\n";
}

// ---- sample --------------------------------------------------------------

void cmd_sample(const json& a, const json& file_config, std::ostream& out, json& resolved) {
    const auto loaded = diffusion::load_model(a["checkpoint"].get<std::string>());
    eval::ExperimentConfig base = eval::experiment_from_checkpoint(loaded);
    const auto config = resolve_experiment(a, file_config, base);
    resolved = eval::to_json(config);
    const auto& meta = loaded.metadata;
    const auto textures = meta.at("textures").get<std::vector<std::string>>();
    const auto shapes = meta.at("shapes").get<std::vector<std::string>>();
    const int gels = meta.at("gel_count").get<int>();

    auto pick = [](const std::string& chosen, const std::vector<std::string>& all) {
        return chosen.empty() ? all : std::vector<std::string>{chosen};
    };
    std::vector<int> gel_ids;
    if (a["gel"].get<int>() >= 0) {
        if (a["gel"].get<int>() >= gels) throw IndexError("gel id out of range");
        gel_ids.push_back(a["gel"].get<int>());
    } else {
        for (int g = 0; g < gels; ++g) gel_ids.push_back(g);
    }
    const int count = a["count"].get<int>();
    if (count < 1) throw ConfigError("--count must be positive");

    const fs::path out_dir = a["out"].get<std::string>();
    fs::create_directories(out_dir);
    const auto codec = diffusion::make_codec(loaded.model->config().codec);
    const auto sched = eval::schedule(config);
    std::vector<Image> images;
    std::ostringstream csv;
    csv << "index,seed,gel_id,shape,texture,condition\n";
    std::uint64_t index = 0;
    for (int gel : gel_ids)
        for (const auto& shape : pick(a["shape"].get<std::string>(), shapes))
            for (const auto& texture : pick(a["texture"].get<std::string>(), textures))
                for (int k = 0; k < count; ++k, ++index) {
                    data::TactileSample s;
                    s.shape_caption = shape;
                    s.texture_caption = texture;
                    s.gel_id = gel;
                    const std::string text = eval::condition_text(config, s);
                    const std::uint64_t seed = config.seed + index;
                    images.push_back(diffusion::sample_image(*loaded.model, sched, *codec,
                                                             loaded.tokenizer->tokenize(text),
                                                             eval::condition_gel(config, s),
                                                             eval::sample_options(config, seed)));
                    csv << index << ',' << seed << ',' << gel << ',' << shape << ',' << texture << ",\"" << text
                        << "\"\n";
                }
    write_ppm(out_dir / "samples.ppm", make_grid(images, count > 1 ? count : static_cast<int>(textures.size())));
    write_text(out_dir / "samples.csv", csv.str());
    out << "wrote " << images.size() << " samples to " << (out_dir / "samples.ppm").string() << "\n";
}

// ---- evaluate ------------------------------------------------------------

std::unique_ptr<cttp::CttpModel> maybe_load_cttp(const std::string& path, std::ostream& out) {
    if (path.empty()) return nullptr;
    if (!fs::exists(path)) {
        out << "warning: CTTP checkpoint " << path << " not found; CTTP columns skipped\n";
        log::warning("CTTP checkpoint " + path + " not found");
        return nullptr;
    }
    return cttp::load_cttp(path);
}

void cmd_evaluate(const json& a, const json& file_config, std::ostream& out, json& resolved) {
    auto loaded = diffusion::load_model(a["checkpoint"].get<std::string>());
    const auto config = resolve_experiment(a, file_config, eval::experiment_from_checkpoint(loaded));
    eval::check_paths(config);
    resolved = eval::to_json(config);
    const fs::path out_dir = a["out"].get<std::string>();
    const data::DatasetReader reader(config.dataset_root);
    auto cttp_model = maybe_load_cttp(a["cttp"].get<std::string>(), out);
    double probe_acc = 0.0;
    const auto probe = eval::train_gel_probe(reader, &probe_acc);
    eval::EvalInputs inputs{loaded.model.get(), loaded.tokenizer.get(), cttp_model.get(), &probe, probe_acc};
    std::vector<Image> generated;
    const auto report = eval::evaluate(config, reader, inputs, &generated);
    eval::write_report(report, out_dir);
    const std::size_t shown = std::min<std::size_t>(generated.size(), 64);
    write_ppm(out_dir / "generated.ppm",
              make_grid(std::vector<Image>(generated.begin(), generated.begin() + static_cast<long>(shown)), 8));
    if (a["references"].get<bool>()) {
        auto refs = eval::evaluate_references(config, reader, cttp_model.get(), &probe);
        refs.probe_val_accuracy = probe_acc;
        eval::write_report(refs, out_dir / "references");
    }
    out << "evaluated " << report.samples.size() << " samples: SSIM " << fmt(report.ssim) << ", PSNR "
        << fmt(report.psnr) << ", gel accuracy " << fmt(report.gel_accuracy);
    if (report.cttp) out << ", CTTP " << fmt(*report.cttp) << " (shuffled " << fmt(*report.cttp_shuffled) << ")";
    out << "\n";
}

// ---- ablate --------------------------------------------------------------

void cmd_ablate(const json& a, const json& file_config, std::ostream& out, json& resolved) {
    const auto config = resolve_experiment(a, file_config);
    eval::check_paths(config);
    resolved = eval::to_json(config);
    const std::string grid_arg = a["grid"].get<std::string>();
    if (grid_arg.empty()) throw ConfigError("--grid is required");
    const json grid = fs::exists(grid_arg) ? read_json_file(grid_arg) : parse_set_value(grid_arg);
    // Kept out of the echoed config, which must stay a plain experiment.
    fs::create_directories(a["out"].get<std::string>());
    write_text(fs::path(a["out"].get<std::string>()) / "grid.json", grid.dump(2) + "\n");
    auto cttp_model = maybe_load_cttp(a["cttp"].get<std::string>(), out);
    eval::AblationOptions options;
    options.cttp = cttp_model.get();
    options.progress = [](std::size_t cell, long step, double loss) {
        log::info("cell " + std::to_string(cell) + " step " + std::to_string(step) + " loss " + fmt(loss));
    };
    const auto rows = eval::run_ablation(config, grid, a["out"].get<std::string>(), options);
    int failed = 0;
    for (const auto& r : rows) failed += r.status == "ok" ? 0 : 1;
    out << rows.size() << " cells, " << failed << " failed; table "
        << (fs::path(a["out"].get<std::string>()) / "ablation.csv").string() << "\n";
}

// ---- predict-texture -----------------------------------------------------

void cmd_predict_texture(const json& a, const json&, std::ostream& out) {
    auto model = cttp::load_cttp(a["cttp"].get<std::string>());
    const data::DatasetReader reader(a["data"].get<std::string>());
    const auto& textures = reader.manifest().texture_vocabulary;
    const int k = a["k"].get<int>();
    const int limit = a["max_samples"].get<int>();
    const fs::path out_dir = a["out"].get<std::string>();
    fs::create_directories(out_dir);
    std::ostringstream csv;
    csv << "id,texture,predicted,top_k,scores,lowest\n";
    int total = 0, correct = 0;
    for (const auto& s : reader.load_split(data::parse_split(a["split"].get<std::string>()))) {
        if (!s.contact) continue;
        if (limit > 0 && total >= limit) break;
        const auto p = model->predict_texture(s.image, textures, s.shape_caption, k);
        std::string names, scores;
        for (const auto& [word, score] : p.top) {
            names += (names.empty() ? "" : ";") + word;
            scores += (scores.empty() ? "" : ";") + fmt(score);
        }
        csv << s.id << ',' << s.texture_caption << ',' << p.top.front().first << ',' << names << ',' << scores << ','
            << p.lowest.first << '\n';
        ++total;
        correct += p.top.front().first == s.texture_caption ? 1 : 0;
    }
    if (total == 0) throw DataError("no contact samples to predict");
    write_text(out_dir / "predictions.csv", csv.str());
    const double acc = static_cast<double>(correct) / total;
    write_text(out_dir / "summary.csv", "samples,top1_accuracy\n" + std::to_string(total) + "," + fmt(acc) + "\n");
    out << "texture top-1 accuracy " << fmt(acc) << " over " << total << " samples\n";
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Text-to-touch generation toolkit", "touchgen"};
    app.require_subcommand(1);
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress progress logging");

    using Action = std::function<void(const json& args, const json& file_config, std::ostream& out, json& resolved)>;
    struct Entry {
        CLI::App* app = nullptr;
        std::unique_ptr<ArgTable> table;
        std::string config_path;
        std::vector<std::string> required;
        Action action;
    };
    std::vector<std::unique_ptr<Entry>> entries;
    auto make = [&](const std::string& name, const std::string& help, Action action) -> ArgTable& {
        auto e = std::make_unique<Entry>();
        e->app = app.add_subcommand(name, help);
        e->table = std::make_unique<ArgTable>(e->app);
        e->app->add_option("--config", e->config_path, "Experiment config or config echo (JSON)");
        e->action = std::move(action);
        entries.push_back(std::move(e));
        return *entries.back()->table;
    };
    auto require = [&](std::vector<std::string> keys) { entries.back()->required = std::move(keys); };
    auto plain = [](void (*fn)(const json&, const json&, std::ostream&)) -> Action {
        return [fn](const json& a, const json& c, std::ostream& o, json&) { fn(a, c, o); };
    };

    {
        auto& t = make("gen-data", "Generate the synthetic tactile dataset", plain(cmd_gen_data));
        t.add<std::string>("out", "--out", "", "Dataset root to create");
        t.add<int>("seeds_per_combination", "--seeds-per-combination", 64, "Seeds per gel x shape x texture cell");
        t.add<int>("gel_count", "--gels", 3, "Number of gel statuses");
        t.add<int>("image_size", "--image-size", 32, "Image side in pixels");
        t.add<int>("non_contact_per_gel", "--non-contact", 0, "No-contact frames per gel");
        t.add<double>("val_fraction", "--val-fraction", 0.1, "Validation share");
        t.add<double>("test_fraction", "--test-fraction", 0.1, "Test share");
        t.add<std::uint64_t>("seed", "--seed", 43, "Split/generation seed");
        t.add_flag("annotate", "--annotate", "Caption shapes through the annotator (ANNOTATOR_URL or sidecar)");
        t.add<std::string>("annotator_url", "--annotator-url", "", "Annotation endpoint (default: ANNOTATOR_URL)");
        require({"out"});
    }
    {
        auto& t = make("train-diffusion", "Run the two-stage diffusion training pipeline", cmd_train_diffusion);
        t.add<std::string>("out", "--out", "", "Output directory");
        add_experiment_overrides(t, true);
        require({"out"});
    }
    {
        auto& t = make("train-cttp", "Train the CTTP text-touch scorer", cmd_train_cttp);
        t.add<std::string>("out", "--out", "", "Output directory");
        add_experiment_overrides(t, false);
        t.add_override<int>("epochs", "--epochs", "CTTP epochs");
        t.add_override<std::string>("split", "--split", "Held-out split for the summary");
        require({"out"});
    }
    {
        auto& t = make("sample", "Generate tactile images from a trained model", cmd_sample);
        t.add<std::string>("checkpoint", "--checkpoint", "", "model.ckpt from train-diffusion");
        t.add<std::string>("out", "--out", "", "Output directory");
        t.add<std::string>("shape", "--shape", "", "Shape caption (default: every shape)");
        t.add<std::string>("texture", "--texture", "", "Texture word (default: every texture)");
        t.add<int>("gel", "--gel", -1, "Gel id (default: every gel)");
        t.add<int>("count", "--count", 1, "Samples per condition");
        add_experiment_overrides(t, false);
        require({"checkpoint", "out"});
    }
    {
        auto& t = make("evaluate", "Score generated samples against references", cmd_evaluate);
        t.add<std::string>("checkpoint", "--checkpoint", "", "model.ckpt from train-diffusion");
        t.add<std::string>("cttp", "--cttp", "", "cttp.ckpt (optional)");
        t.add<std::string>("out", "--out", "", "Output directory");
        t.add_flag("references", "--references", "Also write the reference-vs-itself report");
        add_experiment_overrides(t, false);
        t.add_override<std::string>("split", "--split", "Split to evaluate");
        t.add_override<int>("max_samples", "--max-samples", "Evaluate at most this many samples");
        require({"checkpoint", "out"});
    }
    {
        auto& t = make("ablate", "Train and evaluate a grid of config overrides", cmd_ablate);
        t.add<std::string>("grid", "--grid", "", "Grid JSON file or inline JSON object");
        t.add<std::string>("cttp", "--cttp", "", "cttp.ckpt (optional)");
        t.add<std::string>("out", "--out", "", "Output directory");
        add_experiment_overrides(t, true);
        t.add_override<int>("max_samples", "--max-samples", "Evaluate at most this many samples per cell");
        require({"grid", "out"});
    }
    {
        auto& t = make("predict-texture", "Rank texture words for dataset images", plain(cmd_predict_texture));
        t.add<std::string>("cttp", "--cttp", "", "cttp.ckpt");
        t.add<std::string>("data", "--data", "", "Dataset root");
        t.add<std::string>("out", "--out", "", "Output directory");
        t.add<std::string>("split", "--split", "test", "Split to score");
        t.add<int>("k", "--k", 3, "Number of top textures to report");
        t.add<int>("max_samples", "--max-samples", 0, "Score at most this many samples (0 = all)");
        require({"cttp", "data", "out"});
    }

    std::vector<std::string> argv_store{"touchgen"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }
    log::set_quiet(quiet);

    for (const auto& e : entries) {
        if (e->app->parsed() == false) continue;
        const std::string name = e->app->get_name();
        try {
            const Echo echo = load_echo(e->config_path, name);
            const json resolved_args = e->table->resolve(echo.args);
            for (const auto& key : e->required)
                if (resolved_args[key].get<std::string>().empty()) throw ConfigError("--" + key + " is required");
            json resolved_config;
            e->action(resolved_args, echo.config, out, resolved_config);
            write_echo(resolved_args["out"].get<std::string>(), name, resolved_args, resolved_config);
        } catch (const std::exception& ex) {
            err << "touchgen " << name << ": " << ex.what() << "\n";
            return 1;
        }
    }
    return 0;
}

}  // namespace touchgen::cli
