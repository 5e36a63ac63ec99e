#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "touchgen/cttp/cttp.hpp"
#include "touchgen/data/dataset.hpp"
#include "touchgen/diffusion/model.hpp"
#include "touchgen/eval/experiment.hpp"
#include "touchgen/eval/probe.hpp"

namespace touchgen::eval {

// One cached training example: model-space tokens plus the encoded condition.
struct PreparedSample {
    std::string id;
    ag::Matrix<float> x0;
    text::TokenSequence tokens;
    // -1 when the gel condition is switched off.
    int gel_id = -1;
};

struct PreparedData {
    std::unique_ptr<text::Tokenizer> tokenizer;
    int gel_count = 0;
    std::vector<PreparedSample> samples;
    int skipped_non_contact = 0;
};

// Object-level text and gel id for a sample under the configured toggles.
std::string condition_text(const ExperimentConfig& config, const data::TactileSample& sample);
int condition_gel(const ExperimentConfig& config, const data::TactileSample& sample);

// Stage 1: drop non-contact frames, encode images through the codec and
// captions through the tokenizer. DataError when nothing is left.
PreparedData prepare_training_data(const ExperimentConfig& config, const data::DatasetReader& reader,
                                   data::Split split = data::Split::train);

struct LossPoint {
    long step = 0;
    int epoch = 0;
    double loss = 0.0;  // mean over the logging window
    double lr = 0.0;
};

struct TrainResult {
    std::vector<LossPoint> curve;
    std::vector<double> epoch_loss;
    double final_loss = 0.0;  // last logging window
    long steps = 0;
};

struct TrainedModel {
    std::unique_ptr<diffusion::TextToTouchModel<float>> model;
    std::unique_ptr<text::Tokenizer> tokenizer;
    TrainResult result;
};

using ProgressFn = std::function<void(long step, double loss)>;

// Stage 2 on prepared data. Deterministic given config.seed.
TrainedModel train_diffusion(const ExperimentConfig& config, PreparedData data, const ProgressFn& progress = {});

// Both stages; writes model.ckpt, loss.csv and epoch_loss.csv into out_dir.
TrainResult train_pipeline(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                           const ProgressFn& progress = {});

void write_loss_csv(const TrainResult& result, const std::filesystem::path& out_dir);

// Rebuilds the experiment config stored alongside a trained model.
ExperimentConfig experiment_from_checkpoint(const diffusion::LoadedModel& loaded);

struct SampleMetrics {
    std::string id;
    std::string caption;
    int gel_id = 0;
    int probe_gel = -1;
    double ssim = 0.0;
    double psnr = 0.0;
    std::optional<double> cttp;
    std::optional<double> cttp_shuffled;
};

struct MetricReport {
    std::vector<SampleMetrics> samples;
    double ssim = 0.0;
    double psnr = 0.0;
    std::optional<double> cttp;
    std::optional<double> cttp_shuffled;
    // Fraction of generated samples the probe assigns to the requested gel.
    double gel_accuracy = 0.0;
    double probe_val_accuracy = 0.0;
    std::string config_hash;
    // Hash of the per-sample table; equal ids mean identical reports.
    std::string content_id;
    std::vector<std::string> warnings;
};

// Trains on the train split, reports accuracy on the val split.
GelProbe train_gel_probe(const data::DatasetReader& reader, double* val_accuracy = nullptr);

struct EvalInputs {
    diffusion::TextToTouchModel<float>* model = nullptr;
    const text::Tokenizer* tokenizer = nullptr;
    // Optional; the CTTP columns are skipped with a warning when null.
    cttp::CttpModel* cttp = nullptr;
    const GelProbe* probe = nullptr;
    double probe_val_accuracy = 0.0;
};

// One generated sample per contact frame of config.eval.split, seeded with
// config.seed + index, scored against its reference.
MetricReport evaluate(const ExperimentConfig& config, const data::DatasetReader& reader, const EvalInputs& inputs,
                      std::vector<Image>* generated = nullptr);

// The upper-bound sanity report: every reference scored against itself.
MetricReport evaluate_references(const ExperimentConfig& config, const data::DatasetReader& reader,
                                 cttp::CttpModel* cttp = nullptr, const GelProbe* probe = nullptr);

struct CttpRun {
    std::unique_ptr<cttp::CttpModel> model;
    cttp::CttpTrainReport report;
    // Both measured on the contact frames of config.eval.split.
    double retrieval_at_1 = 0.0;
    double texture_accuracy = 0.0;
};

// Trains the CTTP scorer on captioned contact frames of the train split.
CttpRun train_cttp_pipeline(const ExperimentConfig& config, const data::DatasetReader& reader);

// Top-1 texture accuracy of predict_texture over contact samples.
double texture_accuracy(cttp::CttpModel& model, std::span<const data::TactileSample> samples,
                        const std::vector<std::string>& textures);

// samples.csv and summary.csv (LPIPS reserved as "n/a").
void write_report(const MetricReport& report, const std::filesystem::path& out_dir);

}  // namespace touchgen::eval
