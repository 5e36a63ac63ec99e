#include "touchgen/eval/probe.hpp"

#include <cmath>

#include "touchgen/core/errors.hpp"
#include "touchgen/core/optim.hpp"

namespace touchgen::eval {

namespace {

constexpr int kPool = 4;

ag::Matrix<double> feature_matrix(std::span<const Image> images) {
    if (images.empty()) throw DataError("probe needs at least one image");
    const auto first = GelProbe::features(images.front());
    ag::Matrix<double> m(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(first.size()));
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto f = GelProbe::features(images[i]);
        if (f.size() != first.size()) throw ShapeError("probe images differ in shape");
        for (std::size_t k = 0; k < f.size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = f[k];
    }
    return m;
}

}  // namespace

GelProbe::GelProbe(int classes) : classes_(classes) {
    if (classes < 1) throw ConfigError("probe needs at least one class");
}

std::vector<double> GelProbe::features(const Image& image) {
    if (image.height < kPool || image.width < kPool) throw ShapeError("probe images must be at least 4x4");
    std::vector<double> f(static_cast<std::size_t>(kPool * kPool * image.channels), 0.0);
    std::vector<int> counts(f.size(), 0);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x) {
            const int cell = (y * kPool / image.height) * kPool + x * kPool / image.width;
            for (int c = 0; c < image.channels; ++c) {
                const auto k = static_cast<std::size_t>(cell * image.channels + c);
                f[k] += image.at(y, x, c);
                ++counts[k];
            }
        }
    for (std::size_t k = 0; k < f.size(); ++k) f[k] /= counts[k];
    return f;
}

void GelProbe::fit(std::span<const Image> images, std::span<const int> labels, int epochs, double lr) {
    if (images.size() != labels.size()) throw ShapeError("probe images and labels differ in count");
    for (int l : labels)
        if (l < 0 || l >= classes_) throw IndexError("probe label " + std::to_string(l) + " out of range");
    ag::Matrix<double> x = feature_matrix(images);
    mean_ = x.colwise().mean();
    scale_ = ((x.rowwise() - mean_.row(0)).array().square().colwise().mean().sqrt() + 1e-6).inverse().matrix();
    x = ((x.rowwise() - mean_.row(0)).array().rowwise() * scale_.row(0).array()).matrix();

    weight_ = ag::Parameter<double>(ag::Matrix<double>::Zero(x.cols(), classes_));
    bias_ = ag::Parameter<double>(ag::Matrix<double>::Zero(1, classes_));
    ag::ParameterList<double> params{{"weight", &weight_}, {"bias", &bias_}};
    optim::AdamW<double> opt(params, {lr, 0.9, 0.999, 1e-8, 0.0});
    for (int e = 0; e < epochs; ++e) {
        opt.zero_grad();
        ag::Tape<double> tape;
        const auto logits = ag::add_row(ag::matmul(tape.constant(x), tape.param(weight_)), tape.param(bias_));
        tape.backward(ag::softmax_cross_entropy(logits, labels));
        opt.step();
    }
}

int GelProbe::predict(const Image& image) const {
    if (weight_.value.size() == 0) throw ConfigError("probe used before fit()");
    const auto f = features(image);
    if (static_cast<Eigen::Index>(f.size()) != weight_.value.rows()) throw ShapeError("probe feature size mismatch");
    ag::Matrix<double> row(1, static_cast<Eigen::Index>(f.size()));
    for (std::size_t k = 0; k < f.size(); ++k) row(0, static_cast<Eigen::Index>(k)) = (f[k] - mean_(0, static_cast<Eigen::Index>(k))) * scale_(0, static_cast<Eigen::Index>(k));
    const ag::Matrix<double> logits = row * weight_.value + bias_.value;
    Eigen::Index best = 0;
    logits.row(0).maxCoeff(&best);
    return static_cast<int>(best);
}

double GelProbe::accuracy(std::span<const Image> images, std::span<const int> labels) const {
    if (images.size() != labels.size() || images.empty()) throw ShapeError("probe accuracy needs matching, non-empty inputs");
    int hits = 0;
    for (std::size_t i = 0; i < images.size(); ++i) hits += predict(images[i]) == labels[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(images.size());
}

}  // namespace touchgen::eval
