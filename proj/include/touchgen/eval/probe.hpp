#pragma once

#include <span>
#include <vector>

#include "touchgen/core/autograd.hpp"
#include "touchgen/core/image.hpp"

namespace touchgen::eval {

// Softmax regression on standardised 4x4 average-pooled colour features.
// Used to check that generated images carry the requested gel status.
class GelProbe {
public:
    explicit GelProbe(int classes);

    void fit(std::span<const Image> images, std::span<const int> labels, int epochs = 300, double lr = 0.05);
    int predict(const Image& image) const;
    double accuracy(std::span<const Image> images, std::span<const int> labels) const;
    int classes() const { return classes_; }

    static std::vector<double> features(const Image& image);

private:
    int classes_;
    ag::Matrix<double> mean_, scale_;
    ag::Parameter<double> weight_, bias_;
};

}  // namespace touchgen::eval
