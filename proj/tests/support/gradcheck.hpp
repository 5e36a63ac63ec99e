#pragma once

// Central finite-difference oracle for tape gradients. Independent of the
// backward closures: it only evaluates the forward pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "touchgen/core/autograd.hpp"

namespace touchgen::testing {

struct GradCheckEntry {
    std::string name;
    double relative_error = 0.0;
    double analytic_norm = 0.0;
};

using LossFn = std::function<ag::Var<double>(ag::Tape<double>&)>;

// Per-tensor error: ||analytic - numeric|| / max(||analytic||, ||numeric||, floor).
inline std::vector<GradCheckEntry> gradient_check(const ag::ParameterList<double>& params, const LossFn& loss,
                                                  double h = 1e-4, double floor = 1e-10) {
    for (const auto& np : params) np.param->zero_grad();
    {
        ag::Tape<double> tape;
        auto l = loss(tape);
        tape.backward(l);
    }
    std::vector<GradCheckEntry> report;
    for (const auto& np : params) {
        auto& value = np.param->value;
        ag::Matrix<double> numeric(value.rows(), value.cols());
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            const double saved = value.data()[i];
            value.data()[i] = saved + h;
            double plus = 0.0, minus = 0.0;
            {
                ag::Tape<double> tape(false);
                plus = loss(tape).item();
            }
            value.data()[i] = saved - h;
            {
                ag::Tape<double> tape(false);
                minus = loss(tape).item();
            }
            value.data()[i] = saved;
            numeric.data()[i] = (plus - minus) / (2.0 * h);
        }
        ag::Matrix<double> analytic = np.param->grad;
        if (analytic.size() != numeric.size()) analytic = ag::Matrix<double>::Zero(value.rows(), value.cols());
        const double denom = std::max({analytic.norm(), numeric.norm(), floor});
        report.push_back({np.name, (analytic - numeric).norm() / denom, analytic.norm()});
    }
    return report;
}

inline double worst_error(const std::vector<GradCheckEntry>& report) {
    double worst = 0.0;
    for (const auto& e : report) worst = std::max(worst, e.relative_error);
    return worst;
}

}  // namespace touchgen::testing
