// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "xfer/nn/layers.hpp"

namespace xfer::nn {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Adam without weight decay. The parameter list passed to step() must be the
// same, in the same order, on every call.
template <typename T>
class Adam {
public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    void step(const std::vector<NamedParameter<T>>& params, double lr) {
        if (first_.empty()) {
            for (const auto& p : params) {
                first_.emplace_back(p.param->value.size(), 0.0);
                second_.emplace_back(p.param->value.size(), 0.0);
            }
        }
        if (first_.size() != params.size()) throw std::logic_error("Adam parameter list changed between steps");
        ++steps_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
        for (size_t i = 0; i < params.size(); ++i) {
            Parameter<T>& p = *params[i].param;
            if (!p.trainable) continue;
            auto& m = first_[i];
            auto& v = second_[i];
            for (size_t j = 0; j < p.value.size(); ++j) {
                const double g = p.grad.data[j];
                m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
                v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
                const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.epsilon);
                p.value.data[j] = static_cast<T>(p.value.data[j] - lr * update);
            }
        }
    }

    long steps() const { return steps_; }

private:
    AdamConfig config_;
    long steps_ = 0;
    std::vector<std::vector<double>> first_;
    std::vector<std::vector<double>> second_;
};

template <typename T>
void zero_grad(const std::vector<NamedParameter<T>>& params) {
    for (const auto& p : params) {
        if (p.param->trainable) p.param->grad.zero();
    }
}

}  // namespace xfer::nn
