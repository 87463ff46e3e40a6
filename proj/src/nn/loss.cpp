// SPDX-License-Identifier: Apache-2.0

#include "xfer/nn/loss.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace xfer::nn {

namespace {

template <typename T>
void check_logits(const Tensor<T>& logits, size_t n) {
    if (logits.rank() != 2) throw std::invalid_argument("logits must be N x K");
    if (static_cast<size_t>(logits.dim(0)) != n) {
        throw std::invalid_argument(fmt::format("{} targets for {} logit rows", n, logits.dim(0)));
    }
}

}  // namespace

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets) {
    check_logits(logits, targets.size());
    const int n = logits.dim(0);
    const int k = logits.dim(1);
    LossResult<T> r;
    r.grad = Tensor<T>(logits.shape);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const int t = targets[static_cast<size_t>(i)];
        if (t < 0 || t >= k) throw std::invalid_argument(fmt::format("target {} outside [0, {})", t, k));
        const T* row = logits.ptr() + static_cast<size_t>(i) * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const double log_z = mx + std::log(z);
        total += log_z - row[t];
        T* g = r.grad.ptr() + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const double p = std::exp(row[j] - log_z);
            g[j] = static_cast<T>((p - (j == t ? 1.0 : 0.0)) / n);
        }
    }
    r.loss = total / n;
    return r;
}

template <typename T>
LossResult<T> sigmoid_binary_cross_entropy(const Tensor<T>& logits, const std::vector<std::vector<int>>& targets) {
    check_logits(logits, targets.size());
    const int n = logits.dim(0);
    const int k = logits.dim(1);
    LossResult<T> r;
    r.grad = Tensor<T>(logits.shape);
    const double denom = static_cast<double>(n) * k;
    std::vector<double> y(static_cast<size_t>(k));
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        std::fill(y.begin(), y.end(), 0.0);
        for (int l : targets[static_cast<size_t>(i)]) {
            if (l < 0 || l >= k) throw std::invalid_argument(fmt::format("target {} outside [0, {})", l, k));
            y[static_cast<size_t>(l)] = 1.0;
        }
        const T* row = logits.ptr() + static_cast<size_t>(i) * k;
        T* g = r.grad.ptr() + static_cast<size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const double z = row[j];
            total += std::max(z, 0.0) - z * y[j] + std::log1p(std::exp(-std::abs(z)));
            const double s = 1.0 / (1.0 + std::exp(-z));
            g[j] = static_cast<T>((s - y[j]) / denom);
        }
    }
    r.loss = total / denom;
    return r;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    const int n = logits.dim(0);
    const int k = logits.dim(1);
    Tensor<T> out(logits.shape);
    for (int i = 0; i < n; ++i) {
        const T* row = logits.ptr() + static_cast<size_t>(i) * k;
        T* o = out.ptr() + static_cast<size_t>(i) * k;
        const double mx = *std::max_element(row, row + k);
        double z = 0.0;
        for (int j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        for (int j = 0; j < k; ++j) o[j] = static_cast<T>(std::exp(row[j] - mx) / z);
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& logits) {
    Tensor<T> out(logits.shape);
    for (size_t i = 0; i < logits.size(); ++i) out.data[i] = static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(logits.data[i]))));
    return out;
}

template LossResult<float> softmax_cross_entropy(const Tensor<float>&, const std::vector<int>&);
template LossResult<double> softmax_cross_entropy(const Tensor<double>&, const std::vector<int>&);
template LossResult<float> sigmoid_binary_cross_entropy(const Tensor<float>&, const std::vector<std::vector<int>>&);
template LossResult<double> sigmoid_binary_cross_entropy(const Tensor<double>&, const std::vector<std::vector<int>>&);
template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template Tensor<float> sigmoid(const Tensor<float>&);
template Tensor<double> sigmoid(const Tensor<double>&);

}  // namespace xfer::nn
