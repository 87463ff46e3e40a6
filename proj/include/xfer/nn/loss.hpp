// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "xfer/nn/tensor.hpp"

namespace xfer::nn {

template <typename T>
struct LossResult {
    double loss = 0.0;
    Tensor<T> grad;  // d(loss)/d(logits)
};

// Mean over the batch of -log softmax(logits)[target].
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets);

// Mean over all (example, class) pairs of binary cross-entropy on sigmoid(logits).
template <typename T>
LossResult<T> sigmoid_binary_cross_entropy(const Tensor<T>& logits, const std::vector<std::vector<int>>& targets);

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& logits);

extern template LossResult<float> softmax_cross_entropy(const Tensor<float>&, const std::vector<int>&);
extern template LossResult<double> softmax_cross_entropy(const Tensor<double>&, const std::vector<int>&);
extern template LossResult<float> sigmoid_binary_cross_entropy(const Tensor<float>&,
                                                               const std::vector<std::vector<int>>&);
extern template LossResult<double> sigmoid_binary_cross_entropy(const Tensor<double>&,
                                                                const std::vector<std::vector<int>>&);
extern template Tensor<float> softmax(const Tensor<float>&);
extern template Tensor<double> softmax(const Tensor<double>&);
extern template Tensor<float> sigmoid(const Tensor<float>&);
extern template Tensor<double> sigmoid(const Tensor<double>&);

}  // namespace xfer::nn
