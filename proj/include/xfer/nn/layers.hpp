// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "xfer/nn/tensor.hpp"
#include "xfer/random.hpp"

namespace xfer::nn {

// train: batch statistics, activations cached for backward.
// eval: running statistics, nothing cached, weights never touched.
enum class Phase { train, eval };

template <typename T>
struct Parameter {
    Tensor<T> value;
    Tensor<T> grad;  // same shape as value; empty for buffers
    bool trainable = true;
};

template <typename T>
struct NamedParameter {
    std::string name;
    Parameter<T>* param;
};

template <typename T>
class Layer {
public:
    virtual ~Layer() = default;

    virtual Tensor<T> forward(const Tensor<T>& x, Phase phase) = 0;
    // Accumulates parameter gradients and returns d(loss)/d(input) of the
    // most recent train-phase forward.
    virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
    virtual void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
        (void)prefix;
        (void)out;
    }
    virtual void reset(Rng& rng) { (void)rng; }
    virtual std::unique_ptr<Layer> clone() const = 0;
};

template <typename T>
class Conv2d final : public Layer<T> {
public:
    Conv2d(int in_channels, int out_channels, int kernel, int stride = 1, int padding = 0, bool bias = false);

    Tensor<T> forward(const Tensor<T>& x, Phase phase) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
    // Kaiming normal, fan_out mode.
    void reset(Rng& rng) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Conv2d>(*this); }

private:
    int out_size(int in) const { return (in + 2 * padding_ - kernel_) / stride_ + 1; }
    bool pointwise() const { return kernel_ == 1 && stride_ == 1 && padding_ == 0; }
    void im2col(const T* image, int h, int w, T* col) const;
    void col2im(const T* col, int h, int w, T* image) const;

    int in_channels_;
    int out_channels_;
    int kernel_;
    int stride_;
    int padding_;
    bool has_bias_;
    Parameter<T> weight_;
    Parameter<T> bias_;
    Tensor<T> input_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
public:
    explicit BatchNorm2d(int channels, double eps = 1e-5, double momentum = 0.1);

    Tensor<T> forward(const Tensor<T>& x, Phase phase) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
    void reset(Rng& rng) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<BatchNorm2d>(*this); }

private:
    int channels_;
    double eps_;
    double momentum_;
    Parameter<T> weight_;
    Parameter<T> bias_;
    Parameter<T> running_mean_;
    Parameter<T> running_var_;
    Tensor<T> normalized_;
    std::vector<T> inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Phase phase) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<ReLU>(*this); }

private:
    std::vector<bool> active_;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
public:
    MaxPool2d(int kernel, int stride, int padding = 0) : kernel_(kernel), stride_(stride), padding_(padding) {}

    Tensor<T> forward(const Tensor<T>& x, Phase phase) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<MaxPool2d>(*this); }

private:
    int kernel_;
    int stride_;
    int padding_;
    std::vector<int> input_shape_;
    std::vector<size_t> argmax_;
};

// N x C x H x W -> N x C
template <typename T>
class GlobalAvgPool final : public Layer<T> {
public:
    Tensor<T> forward(const Tensor<T>& x, Phase phase) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<GlobalAvgPool>(*this); }

private:
    std::vector<int> input_shape_;
};

// y = x W^T + b with W stored out x in.
template <typename T>
class Linear final : public Layer<T> {
public:
    Linear(int in_features, int out_features);

    Tensor<T> forward(const Tensor<T>& x, Phase phase) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
    // Zero bias, U(-1/sqrt(in), 1/sqrt(in)) weights.
    void reset(Rng& rng) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Linear>(*this); }

    int in_features() const { return in_features_; }
    int out_features() const { return out_features_; }
    Parameter<T>& weight() { return weight_; }
    Parameter<T>& bias() { return bias_; }
    const Parameter<T>& weight() const { return weight_; }
    const Parameter<T>& bias() const { return bias_; }

private:
    int in_features_;
    int out_features_;
    Parameter<T> weight_;
    Parameter<T> bias_;
    Tensor<T> input_;
};

template <typename T>
class Sequential final : public Layer<T> {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    Sequential& add(std::string name, std::unique_ptr<Layer<T>> layer);

    Tensor<T> forward(const Tensor<T>& x, Phase phase) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
    void reset(Rng& rng) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Sequential>(*this); }

    size_t size() const { return layers_.size(); }

private:
    std::vector<std::pair<std::string, std::unique_ptr<Layer<T>>>> layers_;
};

// 1x1 -> 3x3 (stride) -> 1x1 residual block with expansion 4.
template <typename T>
class Bottleneck final : public Layer<T> {
public:
    Bottleneck(int in_channels, int planes, int stride);
    Bottleneck(const Bottleneck& other);
    Bottleneck& operator=(const Bottleneck&) = delete;

    Tensor<T> forward(const Tensor<T>& x, Phase phase) override;
    Tensor<T> backward(const Tensor<T>& grad_out) override;
    void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
    void reset(Rng& rng) override;
    std::unique_ptr<Layer<T>> clone() const override { return std::make_unique<Bottleneck>(*this); }

    static constexpr int kExpansion = 4;

private:
    Sequential<T> main_;
    std::unique_ptr<Sequential<T>> downsample_;
    ReLU<T> out_relu_;
};

std::string join_name(const std::string& prefix, const std::string& name);

extern template class Conv2d<float>;
extern template class Conv2d<double>;
extern template class BatchNorm2d<float>;
extern template class BatchNorm2d<double>;
extern template class ReLU<float>;
extern template class ReLU<double>;
extern template class MaxPool2d<float>;
extern template class MaxPool2d<double>;
extern template class GlobalAvgPool<float>;
extern template class GlobalAvgPool<double>;
extern template class Linear<float>;
extern template class Linear<double>;
extern template class Sequential<float>;
extern template class Sequential<double>;
extern template class Bottleneck<float>;
extern template class Bottleneck<double>;

}  // namespace xfer::nn
