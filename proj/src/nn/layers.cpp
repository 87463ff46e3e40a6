// SPDX-License-Identifier: Apache-2.0

#include "xfer/nn/layers.hpp"

#include <Eigen/Core>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace xfer::nn {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using ConstMapRM = Eigen::Map<const MatRM<T>>;

void expect_rank(const std::vector<int>& shape, size_t rank, const char* layer) {
    if (shape.size() != rank) {
        throw std::invalid_argument(fmt::format("{} expects a rank-{} input, got {}", layer, rank, shape_str(shape)));
    }
}

template <typename T>
Parameter<T> make_param(std::vector<int> shape, T fill, bool trainable = true) {
    Parameter<T> p;
    p.value = Tensor<T>(shape, fill);
    if (trainable) p.grad = Tensor<T>(shape, T(0));
    p.trainable = trainable;
    return p;
}

void require_cache(bool cached, const char* layer) {
    if (!cached) throw std::logic_error(fmt::format("{}: backward without a train-phase forward", layer));
}

}  // namespace

std::string join_name(const std::string& prefix, const std::string& name) {
    return prefix.empty() ? name : prefix + "." + name;
}

// Conv2d ---------------------------------------------------------------------

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, bool bias)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      has_bias_(bias),
      weight_(make_param<T>({out_channels, in_channels, kernel, kernel}, T(0))) {
    if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || padding < 0) {
        throw std::invalid_argument("invalid Conv2d geometry");
    }
    if (bias) bias_ = make_param<T>({out_channels}, T(0));
}

template <typename T>
void Conv2d<T>::im2col(const T* image, int h, int w, T* col) const {
    const int ho = out_size(h);
    const int wo = out_size(w);
    for (int c = 0; c < in_channels_; ++c) {
        const T* plane = image + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < kernel_; ++ky) {
            for (int kx = 0; kx < kernel_; ++kx) {
                T* row = col + (static_cast<size_t>((c * kernel_ + ky) * kernel_ + kx)) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride_ - padding_ + ky;
                    T* dst = row + static_cast<size_t>(oy) * wo;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + wo, T(0));
                        continue;
                    }
                    const T* src = plane + static_cast<size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride_ - padding_ + kx;
                        dst[ox] = (ix >= 0 && ix < w) ? src[ix] : T(0);
                    }
                }
            }
        }
    }
}

template <typename T>
void Conv2d<T>::col2im(const T* col, int h, int w, T* image) const {
    const int ho = out_size(h);
    const int wo = out_size(w);
    for (int c = 0; c < in_channels_; ++c) {
        T* plane = image + static_cast<size_t>(c) * h * w;
        for (int ky = 0; ky < kernel_; ++ky) {
            for (int kx = 0; kx < kernel_; ++kx) {
                const T* row = col + (static_cast<size_t>((c * kernel_ + ky) * kernel_ + kx)) * ho * wo;
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy * stride_ - padding_ + ky;
                    if (iy < 0 || iy >= h) continue;
                    const T* src = row + static_cast<size_t>(oy) * wo;
                    T* dst = plane + static_cast<size_t>(iy) * w;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox * stride_ - padding_ + kx;
                        if (ix >= 0 && ix < w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const Tensor<T>& x, Phase phase) {
    expect_rank(x.shape, 4, "Conv2d");
    if (x.dim(1) != in_channels_) {
        throw std::invalid_argument(
            fmt::format("Conv2d expects {} input channels, got {}", in_channels_, x.dim(1)));
    }
    const int n = x.dim(0);
    const int h = x.dim(2);
    const int w = x.dim(3);
    const int ho = out_size(h);
    const int wo = out_size(w);
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("Conv2d input smaller than kernel");
    const int patch = in_channels_ * kernel_ * kernel_;
    const int pixels = ho * wo;

    Tensor<T> out({n, out_channels_, ho, wo});
    ConstMapRM<T> wmat(weight_.value.ptr(), out_channels_, patch);
    std::vector<T> col(pointwise() ? 0 : static_cast<size_t>(patch) * pixels);
    for (int i = 0; i < n; ++i) {
        const T* image = x.ptr() + static_cast<size_t>(i) * in_channels_ * h * w;
        const T* colp = image;
        if (!pointwise()) {
            im2col(image, h, w, col.data());
            colp = col.data();
        }
        ConstMapRM<T> cmat(colp, patch, pixels);
        MapRM<T> omat(out.ptr() + static_cast<size_t>(i) * out_channels_ * pixels, out_channels_, pixels);
        omat.noalias() = wmat * cmat;
        if (has_bias_) {
            for (int o = 0; o < out_channels_; ++o) omat.row(o).array() += bias_.value.data[static_cast<size_t>(o)];
        }
    }
    if (phase == Phase::train) {
        input_ = x;
    } else {
        input_ = Tensor<T>();
    }
    return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const Tensor<T>& grad_out) {
    require_cache(!input_.empty(), "Conv2d");
    const int n = input_.dim(0);
    const int h = input_.dim(2);
    const int w = input_.dim(3);
    const int ho = out_size(h);
    const int wo = out_size(w);
    const int patch = in_channels_ * kernel_ * kernel_;
    const int pixels = ho * wo;

    Tensor<T> dx(input_.shape);
    ConstMapRM<T> wmat(weight_.value.ptr(), out_channels_, patch);
    MapRM<T> dw(weight_.grad.ptr(), out_channels_, patch);
    std::vector<T> col(pointwise() ? 0 : static_cast<size_t>(patch) * pixels);
    std::vector<T> dcol(pointwise() ? 0 : static_cast<size_t>(patch) * pixels);
    for (int i = 0; i < n; ++i) {
        const T* image = input_.ptr() + static_cast<size_t>(i) * in_channels_ * h * w;
        T* dimage = dx.ptr() + static_cast<size_t>(i) * in_channels_ * h * w;
        ConstMapRM<T> g(grad_out.ptr() + static_cast<size_t>(i) * out_channels_ * pixels, out_channels_, pixels);
        if (pointwise()) {
            ConstMapRM<T> cmat(image, patch, pixels);
            dw.noalias() += g * cmat.transpose();
            MapRM<T> dmat(dimage, patch, pixels);
            dmat.noalias() = wmat.transpose() * g;
        } else {
            im2col(image, h, w, col.data());
            ConstMapRM<T> cmat(col.data(), patch, pixels);
            dw.noalias() += g * cmat.transpose();
            MapRM<T> dmat(dcol.data(), patch, pixels);
            dmat.noalias() = wmat.transpose() * g;
            col2im(dcol.data(), h, w, dimage);
        }
        if (has_bias_) {
            for (int o = 0; o < out_channels_; ++o) bias_.grad.data[static_cast<size_t>(o)] += g.row(o).sum();
        }
    }
    return dx;
}

template <typename T>
void Conv2d<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    out.push_back({join_name(prefix, "weight"), &weight_});
    if (has_bias_) out.push_back({join_name(prefix, "bias"), &bias_});
}

template <typename T>
void Conv2d<T>::reset(Rng& rng) {
    const double stddev = std::sqrt(2.0 / (static_cast<double>(out_channels_) * kernel_ * kernel_));
    for (auto& v : weight_.value.data) v = static_cast<T>(stddev * rng.normal());
    if (has_bias_) bias_.value.zero();
}

// BatchNorm2d ----------------------------------------------------------------

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int channels, double eps, double momentum)
    : channels_(channels),
      eps_(eps),
      momentum_(momentum),
      weight_(make_param<T>({channels}, T(1))),
      bias_(make_param<T>({channels}, T(0))),
      running_mean_(make_param<T>({channels}, T(0), false)),
      running_var_(make_param<T>({channels}, T(1), false)) {}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const Tensor<T>& x, Phase phase) {
    expect_rank(x.shape, 4, "BatchNorm2d");
    if (x.dim(1) != channels_) throw std::invalid_argument("BatchNorm2d channel mismatch");
    const int n = x.dim(0);
    const size_t plane = static_cast<size_t>(x.dim(2)) * x.dim(3);
    const size_t m = static_cast<size_t>(n) * plane;
    Tensor<T> y(x.shape);

    if (phase == Phase::eval) {
        for (int c = 0; c < channels_; ++c) {
            const double inv = 1.0 / std::sqrt(static_cast<double>(running_var_.value.data[c]) + eps_);
            const T scale = static_cast<T>(weight_.value.data[c] * inv);
            const T shift = static_cast<T>(bias_.value.data[c] - running_mean_.value.data[c] * weight_.value.data[c] * inv);
            for (int i = 0; i < n; ++i) {
                const size_t off = (static_cast<size_t>(i) * channels_ + c) * plane;
                for (size_t p = 0; p < plane; ++p) y.data[off + p] = x.data[off + p] * scale + shift;
            }
        }
        normalized_ = Tensor<T>();
        return y;
    }

    if (m < 2) throw std::invalid_argument("BatchNorm2d needs more than one value per channel in training");
    normalized_ = Tensor<T>(x.shape);
    inv_std_.assign(static_cast<size_t>(channels_), T(0));
    for (int c = 0; c < channels_; ++c) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const size_t off = (static_cast<size_t>(i) * channels_ + c) * plane;
            for (size_t p = 0; p < plane; ++p) sum += x.data[off + p];
        }
        const double mean = sum / static_cast<double>(m);
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const size_t off = (static_cast<size_t>(i) * channels_ + c) * plane;
            for (size_t p = 0; p < plane; ++p) {
                const double d = x.data[off + p] - mean;
                sq += d * d;
            }
        }
        const double var = sq / static_cast<double>(m);
        const double inv = 1.0 / std::sqrt(var + eps_);
        inv_std_[c] = static_cast<T>(inv);
        const T gamma = weight_.value.data[c];
        const T beta = bias_.value.data[c];
        for (int i = 0; i < n; ++i) {
            const size_t off = (static_cast<size_t>(i) * channels_ + c) * plane;
            for (size_t p = 0; p < plane; ++p) {
                const T xh = static_cast<T>((x.data[off + p] - mean) * inv);
                normalized_.data[off + p] = xh;
                y.data[off + p] = gamma * xh + beta;
            }
        }
        const double unbiased = sq / static_cast<double>(m - 1);
        running_mean_.value.data[c] = static_cast<T>((1.0 - momentum_) * running_mean_.value.data[c] + momentum_ * mean);
        running_var_.value.data[c] =
            static_cast<T>((1.0 - momentum_) * running_var_.value.data[c] + momentum_ * unbiased);
    }
    return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(const Tensor<T>& grad_out) {
    require_cache(!normalized_.empty(), "BatchNorm2d");
    const int n = normalized_.dim(0);
    const size_t plane = static_cast<size_t>(normalized_.dim(2)) * normalized_.dim(3);
    const double m = static_cast<double>(n) * static_cast<double>(plane);
    Tensor<T> dx(normalized_.shape);
    for (int c = 0; c < channels_; ++c) {
        double dgamma = 0.0;
        double dbeta = 0.0;
        for (int i = 0; i < n; ++i) {
            const size_t off = (static_cast<size_t>(i) * channels_ + c) * plane;
            for (size_t p = 0; p < plane; ++p) {
                dgamma += static_cast<double>(grad_out.data[off + p]) * normalized_.data[off + p];
                dbeta += grad_out.data[off + p];
            }
        }
        weight_.grad.data[c] += static_cast<T>(dgamma);
        bias_.grad.data[c] += static_cast<T>(dbeta);
        const double k = static_cast<double>(weight_.value.data[c]) * inv_std_[c] / m;
        for (int i = 0; i < n; ++i) {
            const size_t off = (static_cast<size_t>(i) * channels_ + c) * plane;
            for (size_t p = 0; p < plane; ++p) {
                dx.data[off + p] = static_cast<T>(
                    k * (m * grad_out.data[off + p] - dbeta - normalized_.data[off + p] * dgamma));
            }
        }
    }
    return dx;
}

template <typename T>
void BatchNorm2d<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    out.push_back({join_name(prefix, "weight"), &weight_});
    out.push_back({join_name(prefix, "bias"), &bias_});
    out.push_back({join_name(prefix, "running_mean"), &running_mean_});
    out.push_back({join_name(prefix, "running_var"), &running_var_});
}

template <typename T>
void BatchNorm2d<T>::reset(Rng&) {
    std::fill(weight_.value.data.begin(), weight_.value.data.end(), T(1));
    bias_.value.zero();
    running_mean_.value.zero();
    std::fill(running_var_.value.data.begin(), running_var_.value.data.end(), T(1));
}

// ReLU -----------------------------------------------------------------------

template <typename T>
Tensor<T> ReLU<T>::forward(const Tensor<T>& x, Phase phase) {
    Tensor<T> y(x.shape);
    for (size_t i = 0; i < x.size(); ++i) y.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
    if (phase == Phase::train) {
        active_.resize(x.size());
        for (size_t i = 0; i < x.size(); ++i) active_[i] = x.data[i] > T(0);
    } else {
        active_.clear();
    }
    return y;
}

template <typename T>
Tensor<T> ReLU<T>::backward(const Tensor<T>& grad_out) {
    require_cache(active_.size() == grad_out.size() && !active_.empty(), "ReLU");
    Tensor<T> dx(grad_out.shape);
    for (size_t i = 0; i < dx.size(); ++i) dx.data[i] = active_[i] ? grad_out.data[i] : T(0);
    return dx;
}

// MaxPool2d ------------------------------------------------------------------

template <typename T>
Tensor<T> MaxPool2d<T>::forward(const Tensor<T>& x, Phase phase) {
    expect_rank(x.shape, 4, "MaxPool2d");
    const int n = x.dim(0);
    const int c = x.dim(1);
    const int h = x.dim(2);
    const int w = x.dim(3);
    const int ho = (h + 2 * padding_ - kernel_) / stride_ + 1;
    const int wo = (w + 2 * padding_ - kernel_) / stride_ + 1;
    if (ho <= 0 || wo <= 0) throw std::invalid_argument("MaxPool2d input smaller than window");
    Tensor<T> y({n, c, ho, wo});
    const bool keep = phase == Phase::train;
    if (keep) argmax_.assign(y.size(), 0);
    size_t o = 0;
    for (int p = 0; p < n * c; ++p) {
        const size_t base = static_cast<size_t>(p) * h * w;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox, ++o) {
                T best = -std::numeric_limits<T>::infinity();
                size_t best_idx = base;
                for (int ky = 0; ky < kernel_; ++ky) {
                    const int iy = oy * stride_ - padding_ + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kernel_; ++kx) {
                        const int ix = ox * stride_ - padding_ + kx;
                        if (ix < 0 || ix >= w) continue;
                        const size_t idx = base + static_cast<size_t>(iy) * w + ix;
                        if (x.data[idx] > best) {
                            best = x.data[idx];
                            best_idx = idx;
                        }
                    }
                }
                y.data[o] = best;
                if (keep) argmax_[o] = best_idx;
            }
        }
    }
    input_shape_ = keep ? x.shape : std::vector<int>{};
    return y;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(const Tensor<T>& grad_out) {
    require_cache(!input_shape_.empty() && argmax_.size() == grad_out.size(), "MaxPool2d");
    Tensor<T> dx(input_shape_);
    for (size_t i = 0; i < grad_out.size(); ++i) dx.data[argmax_[i]] += grad_out.data[i];
    return dx;
}

// GlobalAvgPool --------------------------------------------------------------

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Phase phase) {
    expect_rank(x.shape, 4, "GlobalAvgPool");
    const int n = x.dim(0);
    const int c = x.dim(1);
    const size_t plane = static_cast<size_t>(x.dim(2)) * x.dim(3);
    Tensor<T> y({n, c});
    for (int i = 0; i < n * c; ++i) {
        double s = 0.0;
        const T* p = x.ptr() + static_cast<size_t>(i) * plane;
        for (size_t k = 0; k < plane; ++k) s += p[k];
        y.data[static_cast<size_t>(i)] = static_cast<T>(s / static_cast<double>(plane));
    }
    input_shape_ = phase == Phase::train ? x.shape : std::vector<int>{};
    return y;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& grad_out) {
    require_cache(!input_shape_.empty(), "GlobalAvgPool");
    Tensor<T> dx(input_shape_);
    const size_t plane = static_cast<size_t>(input_shape_[2]) * input_shape_[3];
    const T inv = T(1) / static_cast<T>(plane);
    for (size_t i = 0; i < grad_out.size(); ++i) {
        std::fill(dx.ptr() + i * plane, dx.ptr() + (i + 1) * plane, grad_out.data[i] * inv);
    }
    return dx;
}

// Linear ---------------------------------------------------------------------

template <typename T>
Linear<T>::Linear(int in_features, int out_features)
    : in_features_(in_features),
      out_features_(out_features),
      weight_(make_param<T>({out_features, in_features}, T(0))),
      bias_(make_param<T>({out_features}, T(0))) {
    if (in_features <= 0 || out_features <= 0) throw std::invalid_argument("Linear dimensions must be positive");
}

template <typename T>
Tensor<T> Linear<T>::forward(const Tensor<T>& x, Phase phase) {
    expect_rank(x.shape, 2, "Linear");
    if (x.dim(1) != in_features_) {
        throw std::invalid_argument(fmt::format("Linear expects {} features, got {}", in_features_, x.dim(1)));
    }
    const int n = x.dim(0);
    Tensor<T> y({n, out_features_});
    ConstMapRM<T> xm(x.ptr(), n, in_features_);
    ConstMapRM<T> wm(weight_.value.ptr(), out_features_, in_features_);
    MapRM<T> ym(y.ptr(), n, out_features_);
    ym.noalias() = xm * wm.transpose();
    for (int i = 0; i < n; ++i) {
        for (int o = 0; o < out_features_; ++o) ym(i, o) += bias_.value.data[static_cast<size_t>(o)];
    }
    if (phase == Phase::train) {
        input_ = x;
    } else {
        input_ = Tensor<T>();
    }
    return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const Tensor<T>& grad_out) {
    require_cache(!input_.empty(), "Linear");
    const int n = input_.dim(0);
    ConstMapRM<T> xm(input_.ptr(), n, in_features_);
    ConstMapRM<T> g(grad_out.ptr(), n, out_features_);
    ConstMapRM<T> wm(weight_.value.ptr(), out_features_, in_features_);
    MapRM<T> dw(weight_.grad.ptr(), out_features_, in_features_);
    dw.noalias() += g.transpose() * xm;
    for (int o = 0; o < out_features_; ++o) bias_.grad.data[static_cast<size_t>(o)] += g.col(o).sum();
    Tensor<T> dx({n, in_features_});
    MapRM<T> dxm(dx.ptr(), n, in_features_);
    dxm.noalias() = g * wm;
    return dx;
}

template <typename T>
void Linear<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    out.push_back({join_name(prefix, "weight"), &weight_});
    out.push_back({join_name(prefix, "bias"), &bias_});
}

template <typename T>
void Linear<T>::reset(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features_));
    for (auto& v : weight_.value.data) v = static_cast<T>(rng.uniform(-bound, bound));
    bias_.value.zero();
}

// Sequential -----------------------------------------------------------------

template <typename T>
Sequential<T>::Sequential(const Sequential& other) {
    for (const auto& [name, layer] : other.layers_) layers_.emplace_back(name, layer->clone());
}

template <typename T>
Sequential<T>& Sequential<T>::operator=(const Sequential& other) {
    if (this != &other) {
        Sequential copy(other);
        layers_ = std::move(copy.layers_);
    }
    return *this;
}

template <typename T>
Sequential<T>& Sequential<T>::add(std::string name, std::unique_ptr<Layer<T>> layer) {
    layers_.emplace_back(std::move(name), std::move(layer));
    return *this;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Phase phase) {
    if (layers_.empty()) return x;
    Tensor<T> h = layers_.front().second->forward(x, phase);
    for (size_t i = 1; i < layers_.size(); ++i) h = layers_[i].second->forward(h, phase);
    return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
    if (layers_.empty()) return grad_out;
    Tensor<T> g = layers_.back().second->backward(grad_out);
    for (size_t i = layers_.size() - 1; i-- > 0;) g = layers_[i].second->backward(g);
    return g;
}

template <typename T>
void Sequential<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    for (auto& [name, layer] : layers_) layer->collect(join_name(prefix, name), out);
}

template <typename T>
void Sequential<T>::reset(Rng& rng) {
    for (auto& entry : layers_) entry.second->reset(rng);
}

// Bottleneck -----------------------------------------------------------------

template <typename T>
Bottleneck<T>::Bottleneck(int in_channels, int planes, int stride) {
    const int out_channels = planes * kExpansion;
    main_.add("conv1", std::make_unique<Conv2d<T>>(in_channels, planes, 1))
        .add("bn1", std::make_unique<BatchNorm2d<T>>(planes))
        .add("relu1", std::make_unique<ReLU<T>>())
        .add("conv2", std::make_unique<Conv2d<T>>(planes, planes, 3, stride, 1))
        .add("bn2", std::make_unique<BatchNorm2d<T>>(planes))
        .add("relu2", std::make_unique<ReLU<T>>())
        .add("conv3", std::make_unique<Conv2d<T>>(planes, out_channels, 1))
        .add("bn3", std::make_unique<BatchNorm2d<T>>(out_channels));
    if (stride != 1 || in_channels != out_channels) {
        downsample_ = std::make_unique<Sequential<T>>();
        downsample_->add("0", std::make_unique<Conv2d<T>>(in_channels, out_channels, 1, stride))
            .add("1", std::make_unique<BatchNorm2d<T>>(out_channels));
    }
}

template <typename T>
Bottleneck<T>::Bottleneck(const Bottleneck& other)
    : main_(other.main_),
      downsample_(other.downsample_ ? std::make_unique<Sequential<T>>(*other.downsample_) : nullptr),
      out_relu_(other.out_relu_) {}

template <typename T>
Tensor<T> Bottleneck<T>::forward(const Tensor<T>& x, Phase phase) {
    Tensor<T> out = main_.forward(x, phase);
    if (downsample_) {
        const Tensor<T> shortcut = downsample_->forward(x, phase);
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += shortcut.data[i];
    } else {
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += x.data[i];
    }
    return out_relu_.forward(out, phase);
}

template <typename T>
Tensor<T> Bottleneck<T>::backward(const Tensor<T>& grad_out) {
    const Tensor<T> g = out_relu_.backward(grad_out);
    Tensor<T> dx = main_.backward(g);
    const Tensor<T> dshort = downsample_ ? downsample_->backward(g) : g;
    for (size_t i = 0; i < dx.size(); ++i) dx.data[i] += dshort.data[i];
    return dx;
}

template <typename T>
void Bottleneck<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
    main_.collect(prefix, out);
    if (downsample_) downsample_->collect(join_name(prefix, "downsample"), out);
}

template <typename T>
void Bottleneck<T>::reset(Rng& rng) {
    main_.reset(rng);
    if (downsample_) downsample_->reset(rng);
}

template class Conv2d<float>;
template class Conv2d<double>;
template class BatchNorm2d<float>;
template class BatchNorm2d<double>;
template class ReLU<float>;
template class ReLU<double>;
template class MaxPool2d<float>;
template class MaxPool2d<double>;
template class GlobalAvgPool<float>;
template class GlobalAvgPool<double>;
template class Linear<float>;
template class Linear<double>;
template class Sequential<float>;
template class Sequential<double>;
template class Bottleneck<float>;
template class Bottleneck<double>;

}  // namespace xfer::nn
