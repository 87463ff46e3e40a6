// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "xfer/nn/adam.hpp"
#include "xfer/nn/layers.hpp"
#include "xfer/nn/loss.hpp"

namespace xfer::nn {
namespace {

Tensor<double> random_tensor(std::vector<int> shape, Rng& rng) {
    Tensor<double> t(std::move(shape));
    for (auto& v : t.data) v = rng.normal();
    return t;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-6, std::abs(a) + std::abs(b)); }

// loss = <layer(x), w> for a fixed random w; compares backward() with central differences on the input and on
// every parameter.
void check_layer(Layer<double>& layer, Tensor<double> x, Rng& rng, double tol = 1e-6) {
    const Tensor<double> y = layer.forward(x, Phase::train);
    const Tensor<double> w = random_tensor(y.shape, rng);
    std::vector<NamedParameter<double>> params;
    layer.collect("", params);
    zero_grad(params);
    const Tensor<double> gx = layer.backward(w);

    auto loss = [&]() { return dot(layer.forward(x, Phase::train), w); };
    const double h = 1e-5;
    for (size_t i = 0; i < x.size(); i += 1 + x.size() / 40) {
        const double keep = x.data[i];
        x.data[i] = keep + h;
        const double up = loss();
        x.data[i] = keep - h;
        const double down = loss();
        x.data[i] = keep;
        EXPECT_LT(rel_err((up - down) / (2 * h), gx.data[i]), tol) << "input " << i;
    }
    for (const auto& p : params) {
        if (!p.param->trainable) continue;
        auto& v = p.param->value.data;
        for (size_t i = 0; i < v.size(); i += 1 + v.size() / 20) {
            const double keep = v[i];
            v[i] = keep + h;
            const double up = loss();
            v[i] = keep - h;
            const double down = loss();
            v[i] = keep;
            EXPECT_LT(rel_err((up - down) / (2 * h), p.param->grad.data[i]), tol) << p.name << " " << i;
        }
    }
}

TEST(Gradients, Conv2d) {
    Rng rng(1);
    for (auto [k, s, pad] : {std::tuple{3, 1, 1}, std::tuple{3, 2, 1}, std::tuple{1, 1, 0}, std::tuple{7, 2, 3}}) {
        Conv2d<double> conv(2, 3, k, s, pad, true);
        conv.reset(rng);
        check_layer(conv, random_tensor({2, 2, 9, 9}, rng), rng);
    }
}

TEST(Gradients, BatchNorm2d) {
    Rng rng(2);
    BatchNorm2d<double> bn(3);
    bn.reset(rng);
    std::vector<NamedParameter<double>> params;
    bn.collect("", params);
    for (auto& p : params) {
        if (p.param->trainable) {
            for (auto& v : p.param->value.data) v = rng.normal();
        }
    }
    check_layer(bn, random_tensor({3, 3, 4, 4}, rng), rng, 1e-5);
}

TEST(Gradients, ReluPoolLinear) {
    Rng rng(3);
    ReLU<double> relu;
    check_layer(relu, random_tensor({2, 3, 5, 5}, rng), rng);
    MaxPool2d<double> pool(2, 2);
    check_layer(pool, random_tensor({2, 3, 6, 6}, rng), rng);
    MaxPool2d<double> pool3(3, 2, 1);
    check_layer(pool3, random_tensor({2, 2, 7, 7}, rng), rng);
    GlobalAvgPool<double> gap;
    check_layer(gap, random_tensor({2, 3, 4, 5}, rng), rng);
    Linear<double> lin(6, 4);
    lin.reset(rng);
    check_layer(lin, random_tensor({3, 6}, rng), rng);
}

TEST(Gradients, Bottleneck) {
    Rng rng(4);
    Bottleneck<double> block(8, 2, 2);
    block.reset(rng);
    check_layer(block, random_tensor({2, 8, 6, 6}, rng), rng, 1e-5);
}

TEST(Loss, SoftmaxCrossEntropyByHand) {
    Tensor<double> logits({2, 2});
    logits.data = {0.0, 0.0, std::log(3.0), 0.0};
    const auto r = softmax_cross_entropy(logits, {0, 1});
    // -log(1/2) and -log(1/4), averaged
    EXPECT_NEAR(r.loss, (std::log(2.0) + std::log(4.0)) / 2, 1e-12);
    EXPECT_NEAR(r.grad.data[0], (0.5 - 1.0) / 2, 1e-12);
    EXPECT_NEAR(r.grad.data[1], 0.5 / 2, 1e-12);
    EXPECT_NEAR(r.grad.data[2], 0.75 / 2, 1e-12);
    EXPECT_NEAR(r.grad.data[3], (0.25 - 1.0) / 2, 1e-12);
}

TEST(Loss, SoftmaxIsStableForLargeLogits) {
    Tensor<double> logits({1, 3});
    logits.data = {1000.0, 0.0, -1000.0};
    const auto r = softmax_cross_entropy(logits, {0});
    EXPECT_TRUE(std::isfinite(r.loss));
    EXPECT_NEAR(r.loss, 0.0, 1e-12);
}

TEST(Loss, SigmoidBinaryCrossEntropyByHand) {
    Tensor<double> logits({1, 2});
    logits.data = {0.0, 0.0};
    const auto r = sigmoid_binary_cross_entropy(logits, {{1}});
    EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
    // mean over 2 cells: (sigmoid - y) / 2
    EXPECT_NEAR(r.grad.data[0], 0.5 / 2, 1e-12);
    EXPECT_NEAR(r.grad.data[1], -0.5 / 2, 1e-12);
}

TEST(Loss, GradientsMatchFiniteDifferences) {
    Rng rng(5);
    Tensor<double> logits = random_tensor({4, 5}, rng);
    const std::vector<int> targets{0, 4, 2, 2};
    const std::vector<std::vector<int>> sets{{0, 1}, {4}, {}, {1, 2, 3}};
    const auto ce = softmax_cross_entropy(logits, targets);
    const auto bce = sigmoid_binary_cross_entropy(logits, sets);
    const double h = 1e-6;
    for (size_t i = 0; i < logits.size(); ++i) {
        const double keep = logits.data[i];
        logits.data[i] = keep + h;
        const double ce_up = softmax_cross_entropy(logits, targets).loss;
        const double bce_up = sigmoid_binary_cross_entropy(logits, sets).loss;
        logits.data[i] = keep - h;
        const double ce_down = softmax_cross_entropy(logits, targets).loss;
        const double bce_down = sigmoid_binary_cross_entropy(logits, sets).loss;
        logits.data[i] = keep;
        EXPECT_NEAR((ce_up - ce_down) / (2 * h), ce.grad.data[i], 1e-8);
        EXPECT_NEAR((bce_up - bce_down) / (2 * h), bce.grad.data[i], 1e-8);
    }
}

TEST(Adam, FirstTwoStepsMatchHandOracle) {
    Parameter<double> p;
    p.value = Tensor<double>({3});
    p.value.data = {1.0, -2.0, 0.5};
    p.grad = Tensor<double>({3});
    std::vector<NamedParameter<double>> params{{"p", &p}};
    Adam<double> adam;
    const double lr = 0.01;

    p.grad.data = {0.5, -4.0, 0.0};
    adam.step(params, lr);
    // step 1: m_hat = g, v_hat = g^2 -> update = g / (|g| + eps)
    EXPECT_NEAR(p.value.data[0], 1.0 - lr * 0.5 / (0.5 + 1e-8), 1e-15);
    EXPECT_NEAR(p.value.data[1], -2.0 + lr * 4.0 / (4.0 + 1e-8), 1e-15);
    EXPECT_EQ(p.value.data[2], 0.5);

    const double before = p.value.data[0];
    p.grad.data = {1.5, 0.0, 0.0};
    adam.step(params, lr);
    const double m = 0.9 * 0.1 * 0.5 + 0.1 * 1.5;
    const double v = 0.999 * 0.001 * 0.25 + 0.001 * 2.25;
    const double m_hat = m / (1 - 0.81);
    const double v_hat = v / (1 - 0.999 * 0.999);
    EXPECT_NEAR(p.value.data[0], before - lr * m_hat / (std::sqrt(v_hat) + 1e-8), 1e-15);
}

TEST(Adam, FrozenParametersDoNotMove) {
    Parameter<double> p;
    p.value = Tensor<double>({2}, 1.0);
    p.grad = Tensor<double>({2}, 3.0);
    p.trainable = false;
    std::vector<NamedParameter<double>> params{{"p", &p}};
    Adam<double> adam;
    adam.step(params, 0.1);
    EXPECT_EQ(p.value.data, (std::vector<double>{1.0, 1.0}));
}

TEST(BatchNorm, EvalUsesRunningStatisticsAndLeavesThem) {
    Rng rng(6);
    BatchNorm2d<double> bn(2);
    bn.reset(rng);
    std::vector<NamedParameter<double>> params;
    bn.collect("", params);
    const Tensor<double> x = random_tensor({4, 2, 3, 3}, rng);
    auto snapshot = [&]() {
        std::vector<std::vector<double>> s;
        for (const auto& p : params) s.push_back(p.param->value.data);
        return s;
    };
    const auto before = snapshot();
    bn.forward(x, Phase::eval);
    EXPECT_EQ(snapshot(), before);
    bn.forward(x, Phase::train);
    EXPECT_NE(snapshot(), before);
}

}  // namespace
}  // namespace xfer::nn
