// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace xfer::nn {

// Dense row-major tensor. Image batches are NCHW, feature batches N x D.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> dims, T fill = T(0)) : shape(std::move(dims)), data(count(shape), fill) {}

    static size_t count(const std::vector<int>& dims) {
        return std::accumulate(dims.begin(), dims.end(), size_t{1},
                               [](size_t a, int d) { return a * static_cast<size_t>(d); });
    }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    int dim(size_t i) const { return shape.at(i); }
    size_t rank() const { return shape.size(); }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }

    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    bool operator==(const Tensor&) const = default;
};

inline std::string shape_str(const std::vector<int>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + "]";
}

}  // namespace xfer::nn
