// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace xfer {

// Interleaved HWC float image; decoded 8-bit data is scaled to [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c), pixels(static_cast<size_t>(h) * w * c, fill) {
        if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("image dimensions must be positive");
    }

    size_t index(int y, int x, int c) const { return (static_cast<size_t>(y) * width + x) * channels + c; }
    float& at(int y, int x, int c) { return pixels[index(y, x, c)]; }
    float at(int y, int x, int c) const { return pixels[index(y, x, c)]; }

    bool operator==(const Image&) const = default;
};

}  // namespace xfer
