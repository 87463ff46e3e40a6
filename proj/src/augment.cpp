// SPDX-License-Identifier: Apache-2.0

#include "xfer/augment.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xfer/errors.hpp"

namespace xfer::augment {

namespace {

void check_input(const Image& image) {
    if (image.height <= 0 || image.width <= 0 || image.channels <= 0 ||
        image.pixels.size() != static_cast<size_t>(image.height) * image.width * image.channels) {
        throw std::invalid_argument("image must have positive dimensions");
    }
}

struct Taps {
    int i0;
    int i1;
    float frac;
};

std::vector<Taps> bilinear_taps(int in, int out) {
    std::vector<Taps> taps(static_cast<size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const int i0 = static_cast<int>(std::floor(src));
        const int i1 = std::min(i0 + 1, in - 1);
        taps[static_cast<size_t>(o)] = {i0, i1, static_cast<float>(src - i0)};
    }
    return taps;
}

}  // namespace

void TransformPipeline::validate() const {
    if (crop_edge <= 0 || resize_edge <= 0) throw ConfigError("pipeline edges must be positive");
    if (crop_edge > resize_edge) {
        throw ConfigError(fmt::format("crop edge {} exceeds resize edge {}", crop_edge, resize_edge));
    }
}

Image resize_bilinear(const Image& image, int height, int width) {
    check_input(image);
    if (height <= 0 || width <= 0) throw std::invalid_argument("resize target must be positive");
    if (height == image.height && width == image.width) return image;
    const auto ty = bilinear_taps(image.height, height);
    const auto tx = bilinear_taps(image.width, width);
    Image out(height, width, image.channels);
    for (int y = 0; y < height; ++y) {
        const Taps& a = ty[static_cast<size_t>(y)];
        for (int x = 0; x < width; ++x) {
            const Taps& b = tx[static_cast<size_t>(x)];
            for (int c = 0; c < image.channels; ++c) {
                const float p00 = image.at(a.i0, b.i0, c);
                const float p01 = image.at(a.i0, b.i1, c);
                const float p10 = image.at(a.i1, b.i0, c);
                const float p11 = image.at(a.i1, b.i1, c);
                const float top = p00 + b.frac * (p01 - p00);
                const float bottom = p10 + b.frac * (p11 - p10);
                out.at(y, x, c) = top + a.frac * (bottom - top);
            }
        }
    }
    return out;
}

Image crop(const Image& image, int top, int left, int height, int width) {
    check_input(image);
    if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > image.height ||
        left + width > image.width) {
        throw std::out_of_range("crop window outside image");
    }
    Image out(height, width, image.channels);
    const size_t row = static_cast<size_t>(width) * image.channels;
    for (int y = 0; y < height; ++y) {
        const float* src = &image.pixels[image.index(top + y, left, 0)];
        std::copy(src, src + row, &out.pixels[out.index(y, 0, 0)]);
    }
    return out;
}

Image flip_left_right(const Image& image) {
    Image out(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) out.at(y, image.width - 1 - x, c) = image.at(y, x, c);
    return out;
}

Image flip_up_down(const Image& image) {
    Image out(image.height, image.width, image.channels);
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < image.channels; ++c) out.at(image.height - 1 - y, x, c) = image.at(y, x, c);
    return out;
}

Image rotate90(const Image& image, int quarter_turns) {
    const int k = ((quarter_turns % 4) + 4) % 4;
    if (k == 0) return image;
    const int h = image.height;
    const int w = image.width;
    Image out = (k == 2) ? Image(h, w, image.channels) : Image(w, h, image.channels);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int oy = 0;
            int ox = 0;
            switch (k) {
                case 1: oy = w - 1 - x; ox = y; break;
                case 2: oy = h - 1 - y; ox = w - 1 - x; break;
                default: oy = x; ox = h - 1 - y; break;
            }
            for (int c = 0; c < image.channels; ++c) out.at(oy, ox, c) = image.at(y, x, c);
        }
    }
    return out;
}

TrainDraw draw_train_params(const TransformPipeline& pipeline, Rng& rng) {
    const auto slack = static_cast<uint64_t>(pipeline.resize_edge - pipeline.crop_edge + 1);
    TrainDraw d;
    d.top = static_cast<int>(rng.uniform_index(slack));
    d.left = static_cast<int>(rng.uniform_index(slack));
    d.flip_left_right = rng.bernoulli(0.5);
    d.flip_up_down = rng.bernoulli(0.5);
    // {90, 180, 270, 360}: 360 is the identity.
    d.quarter_turns = static_cast<int>((rng.uniform_index(4) + 1) % 4);
    return d;
}

Image apply_train_draw(const Image& image, const TransformPipeline& pipeline, const TrainDraw& draw) {
    Image out = resize_bilinear(image, pipeline.resize_edge, pipeline.resize_edge);
    out = crop(out, draw.top, draw.left, pipeline.crop_edge, pipeline.crop_edge);
    if (draw.flip_left_right) out = flip_left_right(out);
    if (draw.flip_up_down) out = flip_up_down(out);
    return rotate90(out, draw.quarter_turns);
}

Image train_transform(const Image& image, const TransformPipeline& pipeline, Rng& rng) {
    if (pipeline.mode != PipelineMode::train) throw ConfigError("train_transform needs a train-mode pipeline");
    pipeline.validate();
    check_input(image);
    const TrainDraw draw = draw_train_params(pipeline, rng);
    return apply_train_draw(image, pipeline, draw);
}

Image train_transform(const Image& image, const TransformPipeline& pipeline) {
    Rng rng(pipeline.seed);
    return train_transform(image, pipeline, rng);
}

Image eval_transform(const Image& image, const TransformPipeline& pipeline) {
    if (pipeline.mode != PipelineMode::eval) throw ConfigError("eval_transform needs an eval-mode pipeline");
    pipeline.validate();
    check_input(image);
    const Image resized = resize_bilinear(image, pipeline.resize_edge, pipeline.resize_edge);
    const int offset = (pipeline.resize_edge - pipeline.crop_edge) / 2;
    return crop(resized, offset, offset, pipeline.crop_edge, pipeline.crop_edge);
}

}  // namespace xfer::augment
