// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "xfer/image.hpp"
#include "xfer/random.hpp"

namespace xfer::augment {

enum class PipelineMode { train, eval };

// Train: resize -> random crop -> random left-right flip -> random
// up-down flip -> random rotation from {90, 180, 270, 360} degrees.
// Eval: resize -> center crop.
struct TransformPipeline {
    PipelineMode mode = PipelineMode::eval;
    int resize_edge = 292;
    int crop_edge = 256;
    uint64_t seed = 0;

    static TransformPipeline train(uint64_t seed, int resize_edge = 292, int crop_edge = 256) {
        return {PipelineMode::train, resize_edge, crop_edge, seed};
    }
    static TransformPipeline eval(int resize_edge = 292, int crop_edge = 256) {
        return {PipelineMode::eval, resize_edge, crop_edge, 0};
    }

    void validate() const;
    static constexpr const char* interpolation() { return "bilinear"; }
};

// Random choices of one train_transform call.
struct TrainDraw {
    int top = 0;
    int left = 0;
    bool flip_left_right = false;
    bool flip_up_down = false;
    int quarter_turns = 0;  // counterclockwise; 360 degrees maps to 0
};

// Half-pixel-center bilinear resampling; constant images stay exactly constant.
Image resize_bilinear(const Image& image, int height, int width);
Image crop(const Image& image, int top, int left, int height, int width);
Image flip_left_right(const Image& image);
Image flip_up_down(const Image& image);
Image rotate90(const Image& image, int quarter_turns);

TrainDraw draw_train_params(const TransformPipeline& pipeline, Rng& rng);
Image apply_train_draw(const Image& image, const TransformPipeline& pipeline, const TrainDraw& draw);

Image train_transform(const Image& image, const TransformPipeline& pipeline, Rng& rng);
// Uses a fresh stream seeded with pipeline.seed.
Image train_transform(const Image& image, const TransformPipeline& pipeline);
Image eval_transform(const Image& image, const TransformPipeline& pipeline);

}  // namespace xfer::augment
