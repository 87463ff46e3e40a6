// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xfer/augment.hpp"
#include "xfer/dataset_registry.hpp"
#include "xfer/image_store.hpp"
#include "xfer/metrics.hpp"
#include "xfer/model_zoo.hpp"
#include "xfer/schedule.hpp"

namespace xfer::train {

enum class LossMode { exclusive_xent, independent_binary_xent };

std::string to_string(LossMode m);
LossMode parse_loss_mode(const std::string& s);
LossMode loss_mode_for(zoo::OutputMode m);

struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double lr_first = 0.0;  // rate of the first and last optimizer step
    double lr_last = 0.0;
    double wall_seconds = 0.0;
    // Running accuracy over the epoch's augmented batches (exclusive mode only).
    double train_accuracy = 0.0;
    int steps = 0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

struct TrainLog {
    std::vector<EpochRecord> epochs;
    uint64_t seed = 0;
    uint64_t pipeline_seed = 0;

    int completed_epochs() const { return static_cast<int>(epochs.size()); }
    std::vector<double> losses() const;
    // One JSON object per epoch, newline-terminated.
    std::string to_jsonl() const;
};

struct TrainOptions {
    // Defaults to a caching DefaultImageStore rooted at $XFER_DATA_ROOT.
    const ImageStore* store = nullptr;
    zoo::StageKind stage_kind = zoo::StageKind::pretrain;
    zoo::Objective objective = zoo::Objective::supervised;
    // Fit per-channel mean/std on the training set when the model has no
    // lineage yet (scratch models); externally initialised models keep theirs.
    bool fit_preprocessing = true;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    TrainLog log;
    zoo::LineageStage stage;
};

// Mini-batch Adam over schedule.total_epochs epochs. Each epoch visits the
// records in an order drawn from (seed, epoch); every sample gets its own
// augmentation stream derived from (seed, pipeline.seed, epoch, record), so a
// run is reproducible regardless of how samples are loaded. The final partial
// batch is kept. Appends one stage to the model lineage.
TrainResult train(zoo::Model<float>& model, const data::DatasetManifest& manifest, const ScheduleSpec& schedule,
                  const augment::TransformPipeline& pipeline, LossMode loss_mode, uint64_t seed,
                  const TrainOptions& options = {});

// Per-channel statistics of decoded training images in [0, 1].
zoo::Preprocessing fit_preprocessing(const data::DatasetManifest& manifest, const ImageStore& store,
                                     size_t max_images = 2000);

struct FeatureSet {
    nn::Tensor<float> features;  // N x feature_dim
    std::vector<std::vector<int>> labels;
    std::vector<std::string> ids;

    size_t size() const { return ids.size(); }
    int dim() const { return features.rank() == 2 ? features.dim(1) : 0; }
};

struct InferenceOptions {
    const ImageStore* store = nullptr;
    int batch_size = 64;
};

// Penultimate features of every record in manifest order, eval-mode pipeline,
// normalization in running-statistics mode. Never modifies the model.
FeatureSet extract_features(zoo::Model<float>& model, const data::DatasetManifest& manifest,
                            const augment::TransformPipeline& pipeline, const InferenceOptions& options = {});

// Softmax (exclusive head) or sigmoid (independent head) scores per record.
std::vector<metrics::PredictionRecord> predict(zoo::Model<float>& model, const data::DatasetManifest& manifest,
                                               const augment::TransformPipeline& pipeline,
                                               const InferenceOptions& options = {});

// NCHW batch from HWC images in [0, 1], normalized by `pre`. Grayscale input
// is replicated to three channels; colour input to a one-channel model is
// averaged.
nn::Tensor<float> to_batch(const std::vector<Image>& images, const zoo::Preprocessing& pre, int input_channels);

}  // namespace xfer::train
