// SPDX-License-Identifier: Apache-2.0

#include "xfer/train_engine.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include "xfer/nn/adam.hpp"
#include "xfer/nn/loss.hpp"
#include "xfer/random.hpp"

namespace xfer::train {

using nlohmann::json;

std::string to_string(LossMode m) {
    return m == LossMode::exclusive_xent ? "exclusive_xent" : "independent_binary_xent";
}

LossMode parse_loss_mode(const std::string& s) {
    if (s == "exclusive_xent" || s == "exclusive" || s == "single") return LossMode::exclusive_xent;
    if (s == "independent_binary_xent" || s == "independent" || s == "multi") return LossMode::independent_binary_xent;
    throw ConfigError(fmt::format("unknown loss mode '{}'", s));
}

LossMode loss_mode_for(zoo::OutputMode m) {
    return m == zoo::OutputMode::exclusive ? LossMode::exclusive_xent : LossMode::independent_binary_xent;
}

void to_json(json& j, const EpochRecord& r) {
    j = json{{"epoch", r.epoch},
             {"loss", r.loss},
             {"lr_first", r.lr_first},
             {"lr_last", r.lr_last},
             {"wall_seconds", r.wall_seconds},
             {"train_accuracy", r.train_accuracy},
             {"steps", r.steps}};
}

void from_json(const json& j, EpochRecord& r) {
    r.epoch = j.at("epoch").get<int>();
    r.loss = j.at("loss").get<double>();
    r.lr_first = j.at("lr_first").get<double>();
    r.lr_last = j.at("lr_last").get<double>();
    r.wall_seconds = j.value("wall_seconds", 0.0);
    r.train_accuracy = j.value("train_accuracy", 0.0);
    r.steps = j.value("steps", 0);
}

std::vector<double> TrainLog::losses() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.loss);
    return out;
}

std::string TrainLog::to_jsonl() const {
    std::string out;
    for (const auto& e : epochs) {
        json j = e;
        j["seed"] = seed;
        j["pipeline_seed"] = pipeline_seed;
        out += j.dump() + "\n";
    }
    return out;
}

namespace {

const ImageStore& resolve_store(const ImageStore* store, std::optional<DefaultImageStore>& fallback) {
    if (store) return *store;
    fallback.emplace(DefaultImageStore::root_from_environment(), true);
    return *fallback;
}

void check_labels(const data::DatasetManifest& manifest, const zoo::HeadSpec& head) {
    if (static_cast<int>(manifest.num_classes()) != head.num_classes) {
        throw ConfigError(fmt::format("manifest '{}' has {} classes but the head predicts {}", manifest.dataset_id(),
                                      manifest.num_classes(), head.num_classes));
    }
}

}  // namespace

nn::Tensor<float> to_batch(const std::vector<Image>& images, const zoo::Preprocessing& pre, int input_channels) {
    if (images.empty()) throw std::invalid_argument("empty image batch");
    const int h = images.front().height;
    const int w = images.front().width;
    const int n = static_cast<int>(images.size());
    nn::Tensor<float> out({n, input_channels, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (int i = 0; i < n; ++i) {
        const Image& img = images[static_cast<size_t>(i)];
        if (img.height != h || img.width != w) throw std::invalid_argument("images in a batch must share a size");
        float* dst = out.ptr() + static_cast<size_t>(i) * input_channels * plane;
        for (int c = 0; c < input_channels; ++c) {
            const int src_c = pre.bgr ? input_channels - 1 - c : c;
            const double scale = pre.input_scale / pre.std[static_cast<size_t>(c)];
            const double shift = pre.mean[static_cast<size_t>(c)] / pre.std[static_cast<size_t>(c)];
            for (size_t p = 0; p < plane; ++p) {
                double v = 0.0;
                if (img.channels == input_channels) {
                    v = img.pixels[p * img.channels + static_cast<size_t>(src_c)];
                } else if (img.channels == 1) {
                    v = img.pixels[p];
                } else if (input_channels == 1) {
                    for (int k = 0; k < img.channels; ++k) v += img.pixels[p * img.channels + static_cast<size_t>(k)];
                    v /= img.channels;
                } else {
                    throw std::invalid_argument(
                        fmt::format("cannot feed a {}-channel image to a {}-channel model", img.channels, input_channels));
                }
                dst[static_cast<size_t>(c) * plane + p] = static_cast<float>(v * scale - shift);
            }
        }
    }
    return out;
}

zoo::Preprocessing fit_preprocessing(const data::DatasetManifest& manifest, const ImageStore& store,
                                     size_t max_images) {
    const auto& records = manifest.records();
    const size_t stride = std::max<size_t>(1, (records.size() + max_images - 1) / std::max<size_t>(1, max_images));
    std::array<double, 3> sum{};
    std::array<double, 3> sq{};
    double count = 0.0;
    for (size_t i = 0; i < records.size(); i += stride) {
        const Image img = store.load(records[i].image_ref);
        const size_t plane = static_cast<size_t>(img.height) * img.width;
        for (size_t p = 0; p < plane; ++p) {
            for (int c = 0; c < 3; ++c) {
                const double v = img.pixels[p * img.channels + static_cast<size_t>(img.channels == 1 ? 0 : c)];
                sum[static_cast<size_t>(c)] += v;
                sq[static_cast<size_t>(c)] += v * v;
            }
        }
        count += static_cast<double>(plane);
    }
    zoo::Preprocessing pre;
    for (size_t c = 0; c < 3; ++c) {
        pre.mean[c] = sum[c] / count;
        const double var = std::max(0.0, sq[c] / count - pre.mean[c] * pre.mean[c]);
        pre.std[c] = std::max(std::sqrt(var), 1e-3);
    }
    pre.origin = "fitted:" + manifest.dataset_id();
    return pre;
}

TrainResult train(zoo::Model<float>& model, const data::DatasetManifest& manifest, const ScheduleSpec& schedule,
                  const augment::TransformPipeline& pipeline, LossMode loss_mode, uint64_t seed,
                  const TrainOptions& options) {
    schedule.validate();
    pipeline.validate();
    if (pipeline.mode != augment::PipelineMode::train) throw ConfigError("training needs a train-mode pipeline");
    if (loss_mode != loss_mode_for(model.head_spec().output_mode)) {
        throw ConfigError(fmt::format("loss mode {} does not match the {} head", to_string(loss_mode),
                                      zoo::to_string(model.head_spec().output_mode)));
    }
    if (manifest.size() == 0) throw ConfigError(fmt::format("training manifest '{}' is empty", manifest.dataset_id()));
    check_labels(manifest, model.head_spec());
    if (loss_mode == LossMode::exclusive_xent && manifest.label_mode() == data::LabelMode::multi_label) {
        throw ConfigError(fmt::format("manifest '{}' is multi-label; an exclusive head cannot fit it",
                                      manifest.dataset_id()));
    }

    std::optional<DefaultImageStore> fallback;
    const ImageStore& store = resolve_store(options.store, fallback);
    if (options.fit_preprocessing && model.lineage().empty()) {
        model.set_preprocessing(fit_preprocessing(manifest, store));
    }

    const auto& records = manifest.records();
    const int n = static_cast<int>(records.size());
    const int batch = schedule.batch_size;
    const int steps_per_epoch = (n + batch - 1) / batch;
    const int channels = model.backbone_spec().input_channels;
    const auto params = model.parameters();
    nn::Adam<float> adam;

    TrainLog log;
    log.seed = seed;
    log.pipeline_seed = pipeline.seed;
    std::vector<int> order(static_cast<size_t>(n));
    for (int epoch = 0; epoch < schedule.total_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        Rng(derive_seed(seed, {fnv1a64("order"), static_cast<uint64_t>(epoch)})).shuffle(std::span<int>(order));

        EpochRecord rec;
        rec.epoch = epoch;
        double loss_sum = 0.0;
        long correct = 0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            const int begin = step * batch;
            const int end = std::min(n, begin + batch);
            std::vector<Image> images;
            std::vector<int> targets;
            std::vector<std::vector<int>> target_sets;
            for (int k = begin; k < end; ++k) {
                const int idx = order[static_cast<size_t>(k)];
                const auto& r = records[static_cast<size_t>(idx)];
                Rng aug(derive_seed(seed, {fnv1a64("augment"), pipeline.seed, static_cast<uint64_t>(epoch),
                                           static_cast<uint64_t>(idx)}));
                images.push_back(augment::train_transform(store.load(r.image_ref), pipeline, aug));
                targets.push_back(r.primary_label());
                target_sets.push_back(r.labels);
            }
            const nn::Tensor<float> x = to_batch(images, model.preprocessing(), channels);
            const nn::Tensor<float> logits = model.forward(x, nn::Phase::train);
            nn::LossResult<float> loss = loss_mode == LossMode::exclusive_xent
                                             ? nn::softmax_cross_entropy(logits, targets)
                                             : nn::sigmoid_binary_cross_entropy(logits, target_sets);
            nn::zero_grad(params);
            model.backward(loss.grad);
            const double lr = lr_at(schedule, epoch, step, steps_per_epoch);
            adam.step(params, lr);

            if (step == 0) rec.lr_first = lr;
            rec.lr_last = lr;
            loss_sum += loss.loss * (end - begin);
            if (loss_mode == LossMode::exclusive_xent) {
                const int k = logits.dim(1);
                for (int i = 0; i < end - begin; ++i) {
                    const float* row = logits.ptr() + static_cast<size_t>(i) * k;
                    if (std::max_element(row, row + k) - row == targets[static_cast<size_t>(i)]) ++correct;
                }
            }
        }
        rec.loss = loss_sum / n;
        rec.train_accuracy = static_cast<double>(correct) / n;
        rec.steps = steps_per_epoch;
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epochs.push_back(rec);
        if (options.on_epoch) options.on_epoch(rec);
    }

    zoo::LineageStage stage{manifest.dataset_id(), options.objective, options.stage_kind, manifest.family()};
    model.lineage().append(stage);
    return {std::move(log), std::move(stage)};
}

namespace {

template <typename Fn>
void for_each_batch(zoo::Model<float>& model, const data::DatasetManifest& manifest,
                    const augment::TransformPipeline& pipeline, const InferenceOptions& options, Fn&& fn) {
    if (pipeline.mode != augment::PipelineMode::eval) throw ConfigError("inference needs an eval-mode pipeline");
    pipeline.validate();
    std::optional<DefaultImageStore> fallback;
    const ImageStore& store = resolve_store(options.store, fallback);
    const auto& records = manifest.records();
    const size_t batch = static_cast<size_t>(std::max(1, options.batch_size));
    for (size_t begin = 0; begin < records.size(); begin += batch) {
        const size_t end = std::min(records.size(), begin + batch);
        std::vector<Image> images;
        for (size_t i = begin; i < end; ++i) {
            images.push_back(augment::eval_transform(store.load(records[i].image_ref), pipeline));
        }
        fn(begin, end, to_batch(images, model.preprocessing(), model.backbone_spec().input_channels));
    }
}

}  // namespace

FeatureSet extract_features(zoo::Model<float>& model, const data::DatasetManifest& manifest,
                            const augment::TransformPipeline& pipeline, const InferenceOptions& options) {
    const int dim = model.backbone_spec().feature_dim();
    FeatureSet out;
    out.features = nn::Tensor<float>({static_cast<int>(manifest.size()), dim});
    for_each_batch(model, manifest, pipeline, options, [&](size_t begin, size_t end, const nn::Tensor<float>& x) {
        const nn::Tensor<float> f = model.features(x, nn::Phase::eval);
        std::copy(f.data.begin(), f.data.end(), out.features.ptr() + begin * static_cast<size_t>(dim));
        (void)end;
    });
    for (const auto& r : manifest.records()) {
        out.labels.push_back(r.labels);
        out.ids.push_back(r.image_ref);
    }
    return out;
}

std::vector<metrics::PredictionRecord> predict(zoo::Model<float>& model, const data::DatasetManifest& manifest,
                                               const augment::TransformPipeline& pipeline,
                                               const InferenceOptions& options) {
    check_labels(manifest, model.head_spec());
    const bool exclusive = model.head_spec().output_mode == zoo::OutputMode::exclusive;
    std::vector<metrics::PredictionRecord> out;
    for_each_batch(model, manifest, pipeline, options, [&](size_t begin, size_t end, const nn::Tensor<float>& x) {
        const nn::Tensor<float> logits = model.forward(x, nn::Phase::eval);
        const nn::Tensor<float> scores = exclusive ? nn::softmax(logits) : nn::sigmoid(logits);
        const int k = scores.dim(1);
        for (size_t i = begin; i < end; ++i) {
            const float* row = scores.ptr() + (i - begin) * static_cast<size_t>(k);
            const auto& r = manifest.records()[i];
            out.push_back({std::vector<double>(row, row + k), r.labels, r.image_ref});
        }
    });
    return out;
}

}  // namespace xfer::train
