// SPDX-License-Identifier: Apache-2.0

#include "xfer/transfer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xfer/hashing.hpp"
#include "xfer/nn/adam.hpp"
#include "xfer/nn/loss.hpp"
#include "xfer/random.hpp"
#include "xfer/run_ledger.hpp"

namespace xfer::transfer {

using nlohmann::json;

void ProbeSpec::validate() const {
    if (!(lr > 0.0)) throw ConfigError("probe learning rate must be positive");
    if (epochs <= 0) throw ConfigError("probe epochs must be positive");
    if (batch_size <= 0) throw ConfigError("probe batch size must be positive");
}

void to_json(json& j, const ProbeSpec& s) { j = json{{"lr", s.lr}, {"epochs", s.epochs}, {"batch_size", s.batch_size}}; }

void from_json(const json& j, ProbeSpec& s) {
    s.lr = j.value("lr", 1e-3);
    s.epochs = j.value("epochs", 100);
    s.batch_size = j.value("batch_size", 100);
}

// Probe ------------------------------------------------------------------------

LinearProbe::LinearProbe(int feature_dim, zoo::HeadSpec head, uint64_t seed)
    : feature_dim_(feature_dim), head_(head), layer_(feature_dim, std::max(1, head.num_classes)) {
    head_.validate();
    if (feature_dim <= 0) throw ConfigError("probe needs a positive feature dimension");
    Rng rng(derive_seed(seed, {fnv1a64("probe")}));
    layer_.reset(rng);
}

size_t LinearProbe::parameter_count() const { return layer_.weight().value.size() + layer_.bias().value.size(); }

namespace {

void check_inputs(const nn::Tensor<float>& features, size_t n_labels, int dim) {
    if (features.rank() != 2) throw ConfigError("features must be an N x D matrix");
    if (static_cast<size_t>(features.dim(0)) != n_labels) {
        throw ConfigError(fmt::format("{} feature rows but {} label entries", features.dim(0), n_labels));
    }
    if (features.dim(1) != dim) {
        throw ConfigError(fmt::format("features have width {}, the probe expects {}", features.dim(1), dim));
    }
}

nn::Tensor<double> gather_rows(const nn::Tensor<float>& features, const std::vector<int>& rows) {
    const int d = features.dim(1);
    nn::Tensor<double> x({static_cast<int>(rows.size()), d});
    for (size_t i = 0; i < rows.size(); ++i) {
        const float* src = features.ptr() + static_cast<size_t>(rows[i]) * d;
        std::copy(src, src + d, x.ptr() + i * d);
    }
    return x;
}

}  // namespace

void LinearProbe::fit(const nn::Tensor<float>& features, const std::vector<std::vector<int>>& labels,
                      const ProbeSpec& spec, uint64_t seed) {
    spec.validate();
    check_inputs(features, labels.size(), feature_dim_);
    if (labels.empty()) throw ConfigError("probe needs at least one training example");
    for (const auto& l : labels) {
        if (l.empty()) throw ConfigError("probe example without a label");
        for (int c : l) {
            if (c < 0 || c >= head_.num_classes) throw ConfigError(fmt::format("label {} outside the probe head", c));
        }
    }
    const bool exclusive = head_.output_mode == zoo::OutputMode::exclusive;
    std::vector<nn::NamedParameter<double>> params;
    layer_.collect("probe", params);
    nn::Adam<double> adam;
    const int n = static_cast<int>(labels.size());
    std::vector<int> order(static_cast<size_t>(n));
    losses_.clear();
    for (int epoch = 0; epoch < spec.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng(derive_seed(seed, {fnv1a64("probe-order"), static_cast<uint64_t>(epoch)})).shuffle(std::span<int>(order));
        double total = 0.0;
        for (int begin = 0; begin < n; begin += spec.batch_size) {
            const int end = std::min(n, begin + spec.batch_size);
            const std::vector<int> rows(order.begin() + begin, order.begin() + end);
            const nn::Tensor<double> x = gather_rows(features, rows);
            const nn::Tensor<double> z = layer_.forward(x, nn::Phase::train);
            nn::LossResult<double> loss;
            if (exclusive) {
                std::vector<int> targets;
                for (int r : rows) targets.push_back(labels[static_cast<size_t>(r)].front());
                loss = nn::softmax_cross_entropy(z, targets);
            } else {
                std::vector<std::vector<int>> targets;
                for (int r : rows) targets.push_back(labels[static_cast<size_t>(r)]);
                loss = nn::sigmoid_binary_cross_entropy(z, targets);
            }
            nn::zero_grad(params);
            layer_.backward(loss.grad);
            adam.step(params, spec.lr);
            total += loss.loss * (end - begin);
        }
        losses_.push_back(total / n);
    }
}

nn::Tensor<double> LinearProbe::logits(const nn::Tensor<float>& features) {
    check_inputs(features, static_cast<size_t>(features.rank() == 2 ? features.dim(0) : 0), feature_dim_);
    std::vector<int> rows(static_cast<size_t>(features.dim(0)));
    std::iota(rows.begin(), rows.end(), 0);
    return layer_.forward(gather_rows(features, rows), nn::Phase::eval);
}

std::vector<metrics::PredictionRecord> LinearProbe::predict(const nn::Tensor<float>& features,
                                                            const std::vector<std::vector<int>>& labels,
                                                            const std::vector<std::string>& ids) {
    check_inputs(features, labels.size(), feature_dim_);
    if (!ids.empty() && ids.size() != labels.size()) throw ConfigError("id count differs from label count");
    const nn::Tensor<double> z = logits(features);
    const nn::Tensor<double> s = head_.output_mode == zoo::OutputMode::exclusive ? nn::softmax(z) : nn::sigmoid(z);
    const int k = s.dim(1);
    std::vector<metrics::PredictionRecord> out;
    for (size_t i = 0; i < labels.size(); ++i) {
        const double* row = s.ptr() + i * static_cast<size_t>(k);
        out.push_back({std::vector<double>(row, row + k), labels[i], ids.empty() ? std::to_string(i) : ids[i]});
    }
    return out;
}

LinearProbe train_linear_probe(const nn::Tensor<float>& features, const std::vector<std::vector<int>>& labels,
                               const zoo::HeadSpec& head, uint64_t seed, const ProbeSpec& spec) {
    if (features.rank() != 2) throw ConfigError("features must be an N x D matrix");
    LinearProbe probe(features.dim(1), head, seed);
    probe.fit(features, labels, spec, seed);
    return probe;
}

ProbeOutcome linear_probe(const train::FeatureSet& train_set, const train::FeatureSet& test_set,
                          const zoo::HeadSpec& head, uint64_t seed, const ProbeSpec& spec) {
    LinearProbe probe = train_linear_probe(train_set.features, train_set.labels, head, seed, spec);
    auto predictions = probe.predict(test_set.features, test_set.labels, test_set.ids);
    return {std::move(probe), std::move(predictions)};
}

// Training-based protocols -------------------------------------------------------

zoo::HeadSpec head_for(const data::DatasetManifest& manifest) {
    return {static_cast<int>(manifest.num_classes()), manifest.label_mode() == data::LabelMode::multi_label
                                                          ? zoo::OutputMode::independent
                                                          : zoo::OutputMode::exclusive};
}

namespace {

train::TrainResult run_stage(zoo::Model<float>& model, const data::DatasetManifest& manifest,
                             const train::ScheduleSpec& schedule, uint64_t seed, const StageOptions& options,
                             zoo::StageKind kind) {
    const auto pipeline = augment::TransformPipeline::train(derive_seed(seed, {fnv1a64("pipeline")}),
                                                            options.resize_edge, options.crop_edge);
    train::TrainOptions t;
    t.store = options.store;
    t.stage_kind = kind;
    t.objective = zoo::Objective::supervised;
    t.fit_preprocessing = false;
    t.on_epoch = options.on_epoch;
    return train::train(model, manifest, schedule, pipeline, train::loss_mode_for(model.head_spec().output_mode), seed,
                        t);
}

}  // namespace

zoo::Model<float> fine_tune(const zoo::Checkpoint& checkpoint, const data::DatasetManifest& target_train,
                            const zoo::HeadSpec& head, const train::ScheduleSpec& schedule, uint64_t seed,
                            const StageOptions& options, train::TrainLog* log) {
    zoo::check_source_target(checkpoint.lineage, target_train.dataset_id(), target_train.family());
    auto model = zoo::model_from_checkpoint<float>(checkpoint, head, seed);
    auto result = run_stage(model, target_train, schedule, seed, options, zoo::StageKind::finetune);
    if (log) *log = std::move(result.log);
    return model;
}

zoo::Model<float> domain_adapt_model(const zoo::Checkpoint& pretrained, const data::DatasetManifest& indomain,
                                     const zoo::HeadSpec& head, const train::ScheduleSpec& schedule, uint64_t seed,
                                     const StageOptions& options, train::TrainLog* log) {
    const auto& stages = pretrained.lineage.stages();
    if (stages.empty() || stages.front().stage_kind != zoo::StageKind::pretrain) {
        throw ConfigError(fmt::format("domain adaptation needs a pre-trained backbone, lineage is [{}]",
                                      pretrained.lineage.describe()));
    }
    zoo::check_source_target(pretrained.lineage, indomain.dataset_id(), indomain.family());
    auto model = zoo::model_from_checkpoint<float>(pretrained, head, seed);
    auto result = run_stage(model, indomain, schedule, seed, options, zoo::StageKind::domain_adapt);
    if (log) *log = std::move(result.log);
    return model;
}

zoo::Checkpoint domain_adapt(const zoo::Checkpoint& pretrained, const data::DatasetManifest& indomain,
                             const zoo::HeadSpec& head, const train::ScheduleSpec& schedule, uint64_t seed,
                             const StageOptions& options, train::TrainLog* log) {
    auto model = domain_adapt_model(pretrained, indomain, head, schedule, seed, options, log);
    return zoo::make_checkpoint(model, false);
}

// Experiments ------------------------------------------------------------------

std::string to_string(TransferMode m) { return m == TransferMode::fine_tune ? "fine_tune" : "feature_extraction"; }

TransferMode parse_transfer_mode(const std::string& s) {
    if (s == "fe" || s == "feature_extraction" || s == "probe") return TransferMode::feature_extraction;
    if (s == "ft" || s == "fine_tune" || s == "finetune") return TransferMode::fine_tune;
    throw ConfigError(fmt::format("unknown transfer mode '{}' (expected fe|ft)", s));
}

void validate_plan(const TransferPlan& plan, const zoo::ModelLineage& lineage, const std::string& target_family) {
    if (plan.target_manifest_id.empty()) throw ConfigError("transfer plan has no target dataset");
    zoo::check_source_target(lineage, plan.target_manifest_id,
                             target_family.empty() ? plan.target_manifest_id : target_family);
}

json plan_config(const TransferPlan& plan, const TransferOptions& options, const std::string& source_hash) {
    json j{{"kind", "transfer"},
           {"source_sha256", source_hash},
           {"target", plan.target_manifest_id},
           {"mode", to_string(plan.mode)},
           {"seeds", {{"split", plan.target_split_seed}, {"train", plan.train_seed}, {"bootstrap", options.bootstrap.seed}}},
           {"bootstrap", options.bootstrap},
           {"pipeline",
            {{"resize_edge", options.stage.resize_edge},
             {"crop_edge", options.stage.crop_edge},
             {"interpolation", augment::TransformPipeline::interpolation()}}}};
    if (plan.mode == TransferMode::fine_tune) {
        j["schedule"] = options.finetune_schedule;
    } else {
        j["probe"] = options.probe;
    }
    return j;
}

TransferOutcome run_transfer_experiment(const TransferPlan& plan, const data::DatasetManifest& target,
                                        const TransferOptions& options) {
    if (plan.target_manifest_id != target.dataset_id()) {
        throw ConfigError(fmt::format("plan targets '{}' but the manifest is '{}'", plan.target_manifest_id,
                                      target.dataset_id()));
    }
    const zoo::Checkpoint checkpoint = zoo::load_checkpoint(plan.source_checkpoint);
    validate_plan(plan, checkpoint.lineage, target.family());

    TransferOutcome out;
    const json config = plan_config(plan, options, sha256_file_hex(plan.source_checkpoint));
    out.config_hash = options.config_hash.value_or(experiment::config_hash(config));
    out.lineage_before = checkpoint.lineage;
    const std::string started = experiment::utc_timestamp();

    const auto split = data::stratified_split(target, data::SplitSpec::target(plan.target_split_seed));
    const zoo::HeadSpec head = head_for(target);
    const auto eval = augment::TransformPipeline::eval(options.stage.resize_edge, options.stage.crop_edge);
    const train::InferenceOptions inference{options.stage.store, 64};

    std::vector<metrics::PredictionRecord> predictions;
    json artifacts{{"source_checkpoint", plan.source_checkpoint.string()}};
    if (plan.mode == TransferMode::feature_extraction) {
        options.probe.validate();
        auto model = zoo::model_from_checkpoint<float>(checkpoint, head, plan.train_seed);
        out.backbone_checksum_before = model.backbone_checksum();
        const auto train_features = train::extract_features(model, split.train, eval, inference);
        const auto test_features = train::extract_features(model, split.test, eval, inference);
        predictions = linear_probe(train_features, test_features, head, plan.train_seed, options.probe).predictions;
        out.backbone_checksum_after = model.backbone_checksum();
        out.lineage_after = model.lineage();
    } else {
        out.backbone_checksum_before =
            zoo::model_from_checkpoint<float>(checkpoint, head, plan.train_seed).backbone_checksum();
        auto model = fine_tune(checkpoint, split.train, head, options.finetune_schedule, plan.train_seed, options.stage);
        out.backbone_checksum_after = model.backbone_checksum();
        out.lineage_after = model.lineage();
        predictions = train::predict(model, split.test, eval, inference);
        if (options.output_checkpoint) {
            zoo::save_checkpoint(model, *options.output_checkpoint, true);
            artifacts["output_checkpoint"] = options.output_checkpoint->string();
        }
    }

    out.report = target.label_mode() == data::LabelMode::multi_label ? metrics::f1_report(predictions, options.bootstrap)
                                                                     : metrics::accuracy_report(predictions, options.bootstrap);
    out.ledger_entry = json{{"config_hash", out.config_hash},
                            {"experiment_id", options.experiment_id},
                            {"kind", "transfer"},
                            {"status", "completed"},
                            {"started_at", started},
                            {"finished_at", experiment::utc_timestamp()},
                            {"config", config},
                            {"config_extra", options.config_extra},
                            {"source", checkpoint.lineage.describe()},
                            {"target", target.dataset_id()},
                            {"mode", to_string(plan.mode)},
                            {"lineage", out.lineage_before},
                            {"lineage_after", out.lineage_after},
                            {"seeds",
                             {{"split", plan.target_split_seed},
                              {"train", plan.train_seed},
                              {"bootstrap", options.bootstrap.seed}}},
                            {"n_train", split.train.size()},
                            {"n_test", split.test.size()},
                            {"interpolation", augment::TransformPipeline::interpolation()},
                            {"backbone_checksum_before", out.backbone_checksum_before},
                            {"backbone_checksum_after", out.backbone_checksum_after},
                            {"report", out.report},
                            {"artifacts", artifacts},
                            {"framework_version", XFER_VERSION}};
    if (options.ledger) experiment::RunLedger(*options.ledger).append(out.ledger_entry);
    return out;
}

}  // namespace xfer::transfer
