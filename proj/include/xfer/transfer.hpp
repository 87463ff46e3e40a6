// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xfer/checkpoint.hpp"
#include "xfer/dataset_registry.hpp"
#include "xfer/metrics.hpp"
#include "xfer/nn/layers.hpp"
#include "xfer/train_engine.hpp"

namespace xfer::transfer {

// Softmax (or per-class sigmoid) classifier on frozen features: fixed rate
// 1e-3, 100 epochs, batch 100, no augmentation.
struct ProbeSpec {
    double lr = 1e-3;
    int epochs = 100;
    int batch_size = 100;

    void validate() const;
    bool operator==(const ProbeSpec&) const = default;
};

void to_json(nlohmann::json& j, const ProbeSpec& s);
void from_json(const nlohmann::json& j, ProbeSpec& s);

// A single affine map on raw features, trained in double precision.
class LinearProbe {
public:
    LinearProbe(int feature_dim, zoo::HeadSpec head, uint64_t seed);

    const zoo::HeadSpec& head() const { return head_; }
    int feature_dim() const { return feature_dim_; }
    size_t parameter_count() const;
    const std::vector<double>& epoch_losses() const { return losses_; }

    void fit(const nn::Tensor<float>& features, const std::vector<std::vector<int>>& labels, const ProbeSpec& spec,
             uint64_t seed);
    nn::Tensor<double> logits(const nn::Tensor<float>& features);
    // Softmax or sigmoid scores, one record per feature row.
    std::vector<metrics::PredictionRecord> predict(const nn::Tensor<float>& features,
                                                   const std::vector<std::vector<int>>& labels,
                                                   const std::vector<std::string>& ids = {});

private:
    int feature_dim_;
    zoo::HeadSpec head_;
    nn::Linear<double> layer_;
    std::vector<double> losses_;
};

LinearProbe train_linear_probe(const nn::Tensor<float>& features, const std::vector<std::vector<int>>& labels,
                               const zoo::HeadSpec& head, uint64_t seed, const ProbeSpec& spec = {});

struct ProbeOutcome {
    LinearProbe probe;
    std::vector<metrics::PredictionRecord> predictions;  // on the held-out features
};

ProbeOutcome linear_probe(const train::FeatureSet& train_set, const train::FeatureSet& test_set,
                          const zoo::HeadSpec& head, uint64_t seed, const ProbeSpec& spec = {});

// Knobs shared by the training-based protocols.
struct StageOptions {
    const ImageStore* store = nullptr;
    int resize_edge = 292;
    int crop_edge = 256;
    std::function<void(const train::EpochRecord&)> on_epoch;
};

zoo::HeadSpec head_for(const data::DatasetManifest& manifest);

// New head, every parameter trainable, train-mode augmentation; the model
// lineage gains a finetune stage. Rejects targets already in the lineage.
zoo::Model<float> fine_tune(const zoo::Checkpoint& checkpoint, const data::DatasetManifest& target_train,
                            const zoo::HeadSpec& head, const train::ScheduleSpec& schedule, uint64_t seed,
                            const StageOptions& options = {}, train::TrainLog* log = nullptr);

// Supervised training on an in-domain set on top of a pre-trained backbone,
// returned without its head. The input lineage must start with a pretrain
// stage and must not already contain the in-domain dataset.
zoo::Checkpoint domain_adapt(const zoo::Checkpoint& pretrained, const data::DatasetManifest& indomain,
                             const zoo::HeadSpec& head, const train::ScheduleSpec& schedule, uint64_t seed,
                             const StageOptions& options = {}, train::TrainLog* log = nullptr);

// Same stage, but returns the adapted model with its in-domain head still
// attached (for scoring held-out in-domain data before the head is dropped).
zoo::Model<float> domain_adapt_model(const zoo::Checkpoint& pretrained, const data::DatasetManifest& indomain,
                                     const zoo::HeadSpec& head, const train::ScheduleSpec& schedule, uint64_t seed,
                                     const StageOptions& options = {}, train::TrainLog* log = nullptr);

enum class TransferMode { feature_extraction, fine_tune };

std::string to_string(TransferMode m);
TransferMode parse_transfer_mode(const std::string& s);

struct TransferPlan {
    std::filesystem::path source_checkpoint;
    std::string target_manifest_id;
    TransferMode mode = TransferMode::feature_extraction;
    uint64_t target_split_seed = 0;
    uint64_t train_seed = 0;
};

// Throws SourceTargetViolation when the target occurs in the lineage.
void validate_plan(const TransferPlan& plan, const zoo::ModelLineage& lineage, const std::string& target_family = {});

struct TransferOptions {
    train::ScheduleSpec finetune_schedule = train::ScheduleSpec::finetune();
    ProbeSpec probe;
    metrics::BootstrapSpec bootstrap;
    StageOptions stage;
    std::string experiment_id;
    // Appends a completed entry when set.
    std::optional<std::filesystem::path> ledger;
    // Saves the fine-tuned model (FT mode) when set.
    std::optional<std::filesystem::path> output_checkpoint;
    // Ledger key; defaults to the hash of plan_config().
    std::optional<std::string> config_hash;
    // Recorded verbatim in the ledger entry.
    nlohmann::json config_extra = nlohmann::json::object();
};

struct TransferOutcome {
    metrics::MetricReport report;
    zoo::ModelLineage lineage_before;
    zoo::ModelLineage lineage_after;
    std::string backbone_checksum_before;
    std::string backbone_checksum_after;
    std::string config_hash;
    nlohmann::json ledger_entry;
};

// Config that identifies a plan run; its canonical hash keys the ledger.
nlohmann::json plan_config(const TransferPlan& plan, const TransferOptions& options, const std::string& source_hash);

// Splits the target 20/80 (stratified, target_split_seed), runs FE or FT,
// scores the test portion with a bootstrap CI (accuracy for single-label,
// micro F1 for multi-label targets) and records the run.
TransferOutcome run_transfer_experiment(const TransferPlan& plan, const data::DatasetManifest& target,
                                        const TransferOptions& options = {});

}  // namespace xfer::transfer
