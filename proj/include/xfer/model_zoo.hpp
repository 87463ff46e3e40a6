// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xfer/errors.hpp"
#include "xfer/nn/layers.hpp"

namespace xfer::zoo {

enum class Architecture { reference_residual_50, toy_conv };
enum class OutputMode { exclusive, independent };
enum class Objective { supervised, self_supervised_external };
enum class StageKind { pretrain, domain_adapt, finetune };

std::string to_string(Architecture a);
std::string to_string(OutputMode m);
std::string to_string(Objective o);
std::string to_string(StageKind k);
Architecture parse_architecture(const std::string& s);
OutputMode parse_output_mode(const std::string& s);
Objective parse_objective(const std::string& s);
StageKind parse_stage_kind(const std::string& s);

// Penultimate width: 2048 for the 50-layer residual network, 64 for toy_conv.
int feature_dim(Architecture a);

struct HeadSpec {
    int num_classes = 1;
    OutputMode output_mode = OutputMode::exclusive;

    void validate() const;
    bool operator==(const HeadSpec&) const = default;
};

struct BackboneSpec {
    Architecture architecture = Architecture::toy_conv;
    int input_channels = 3;
    // Scratch initialisation seed; ignored when checkpoint is set.
    uint64_t seed = 0;
    std::optional<std::filesystem::path> checkpoint;

    int feature_dim() const { return zoo::feature_dim(architecture); }
};

struct LineageStage {
    std::string dataset_id;
    Objective objective = Objective::supervised;
    StageKind stage_kind = StageKind::pretrain;
    // Underlying dataset (e.g. "mlrsnet" for "mlrsnet_multi"); defaults to dataset_id.
    std::string family;

    const std::string& family_or_id() const { return family.empty() ? dataset_id : family; }
    // an empty family means "same as dataset_id"
    bool operator==(const LineageStage& o) const {
        return dataset_id == o.dataset_id && family_or_id() == o.family_or_id() && objective == o.objective &&
               stage_kind == o.stage_kind;
    }
};

// Append-only provenance of the datasets a backbone was trained on.
class ModelLineage {
public:
    ModelLineage() = default;
    explicit ModelLineage(std::vector<LineageStage> stages) : stages_(std::move(stages)) {}

    void append(LineageStage stage) { stages_.push_back(std::move(stage)); }
    const std::vector<LineageStage>& stages() const { return stages_; }
    size_t size() const { return stages_.size(); }
    bool empty() const { return stages_.empty(); }

    // True when `dataset` names a stage's dataset_id or family.
    bool mentions(const std::string& dataset) const;
    // "imagenet1k(supervised,pretrain) > mlrsnet(supervised,domain_adapt)"
    std::string describe() const;

    bool operator==(const ModelLineage&) const = default;

private:
    std::vector<LineageStage> stages_;
};

void to_json(nlohmann::json& j, const LineageStage& s);
void from_json(const nlohmann::json& j, LineageStage& s);
void to_json(nlohmann::json& j, const ModelLineage& l);
void from_json(const nlohmann::json& j, ModelLineage& l);

// Throws SourceTargetViolation when the target dataset (by id or family)
// already appears in the lineage.
void check_source_target(const ModelLineage& lineage, const std::string& target_id, const std::string& target_family);

// Maps [0,1] RGB pixels to network input: (pixel * input_scale - mean) / std,
// channel order optionally reversed first.
struct Preprocessing {
    double input_scale = 1.0;
    std::array<double, 3> mean{0.0, 0.0, 0.0};
    std::array<double, 3> std{1.0, 1.0, 1.0};
    bool bgr = false;
    std::string origin = "identity";

    static Preprocessing imagenet_torchvision();
    bool operator==(const Preprocessing&) const = default;
};

void to_json(nlohmann::json& j, const Preprocessing& p);
void from_json(const nlohmann::json& j, Preprocessing& p);

// Backbone (-> N x feature_dim) followed by a linear classification head
// producing raw scores (logits).
template <typename T>
class Model {
public:
    Model(BackboneSpec backbone_spec, HeadSpec head_spec);

    nn::Tensor<T> forward(const nn::Tensor<T>& input, nn::Phase phase);
    nn::Tensor<T> features(const nn::Tensor<T>& input, nn::Phase phase);
    // Backpropagates d(loss)/d(logits) of the last train-phase forward.
    void backward(const nn::Tensor<T>& grad_logits);

    std::vector<nn::NamedParameter<T>> backbone_parameters();
    std::vector<nn::NamedParameter<T>> head_parameters();
    std::vector<nn::NamedParameter<T>> parameters();

    // SHA-256 over every backbone tensor (including normalization buffers).
    std::string backbone_checksum() const;
    std::string head_checksum() const;

    const BackboneSpec& backbone_spec() const { return backbone_spec_; }
    const HeadSpec& head_spec() const { return head_spec_; }
    const ModelLineage& lineage() const { return lineage_; }
    ModelLineage& lineage() { return lineage_; }
    const Preprocessing& preprocessing() const { return preprocessing_; }
    void set_preprocessing(Preprocessing p) { preprocessing_ = std::move(p); }

    // Reinitialises the head; the backbone is untouched. Each call mixes a
    // replacement counter into the seed so a new head always differs.
    void replace_head(const HeadSpec& head, uint64_t seed);
    void reset_backbone(uint64_t seed);

    nn::Sequential<T>& backbone() { return backbone_; }
    nn::Linear<T>& head() { return head_; }

private:
    BackboneSpec backbone_spec_;
    HeadSpec head_spec_;
    nn::Sequential<T> backbone_;
    nn::Linear<T> head_;
    ModelLineage lineage_;
    Preprocessing preprocessing_;
    uint64_t head_generation_ = 0;
};

extern template class Model<float>;
extern template class Model<double>;

// Seeded scratch model, or a backbone restored from spec.checkpoint with a
// freshly initialised head.
template <typename T>
Model<T> build_model(const BackboneSpec& backbone, const HeadSpec& head);

template <typename T>
void replace_head(Model<T>& model, const HeadSpec& head, uint64_t seed) {
    model.replace_head(head, seed);
}

extern template Model<float> build_model(const BackboneSpec&, const HeadSpec&);
extern template Model<double> build_model(const BackboneSpec&, const HeadSpec&);

}  // namespace xfer::zoo
