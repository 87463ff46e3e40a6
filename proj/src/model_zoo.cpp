// SPDX-License-Identifier: Apache-2.0

#include "xfer/model_zoo.hpp"

#include <fmt/format.h>

#include <cstring>

#include "xfer/checkpoint.hpp"
#include "xfer/dataset_registry.hpp"
#include "xfer/hashing.hpp"
#include "xfer/random.hpp"

namespace xfer::zoo {

using nlohmann::json;

std::string to_string(Architecture a) {
    return a == Architecture::reference_residual_50 ? "reference_residual_50" : "toy_conv";
}
std::string to_string(OutputMode m) { return m == OutputMode::exclusive ? "exclusive" : "independent"; }
std::string to_string(Objective o) {
    return o == Objective::supervised ? "supervised" : "self_supervised_external";
}
std::string to_string(StageKind k) {
    switch (k) {
        case StageKind::pretrain: return "pretrain";
        case StageKind::domain_adapt: return "domain_adapt";
        case StageKind::finetune: return "finetune";
    }
    return "?";
}

Architecture parse_architecture(const std::string& s) {
    const std::string t = data::normalize_class_name(s);
    if (t == "reference_residual_50" || t == "resnet50" || t == "resnet_50") return Architecture::reference_residual_50;
    if (t == "toy_conv" || t == "toy") return Architecture::toy_conv;
    throw ConfigError(fmt::format("unknown architecture '{}'", s));
}

OutputMode parse_output_mode(const std::string& s) {
    if (s == "exclusive" || s == "single" || s == "single_label") return OutputMode::exclusive;
    if (s == "independent" || s == "multi" || s == "multi_label") return OutputMode::independent;
    throw ConfigError(fmt::format("unknown output mode '{}'", s));
}

Objective parse_objective(const std::string& s) {
    if (s == "supervised") return Objective::supervised;
    if (s == "self_supervised_external" || s == "swav") return Objective::self_supervised_external;
    throw ConfigError(fmt::format("unknown objective '{}'", s));
}

StageKind parse_stage_kind(const std::string& s) {
    if (s == "pretrain") return StageKind::pretrain;
    if (s == "domain_adapt") return StageKind::domain_adapt;
    if (s == "finetune") return StageKind::finetune;
    throw ConfigError(fmt::format("unknown stage kind '{}'", s));
}

int feature_dim(Architecture a) { return a == Architecture::reference_residual_50 ? 2048 : 64; }

void HeadSpec::validate() const {
    if (num_classes <= 0) throw ConfigError(fmt::format("head needs a positive class count, got {}", num_classes));
}

// Lineage --------------------------------------------------------------------

bool ModelLineage::mentions(const std::string& dataset) const {
    for (const auto& s : stages_) {
        if (s.dataset_id == dataset || s.family_or_id() == dataset) return true;
    }
    return false;
}

std::string ModelLineage::describe() const {
    if (stages_.empty()) return "scratch";
    std::string out;
    for (size_t i = 0; i < stages_.size(); ++i) {
        const auto& s = stages_[i];
        out += fmt::format("{}{}({},{})", i ? " > " : "", s.dataset_id, to_string(s.objective), to_string(s.stage_kind));
    }
    return out;
}

void to_json(json& j, const LineageStage& s) {
    j = json{{"dataset_id", s.dataset_id},
             {"family", s.family_or_id()},
             {"objective", to_string(s.objective)},
             {"stage_kind", to_string(s.stage_kind)}};
}

void from_json(const json& j, LineageStage& s) {
    s.dataset_id = j.at("dataset_id").get<std::string>();
    s.family = j.value("family", s.dataset_id);
    s.objective = parse_objective(j.at("objective").get<std::string>());
    s.stage_kind = parse_stage_kind(j.at("stage_kind").get<std::string>());
}

void to_json(json& j, const ModelLineage& l) {
    j = json::array();
    for (const auto& s : l.stages()) j.push_back(s);
}

void from_json(const json& j, ModelLineage& l) {
    std::vector<LineageStage> stages;
    for (const auto& e : j) stages.push_back(e.get<LineageStage>());
    l = ModelLineage(std::move(stages));
}

void check_source_target(const ModelLineage& lineage, const std::string& target_id, const std::string& target_family) {
    for (const auto& s : lineage.stages()) {
        const std::string& fam = s.family_or_id();
        if (s.dataset_id == target_id || fam == target_id || s.dataset_id == target_family || fam == target_family) {
            throw SourceTargetViolation(fmt::format(
                "dataset '{}' is both in the source lineage [{}] and the target", target_id, lineage.describe()));
        }
    }
}

Preprocessing Preprocessing::imagenet_torchvision() {
    Preprocessing p;
    p.mean = {0.485, 0.456, 0.406};
    p.std = {0.229, 0.224, 0.225};
    p.origin = "imagenet_torchvision";
    return p;
}

void to_json(json& j, const Preprocessing& p) {
    j = json{{"input_scale", p.input_scale}, {"mean", p.mean}, {"std", p.std}, {"bgr", p.bgr}, {"origin", p.origin}};
}

void from_json(const json& j, Preprocessing& p) {
    p.input_scale = j.at("input_scale").get<double>();
    p.mean = j.at("mean").get<std::array<double, 3>>();
    p.std = j.at("std").get<std::array<double, 3>>();
    p.bgr = j.at("bgr").get<bool>();
    p.origin = j.value("origin", std::string("unknown"));
}

// Architectures --------------------------------------------------------------

namespace {

template <typename T>
nn::Sequential<T> make_toy_conv(int input_channels) {
    nn::Sequential<T> net;
    const int widths[] = {16, 32, 64};
    int in = input_channels;
    for (int b = 0; b < 3; ++b) {
        auto block = std::make_unique<nn::Sequential<T>>();
        block->add("conv", std::make_unique<nn::Conv2d<T>>(in, widths[b], 3, 1, 1))
            .add("bn", std::make_unique<nn::BatchNorm2d<T>>(widths[b]))
            .add("relu", std::make_unique<nn::ReLU<T>>())
            .add("pool", std::make_unique<nn::MaxPool2d<T>>(2, 2));
        net.add(fmt::format("block{}", b + 1), std::move(block));
        in = widths[b];
    }
    net.add("avgpool", std::make_unique<nn::GlobalAvgPool<T>>());
    return net;
}

template <typename T>
nn::Sequential<T> make_residual_50(int input_channels) {
    nn::Sequential<T> net;
    net.add("conv1", std::make_unique<nn::Conv2d<T>>(input_channels, 64, 7, 2, 3))
        .add("bn1", std::make_unique<nn::BatchNorm2d<T>>(64))
        .add("relu", std::make_unique<nn::ReLU<T>>())
        .add("maxpool", std::make_unique<nn::MaxPool2d<T>>(3, 2, 1));
    const int blocks[] = {3, 4, 6, 3};
    const int planes[] = {64, 128, 256, 512};
    int in = 64;
    for (int stage = 0; stage < 4; ++stage) {
        auto layer = std::make_unique<nn::Sequential<T>>();
        for (int b = 0; b < blocks[stage]; ++b) {
            // Stride sits on the 3x3 convolution of the first block (torchvision layout).
            const int stride = (b == 0 && stage > 0) ? 2 : 1;
            layer->add(std::to_string(b), std::make_unique<nn::Bottleneck<T>>(in, planes[stage], stride));
            in = planes[stage] * nn::Bottleneck<T>::kExpansion;
        }
        net.add(fmt::format("layer{}", stage + 1), std::move(layer));
    }
    net.add("avgpool", std::make_unique<nn::GlobalAvgPool<T>>());
    return net;
}

template <typename T>
nn::Sequential<T> make_backbone(Architecture a, int input_channels) {
    if (input_channels != 1 && input_channels != 3) {
        throw ConfigError(fmt::format("input channels must be 1 or 3, got {}", input_channels));
    }
    return a == Architecture::toy_conv ? make_toy_conv<T>(input_channels) : make_residual_50<T>(input_channels);
}

template <typename T>
std::string checksum(const std::vector<nn::NamedParameter<T>>& params) {
    Sha256 h;
    for (const auto& p : params) {
        h.update(p.name);
        const auto& v = p.param->value.data;
        h.update(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(v.data()), v.size() * sizeof(T)));
    }
    return to_hex(h.finish());
}

}  // namespace

// Model ----------------------------------------------------------------------

template <typename T>
Model<T>::Model(BackboneSpec backbone_spec, HeadSpec head_spec)
    : backbone_spec_(std::move(backbone_spec)),
      head_spec_(head_spec),
      backbone_(make_backbone<T>(backbone_spec_.architecture, backbone_spec_.input_channels)),
      head_(backbone_spec_.feature_dim(), std::max(head_spec.num_classes, 1)) {
    head_spec_.validate();
    reset_backbone(backbone_spec_.seed);
    Rng rng(derive_seed(backbone_spec_.seed, {fnv1a64("head"), head_generation_}));
    head_.reset(rng);
}

template <typename T>
void Model<T>::reset_backbone(uint64_t seed) {
    Rng rng(derive_seed(seed, {fnv1a64("backbone")}));
    backbone_.reset(rng);
}

template <typename T>
nn::Tensor<T> Model<T>::features(const nn::Tensor<T>& input, nn::Phase phase) {
    return backbone_.forward(input, phase);
}

template <typename T>
nn::Tensor<T> Model<T>::forward(const nn::Tensor<T>& input, nn::Phase phase) {
    return head_.forward(backbone_.forward(input, phase), phase);
}

template <typename T>
void Model<T>::backward(const nn::Tensor<T>& grad_logits) {
    backbone_.backward(head_.backward(grad_logits));
}

template <typename T>
std::vector<nn::NamedParameter<T>> Model<T>::backbone_parameters() {
    std::vector<nn::NamedParameter<T>> out;
    backbone_.collect("", out);
    return out;
}

template <typename T>
std::vector<nn::NamedParameter<T>> Model<T>::head_parameters() {
    std::vector<nn::NamedParameter<T>> out;
    head_.collect("fc", out);
    return out;
}

template <typename T>
std::vector<nn::NamedParameter<T>> Model<T>::parameters() {
    auto out = backbone_parameters();
    auto head = head_parameters();
    out.insert(out.end(), head.begin(), head.end());
    return out;
}

template <typename T>
std::string Model<T>::backbone_checksum() const {
    return checksum(const_cast<Model*>(this)->backbone_parameters());
}

template <typename T>
std::string Model<T>::head_checksum() const {
    return checksum(const_cast<Model*>(this)->head_parameters());
}

template <typename T>
void Model<T>::replace_head(const HeadSpec& head, uint64_t seed) {
    head.validate();
    ++head_generation_;
    head_spec_ = head;
    head_ = nn::Linear<T>(backbone_spec_.feature_dim(), head.num_classes);
    Rng rng(derive_seed(seed, {fnv1a64("head"), head_generation_}));
    head_.reset(rng);
}

template class Model<float>;
template class Model<double>;

template <typename T>
Model<T> build_model(const BackboneSpec& backbone, const HeadSpec& head) {
    head.validate();
    if (!backbone.checkpoint) return Model<T>(backbone, head);
    if (!std::filesystem::exists(*backbone.checkpoint)) {
        throw ConfigError(fmt::format("checkpoint '{}' not found", backbone.checkpoint->string()));
    }
    const Checkpoint ckpt = load_checkpoint(*backbone.checkpoint);
    if (ckpt.architecture != backbone.architecture || ckpt.input_channels != backbone.input_channels) {
        throw ConfigError(fmt::format("checkpoint '{}' holds a {} backbone with {} input channels, expected {} with {}",
                                      backbone.checkpoint->string(), to_string(ckpt.architecture),
                                      ckpt.input_channels, to_string(backbone.architecture),
                                      backbone.input_channels));
    }
    return model_from_checkpoint<T>(ckpt, head, backbone.seed);
}

template Model<float> build_model(const BackboneSpec&, const HeadSpec&);
template Model<double> build_model(const BackboneSpec&, const HeadSpec&);

}  // namespace xfer::zoo
