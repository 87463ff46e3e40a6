// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "xfer/model_zoo.hpp"

namespace xfer::zoo {

inline constexpr uint32_t kCheckpointFormatVersion = 1;

class CheckpointError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<float> values;

    bool operator==(const NamedTensor&) const = default;
};

// Archive layout (little-endian):
//   "XFERCKPT" | u32 format_version | u32 reserved | u64 json_bytes |
//   u64 blob_bytes | json sidecar | float32 weights blob | sha256(all prior bytes)
// The JSON sidecar carries architecture, lineage, preprocessing, the optional
// head spec and the tensor index into the blob.
struct Checkpoint {
    Architecture architecture = Architecture::toy_conv;
    int input_channels = 3;
    std::vector<NamedTensor> backbone;
    std::optional<HeadSpec> head;
    std::vector<NamedTensor> head_tensors;
    ModelLineage lineage;
    Preprocessing preprocessing;
    uint32_t format_version = kCheckpointFormatVersion;

    int feature_dim() const { return zoo::feature_dim(architecture); }
    bool has_head() const { return head.has_value(); }
    void strip_head() {
        head.reset();
        head_tensors.clear();
    }
    bool operator==(const Checkpoint&) const = default;
};

Checkpoint make_checkpoint(Model<float>& model, bool include_head = true);
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
// Lineage travels with the model.
void save_checkpoint(Model<float>& model, const std::filesystem::path& path, bool include_head = true);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Restores the backbone. With `head` set, a new head is initialised from
// `head_seed`; otherwise the stored head is restored (and required).
template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& checkpoint, const std::optional<HeadSpec>& head = std::nullopt,
                               uint64_t head_seed = 0);

extern template Model<float> model_from_checkpoint(const Checkpoint&, const std::optional<HeadSpec>&, uint64_t);
extern template Model<double> model_from_checkpoint(const Checkpoint&, const std::optional<HeadSpec>&, uint64_t);

// Externally pre-trained ImageNet weights -------------------------------------

enum class ExternalKind { supervised, swav };

ExternalKind parse_external_kind(const std::string& s);

// Minimal safetensors reader/writer (F32, F16, F64 in; F32 out).
std::vector<NamedTensor> read_safetensors(const std::filesystem::path& path);
void write_safetensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);

// Converts a torchvision-layout state dict (optionally "module."-prefixed, as
// published for SwAV) into a checkpoint with lineage
// [(imagenet1k, supervised | self_supervised_external, pretrain)] and
// torchvision ImageNet input normalisation. Non-backbone tensors (fc,
// projection heads, prototypes) are dropped.
Checkpoint import_external(const std::filesystem::path& path, ExternalKind kind,
                           Architecture architecture = Architecture::reference_residual_50, int input_channels = 3);

}  // namespace xfer::zoo
