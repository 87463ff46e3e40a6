// SPDX-License-Identifier: Apache-2.0

#include "xfer/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_map>

#include "xfer/hashing.hpp"

namespace xfer::zoo {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'X', 'F', 'E', 'R', 'C', 'K', 'P', 'T'};

template <typename T>
std::vector<NamedTensor> export_tensors(const std::vector<nn::NamedParameter<T>>& params) {
    std::vector<NamedTensor> out;
    out.reserve(params.size());
    for (const auto& p : params) {
        NamedTensor t;
        t.name = p.name;
        t.shape = p.param->value.shape;
        t.values.assign(p.param->value.data.begin(), p.param->value.data.end());
        out.push_back(std::move(t));
    }
    return out;
}

template <typename T>
void import_tensors(const std::vector<NamedTensor>& tensors, const std::vector<nn::NamedParameter<T>>& params,
                    const std::string& what) {
    std::unordered_map<std::string, const NamedTensor*> by_name;
    for (const auto& t : tensors) by_name.emplace(t.name, &t);
    for (const auto& p : params) {
        auto it = by_name.find(p.name);
        if (it == by_name.end()) throw CheckpointError(fmt::format("{} lacks tensor '{}'", what, p.name));
        const NamedTensor& t = *it->second;
        if (t.shape != p.param->value.shape) {
            throw CheckpointError(fmt::format("{} tensor '{}' has shape {}, expected {}", what, p.name,
                                              nn::shape_str(t.shape), nn::shape_str(p.param->value.shape)));
        }
        p.param->value.data.assign(t.values.begin(), t.values.end());
    }
    if (by_name.size() != params.size()) {
        for (const auto& t : tensors) {
            const bool known = std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.name == t.name; });
            if (!known) throw CheckpointError(fmt::format("{} has unexpected tensor '{}'", what, t.name));
        }
    }
}

template <typename U>
void put(std::string& out, U value) {
    char buf[sizeof(U)];
    std::memcpy(buf, &value, sizeof(U));
    out.append(buf, sizeof(U));
}

template <typename U>
U get(const std::string& in, size_t& pos) {
    if (pos + sizeof(U) > in.size()) throw CheckpointError("truncated checkpoint");
    U v;
    std::memcpy(&v, in.data() + pos, sizeof(U));
    pos += sizeof(U);
    return v;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
    return std::string(std::istreambuf_iterator<char>(in), {});
}

float half_to_float(uint16_t h) {
    const uint32_t sign = (h >> 15) & 1u;
    const uint32_t exp = (h >> 10) & 0x1Fu;
    const uint32_t mant = h & 0x3FFu;
    float v;
    if (exp == 0) {
        v = std::ldexp(static_cast<float>(mant), -24);
    } else if (exp == 31) {
        v = mant ? std::numeric_limits<float>::quiet_NaN() : std::numeric_limits<float>::infinity();
    } else {
        v = std::ldexp(static_cast<float>(mant | 0x400u), static_cast<int>(exp) - 25);
    }
    return sign ? -v : v;
}

}  // namespace

Checkpoint make_checkpoint(Model<float>& model, bool include_head) {
    Checkpoint c;
    c.architecture = model.backbone_spec().architecture;
    c.input_channels = model.backbone_spec().input_channels;
    c.backbone = export_tensors(model.backbone_parameters());
    if (include_head) {
        c.head = model.head_spec();
        c.head_tensors = export_tensors(model.head_parameters());
    }
    c.lineage = model.lineage();
    c.preprocessing = model.preprocessing();
    return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    json index = json::array();
    std::string blob;
    auto append = [&](const std::vector<NamedTensor>& tensors, const char* part) {
        for (const auto& t : tensors) {
            if (t.values.size() != nn::Tensor<float>::count(t.shape)) {
                throw std::logic_error(fmt::format("tensor '{}' size does not match its shape", t.name));
            }
            index.push_back({{"name", t.name}, {"part", part}, {"shape", t.shape}, {"offset", blob.size()}});
            blob.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(float));
        }
    };
    append(c.backbone, "backbone");
    append(c.head_tensors, "head");

    json meta{{"architecture", to_string(c.architecture)},
              {"input_channels", c.input_channels},
              {"feature_dim", c.feature_dim()},
              {"lineage", c.lineage},
              {"preprocessing", c.preprocessing},
              {"head", c.head ? json{{"num_classes", c.head->num_classes},
                                     {"output_mode", to_string(c.head->output_mode)}}
                              : json(nullptr)},
              {"tensors", index},
              {"format_version", c.format_version}};
    const std::string sidecar = meta.dump();

    std::string out(kMagic, sizeof(kMagic));
    put<uint32_t>(out, c.format_version);
    put<uint32_t>(out, 0);
    put<uint64_t>(out, sidecar.size());
    put<uint64_t>(out, blob.size());
    out += sidecar;
    out += blob;
    const auto digest = sha256(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(out.data()), out.size()));
    out.append(reinterpret_cast<const char*>(digest.data()), digest.size());

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", tmp.string()));
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw std::runtime_error(fmt::format("short write to '{}'", tmp.string()));
    }
    std::filesystem::rename(tmp, path);
}

void save_checkpoint(Model<float>& model, const std::filesystem::path& path, bool include_head) {
    save_checkpoint(make_checkpoint(model, include_head), path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string raw = read_file(path);
    if (raw.size() < sizeof(kMagic) + 24 + 32 || std::memcmp(raw.data(), kMagic, sizeof(kMagic)) != 0) {
        throw CheckpointError(fmt::format("'{}' is not a checkpoint archive", path.string()));
    }
    size_t pos = sizeof(kMagic);
    const auto version = get<uint32_t>(raw, pos);
    if (version != kCheckpointFormatVersion) {
        throw CheckpointError(fmt::format("'{}' has format version {}, this build reads version {}", path.string(),
                                          version, kCheckpointFormatVersion));
    }
    get<uint32_t>(raw, pos);
    const auto json_len = get<uint64_t>(raw, pos);
    const auto blob_len = get<uint64_t>(raw, pos);
    if (pos + json_len + blob_len + 32 != raw.size()) {
        throw CheckpointError(fmt::format("'{}' is truncated or has trailing bytes", path.string()));
    }
    const size_t body = raw.size() - 32;
    const auto digest = sha256(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(raw.data()), body));
    if (std::memcmp(digest.data(), raw.data() + body, 32) != 0) {
        throw CheckpointError(fmt::format("'{}' failed its checksum", path.string()));
    }
    const json meta = json::parse(raw.substr(pos, json_len));
    const char* blob = raw.data() + pos + json_len;

    Checkpoint c;
    try {
        c.format_version = meta.at("format_version").get<uint32_t>();
        c.architecture = parse_architecture(meta.at("architecture").get<std::string>());
        c.input_channels = meta.at("input_channels").get<int>();
        c.lineage = meta.at("lineage").get<ModelLineage>();
        c.preprocessing = meta.at("preprocessing").get<Preprocessing>();
        if (!meta.at("head").is_null()) {
            c.head = HeadSpec{meta["head"].at("num_classes").get<int>(),
                              parse_output_mode(meta["head"].at("output_mode").get<std::string>())};
        }
        for (const auto& e : meta.at("tensors")) {
            NamedTensor t;
            t.name = e.at("name").get<std::string>();
            t.shape = e.at("shape").get<std::vector<int>>();
            const auto offset = e.at("offset").get<uint64_t>();
            const size_t count = nn::Tensor<float>::count(t.shape);
            if (offset + count * sizeof(float) > blob_len) throw CheckpointError("tensor index points outside blob");
            t.values.resize(count);
            std::memcpy(t.values.data(), blob + offset, count * sizeof(float));
            (e.at("part").get<std::string>() == "head" ? c.head_tensors : c.backbone).push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw CheckpointError(fmt::format("'{}' has a malformed sidecar: {}", path.string(), e.what()));
    }
    return c;
}

template <typename T>
Model<T> model_from_checkpoint(const Checkpoint& c, const std::optional<HeadSpec>& head, uint64_t head_seed) {
    if (!head && !c.head) throw CheckpointError("checkpoint carries no head and none was requested");
    BackboneSpec spec;
    spec.architecture = c.architecture;
    spec.input_channels = c.input_channels;
    spec.seed = head_seed;
    Model<T> model(spec, head ? *head : *c.head);
    import_tensors(c.backbone, model.backbone_parameters(), "checkpoint backbone");
    if (!head) import_tensors(c.head_tensors, model.head_parameters(), "checkpoint head");
    model.lineage() = c.lineage;
    model.set_preprocessing(c.preprocessing);
    return model;
}

template Model<float> model_from_checkpoint(const Checkpoint&, const std::optional<HeadSpec>&, uint64_t);
template Model<double> model_from_checkpoint(const Checkpoint&, const std::optional<HeadSpec>&, uint64_t);

// External weights -------------------------------------------------------------

ExternalKind parse_external_kind(const std::string& s) {
    if (s == "supervised") return ExternalKind::supervised;
    if (s == "swav" || s == "self_supervised") return ExternalKind::swav;
    throw ConfigError(fmt::format("unknown source kind '{}' (expected supervised|swav)", s));
}

std::vector<NamedTensor> read_safetensors(const std::filesystem::path& path) {
    const std::string raw = read_file(path);
    size_t pos = 0;
    const auto header_len = get<uint64_t>(raw, pos);
    if (pos + header_len > raw.size()) throw CheckpointError(fmt::format("'{}': truncated safetensors header", path.string()));
    json header;
    try {
        header = json::parse(raw.substr(pos, header_len));
    } catch (const json::exception& e) {
        throw CheckpointError(fmt::format("'{}': bad safetensors header: {}", path.string(), e.what()));
    }
    const char* data = raw.data() + pos + header_len;
    const size_t data_len = raw.size() - pos - header_len;
    std::vector<NamedTensor> out;
    for (const auto& [name, info] : header.items()) {
        if (name == "__metadata__") continue;
        NamedTensor t;
        t.name = name;
        t.shape = info.at("shape").get<std::vector<int>>();
        const auto offsets = info.at("data_offsets").get<std::vector<uint64_t>>();
        const std::string dtype = info.at("dtype").get<std::string>();
        const size_t count = nn::Tensor<float>::count(t.shape);
        if (offsets.size() != 2 || offsets[1] > data_len || offsets[0] > offsets[1]) {
            throw CheckpointError(fmt::format("'{}': tensor '{}' has bad offsets", path.string(), name));
        }
        const char* src = data + offsets[0];
        const size_t bytes = offsets[1] - offsets[0];
        t.values.resize(count);
        if (dtype == "F32" && bytes == count * 4) {
            std::memcpy(t.values.data(), src, bytes);
        } else if (dtype == "F64" && bytes == count * 8) {
            for (size_t i = 0; i < count; ++i) {
                double d;
                std::memcpy(&d, src + i * 8, 8);
                t.values[i] = static_cast<float>(d);
            }
        } else if (dtype == "F16" && bytes == count * 2) {
            for (size_t i = 0; i < count; ++i) {
                uint16_t h;
                std::memcpy(&h, src + i * 2, 2);
                t.values[i] = half_to_float(h);
            }
        } else if ((dtype == "I64" || dtype == "I32") && name.ends_with("num_batches_tracked")) {
            continue;
        } else {
            throw CheckpointError(fmt::format("'{}': tensor '{}' has unsupported dtype {} or size", path.string(), name,
                                              dtype));
        }
        out.push_back(std::move(t));
    }
    return out;
}

void write_safetensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors) {
    json header = json::object();
    std::string data;
    for (const auto& t : tensors) {
        const uint64_t begin = data.size();
        data.append(reinterpret_cast<const char*>(t.values.data()), t.values.size() * sizeof(float));
        header[t.name] = {{"dtype", "F32"}, {"shape", t.shape}, {"data_offsets", {begin, data.size()}}};
    }
    std::string h = header.dump();
    while ((h.size() + 8) % 8 != 0) h.push_back(' ');
    std::string out;
    put<uint64_t>(out, h.size());
    out += h;
    out += data;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

Checkpoint import_external(const std::filesystem::path& path, ExternalKind kind, Architecture architecture,
                           int input_channels) {
    std::vector<NamedTensor> raw = read_safetensors(path);
    for (auto& t : raw) {
        for (const char* prefix : {"module.", "backbone.", "model."}) {
            if (t.name.starts_with(prefix)) t.name = t.name.substr(std::strlen(prefix));
        }
    }
    BackboneSpec spec;
    spec.architecture = architecture;
    spec.input_channels = input_channels;
    Model<float> model(spec, HeadSpec{1, OutputMode::exclusive});
    const auto params = model.backbone_parameters();
    std::vector<NamedTensor> backbone;
    for (auto& t : raw) {
        const bool wanted = std::any_of(params.begin(), params.end(), [&](const auto& p) { return p.name == t.name; });
        if (wanted) backbone.push_back(std::move(t));
    }
    import_tensors(backbone, params, fmt::format("'{}'", path.string()));

    model.lineage().append({"imagenet1k",
                            kind == ExternalKind::supervised ? Objective::supervised : Objective::self_supervised_external,
                            StageKind::pretrain, "imagenet1k"});
    model.set_preprocessing(Preprocessing::imagenet_torchvision());
    return make_checkpoint(model, false);
}

}  // namespace xfer::zoo
