// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xfer/errors.hpp"

namespace xfer::data {

enum class LabelMode { single_label, multi_label };

std::string to_string(LabelMode mode);
LabelMode parse_label_mode(const std::string& text);

// Exact rational in (0, 1). Split counts are computed with integer
// arithmetic so that floor(fraction * n) never suffers rounding.
struct Fraction {
    int64_t num = 4;
    int64_t den = 5;

    // Accepts "0.8", "4/5" or "80%".
    static Fraction parse(const std::string& text);
    int64_t floor_times(int64_t n) const { return num * n / den; }
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const;
};

struct ImageRecord {
    std::string image_ref;
    // Sorted ascending, unique. labels.front() is the primary label.
    std::vector<int> labels;

    int primary_label() const { return labels.front(); }
    bool operator==(const ImageRecord&) const = default;
};

struct DatasetMetadata {
    std::optional<int> image_size;
    std::optional<std::pair<double, double>> resolution_m;

    bool operator==(const DatasetMetadata&) const = default;
};

class ManifestError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Immutable listing of labelled images. All invariants are checked at
// construction; a DatasetManifest that exists is valid.
class DatasetManifest {
public:
    // `family` names the underlying dataset that variants (subsets,
    // single/multi-label annotations) derive from; defaults to dataset_id.
    DatasetManifest(std::string dataset_id, LabelMode label_mode, std::vector<std::string> classes,
                    std::vector<ImageRecord> records, DatasetMetadata metadata = {}, std::string family = {});

    const std::string& dataset_id() const { return dataset_id_; }
    const std::string& family() const { return family_; }
    LabelMode label_mode() const { return label_mode_; }
    const std::vector<std::string>& classes() const { return classes_; }
    const std::vector<ImageRecord>& records() const { return records_; }
    const DatasetMetadata& metadata() const { return metadata_; }
    size_t size() const { return records_.size(); }
    size_t num_classes() const { return classes_.size(); }

    // Number of records per class, keyed by primary label.
    std::vector<size_t> primary_class_counts() const;

    bool operator==(const DatasetManifest&) const = default;

private:
    std::string dataset_id_;
    std::string family_;
    LabelMode label_mode_;
    std::vector<std::string> classes_;
    std::vector<ImageRecord> records_;
    DatasetMetadata metadata_;
};

DatasetManifest parse_manifest(std::istream& in, const std::string& origin = "<stream>");
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(std::ostream& out, const DatasetManifest& manifest);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Split ----------------------------------------------------------------------

enum class SplitRole { source, target };

std::string to_string(SplitRole role);
SplitRole parse_split_role(const std::string& text);

struct SplitSpec {
    Fraction train_fraction;
    uint64_t seed = 0;
    SplitRole role = SplitRole::source;

    // 80% of each class trains a source model, 20% trains on a target.
    static SplitSpec source(uint64_t seed) { return {{4, 5}, seed, SplitRole::source}; }
    static SplitSpec target(uint64_t seed) { return {{1, 5}, seed, SplitRole::target}; }
    static SplitSpec for_role(SplitRole role, uint64_t seed) {
        return role == SplitRole::source ? source(seed) : target(seed);
    }
};

struct SplitResult {
    DatasetManifest train;
    DatasetManifest test;
};

// Per class c with n_c records, train receives floor(fraction * n_c). Within
// a class, records are ordered by image_ref and shuffled by a stream derived
// from (seed, class index). Multi-label records stratify on the primary label.
// Both outputs keep the full class vocabulary and the input record order.
SplitResult stratified_split(const DatasetManifest& manifest, const SplitSpec& spec);

// Subsets --------------------------------------------------------------------

enum class SubsetMode { same_classes, different_classes, all_classes_half_images };

std::string to_string(SubsetMode mode);
SubsetMode parse_subset_mode(const std::string& text);

struct SubsetSpec {
    SubsetMode mode = SubsetMode::same_classes;
    std::vector<std::string> reference_classes;
    uint64_t seed = 0;
};

// Lowercase, trim, and map spaces and hyphens to underscores.
std::string normalize_class_name(const std::string& name);

// Manifest class names whose normalized form appears among the normalized
// reference names, in manifest vocabulary order.
std::vector<std::string> matched_classes(const DatasetManifest& manifest,
                                         const std::vector<std::string>& reference_classes);

// same_classes keeps records whose primary class matches the reference list,
// different_classes keeps the complement, all_classes_half_images keeps
// floor(n_c / 2) seeded records of every class. The output vocabulary holds
// only classes still referenced by a record.
DatasetManifest build_subset(const DatasetManifest& manifest, const SubsetSpec& spec);

struct ClassOverlap {
    std::vector<std::string> shared;
    std::vector<std::string> only_a;
    std::vector<std::string> only_b;
    double jaccard = 0.0;
};

// Computed over normalized class names; the name lists are sorted.
ClassOverlap class_overlap(const DatasetManifest& a, const DatasetManifest& b);

// Reference facts about the public scene classification datasets.
struct DatasetInfo {
    std::string id;
    std::string name;
    size_t size;
    std::vector<int> num_classes;  // MLRSNet: 46 single-label / 60 multi-label
    int image_size;
    double resolution_min_m;
    double resolution_max_m;
    std::string annotations;
};

const std::vector<DatasetInfo>& dataset_catalog();
const DatasetInfo& catalog_entry(const std::string& id);

}  // namespace xfer::data
