// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "xfer/dataset_registry.hpp"
#include "xfer/image_store.hpp"
#include "xfer/random.hpp"

namespace xfer::fixtures {

// Stand-in for MLRSNet (single-label, 46 classes, 109,161 records). 17 of its
// classes match the UCM-style reference list below and hold 50,197 records;
// the other 29 hold 58,964. 15 classes have an odd size.
data::DatasetManifest mock_mlrsnet();
std::vector<size_t> mock_mlrsnet_counts();

// UCM-shaped class list (21 names, mixed case, spaces and hyphens).
std::vector<std::string> ucm_reference_classes();
// Hand-built list of the mock MLRSNet classes that those names match, in
// MLRSNet vocabulary order.
std::vector<std::string> expected_shared_classes();

// 21 classes x 100 records, single-label.
data::DatasetManifest mock_ucm();

struct RandomManifestSpec {
    int min_classes = 2;
    int max_classes = 50;
    int min_per_class = 4;
    int max_per_class = 500;
    data::LabelMode mode = data::LabelMode::single_label;
};

// Random vocabulary sizes and class sizes; multi-label records carry one to
// three labels with the primary label listed first in sorted order.
data::DatasetManifest random_manifest(Rng& rng, const RandomManifestSpec& spec, const std::string& id = "rand");

// Fresh directory removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// Images held in memory, keyed by image_ref.
class MemoryStore : public ImageStore {
public:
    void add(const std::string& ref, Image image) { images_[ref] = std::move(image); }
    Image load(const std::string& ref) const override;

private:
    std::map<std::string, Image> images_;
};

// Two classes of noisy flat images, dark (mean 0.3) and bright (mean 0.7),
// registered in `store`. The mean pixel value separates them exactly.
data::DatasetManifest two_class_set(MemoryStore& store, int per_class, int edge, uint64_t seed,
                                    const std::string& id = "two_class");

void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace xfer::fixtures
