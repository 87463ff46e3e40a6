// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>

namespace xfer::fixtures {

namespace {

// First 17 entries are the classes UCM shares.
const std::vector<std::string> kMlrsnetClasses = {
    "airplane", "baseball_diamond", "beach", "chaparral", "dense_residential_area", "forest", "freeway",
    "golf_course", "harbor_port", "intersection", "mobile_home_park", "overpass", "parking_lot", "river",
    "sparse_residential_area", "storage_tank", "tennis_court",
    // not in UCM
    "airport", "bare_land", "basketball_court", "bridge", "cloud", "commercial_area", "desert", "eroded_farmland",
    "farmland", "ground_track_field", "industrial_area", "island", "lake", "meadow", "mountain", "park", "parkway",
    "railway", "railway_station", "roundabout", "shipping_yard", "snowberg", "stadium", "swimming_pool", "terrace",
    "transmission_tower", "vegetable_greenhouse", "wetland", "wind_turbine"};

const std::vector<size_t> kMlrsnetCounts = {
    2132, 3024, 2984, 2081, 2523, 2134, 3328, 3000, 2053, 4044, 3366, 2220, 4357, 2479, 3535, 3526, 3411,
    2952, 1387, 2288, 2303, 1973, 1366, 2986, 1666, 1361, 2253, 2780, 1512, 1786, 2012, 1532, 2225, 1486,
    2278, 1818, 2259, 2706, 2471, 1596, 1460, 2296, 2278, 2396, 1608, 1930};

}  // namespace

std::vector<size_t> mock_mlrsnet_counts() { return kMlrsnetCounts; }

data::DatasetManifest mock_mlrsnet() {
    std::vector<data::ImageRecord> records;
    records.reserve(109161);
    for (size_t c = 0; c < kMlrsnetClasses.size(); ++c) {
        for (size_t i = 0; i < kMlrsnetCounts[c]; ++i) {
            records.push_back({fmt::format("{}/{}_{:05d}.jpg", kMlrsnetClasses[c], kMlrsnetClasses[c], i),
                               {static_cast<int>(c)}});
        }
    }
    return data::DatasetManifest("mlrsnet_single", data::LabelMode::single_label, kMlrsnetClasses,
                                 std::move(records), {256, std::make_pair(0.1, 10.0)}, "mlrsnet");
}

std::vector<std::string> ucm_reference_classes() {
    return {"agricultural",  "Airplane",        "Baseball-Diamond", " beach ",   "buildings",
            "Chaparral",     "Dense Residential Area", "forest", "Freeway",   "golf course",
            "Harbor Port",   "intersection",    "medium residential", "Mobile Home Park", "overpass",
            "Parking-Lot",   "River",           "runway",          "sparse residential area", "Storage Tank",
            "tennis court"};
}

std::vector<std::string> expected_shared_classes() {
    return {"airplane", "baseball_diamond", "beach", "chaparral", "dense_residential_area", "forest", "freeway",
            "golf_course", "harbor_port", "intersection", "mobile_home_park", "overpass", "parking_lot", "river",
            "sparse_residential_area", "storage_tank", "tennis_court"};
}

data::DatasetManifest mock_ucm() {
    const std::vector<std::string> classes = {
        "agricultural", "airplane", "baseballdiamond", "beach", "buildings", "chaparral", "denseresidential",
        "forest", "freeway", "golfcourse", "harbor", "intersection", "mediumresidential", "mobilehomepark",
        "overpass", "parkinglot", "river", "runway", "sparseresidential", "storagetanks", "tenniscourt"};
    std::vector<data::ImageRecord> records;
    for (size_t c = 0; c < classes.size(); ++c) {
        for (int i = 0; i < 100; ++i) {
            records.push_back({fmt::format("Images/{}/{}{:02d}.tif", classes[c], classes[c], i), {static_cast<int>(c)}});
        }
    }
    return data::DatasetManifest("ucm", data::LabelMode::single_label, classes, std::move(records),
                                 {256, std::make_pair(0.3, 0.3)});
}

data::DatasetManifest random_manifest(Rng& rng, const RandomManifestSpec& spec, const std::string& id) {
    const int n_classes = spec.min_classes + static_cast<int>(rng.uniform_index(
                                                 static_cast<uint64_t>(spec.max_classes - spec.min_classes + 1)));
    std::vector<std::string> classes;
    for (int c = 0; c < n_classes; ++c) classes.push_back(fmt::format("class_{}", c));
    std::vector<data::ImageRecord> records;
    for (int c = 0; c < n_classes; ++c) {
        const int n = spec.min_per_class + static_cast<int>(rng.uniform_index(
                                               static_cast<uint64_t>(spec.max_per_class - spec.min_per_class + 1)));
        for (int i = 0; i < n; ++i) {
            std::vector<int> labels{c};
            if (spec.mode == data::LabelMode::multi_label) {
                // extra labels only above the primary so it stays first after sorting
                const int extra = static_cast<int>(rng.uniform_index(3));
                for (int k = 0; k < extra && c + 1 < n_classes; ++k) {
                    const int l = c + 1 + static_cast<int>(rng.uniform_index(static_cast<uint64_t>(n_classes - c - 1)));
                    if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
                }
                std::sort(labels.begin(), labels.end());
            }
            records.push_back({fmt::format("img/{}/{:x}_{}.png", c, rng.next() & 0xffffff, i), labels});
        }
    }
    // interleave classes so input order is not class-sorted
    rng.shuffle(std::span<data::ImageRecord>(records));
    return data::DatasetManifest(id, spec.mode, classes, std::move(records));
}

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            fmt::format("xfer_test_{}_{}", static_cast<long>(::getpid()), counter.fetch_add(1));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

Image MemoryStore::load(const std::string& ref) const {
    const auto it = images_.find(ref);
    if (it == images_.end()) throw DecodeError(ref, "no such image");
    return it->second;
}

data::DatasetManifest two_class_set(MemoryStore& store, int per_class, int edge, uint64_t seed, const std::string& id) {
    Rng rng(seed);
    std::vector<data::ImageRecord> records;
    for (int c = 0; c < 2; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Image img(edge, edge, 3);
            for (auto& p : img.pixels) p = static_cast<float>((c ? 0.7 : 0.3) + rng.uniform(-0.05, 0.05));
            const std::string ref = fmt::format("{}/{}/{}", id, c, i);
            store.add(ref, std::move(img));
            records.push_back({ref, {c}});
        }
    }
    return data::DatasetManifest(id, data::LabelMode::single_label, {"dark", "bright"}, std::move(records));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
}

}  // namespace xfer::fixtures
