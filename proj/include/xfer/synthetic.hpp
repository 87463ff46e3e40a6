// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "xfer/dataset_registry.hpp"
#include "xfer/image.hpp"

namespace xfer::synthetic {

// Procedural two-domain texture scenes for desk-scale experiments.
//
//   generic  21 classes, 7 pattern families x 3 scale bands, random colour (stands in for a large
//            general-purpose pre-training set)
//   aerial   16 land-cover-like texture classes (the in-domain set)
//   target   8 classes, 6 of them shared with aerial and 2 the aerial domain
//            never shows, seen through a different sensor: channel gains,
//            softer optics and more noise
//
// Image refs have the form
//   synth://<domain>/<generator_seed>/<class>/<index>?size=<edge>
// and render to the same pixels on every platform.

enum class Domain { generic, aerial, target };

std::string to_string(Domain d);
Domain parse_domain(const std::string& s);

struct SynthRef {
    Domain domain = Domain::aerial;
    uint64_t generator_seed = 0;
    int class_index = 0;
    int image_index = 0;
    int size = 32;

    std::string str() const;
};

bool is_synthetic_ref(const std::string& ref);
SynthRef parse_ref(const std::string& ref);

Image render(const SynthRef& ref);
Image render(const std::string& ref);

struct SynthConfig {
    uint64_t generator_seed = 0;
    int images_per_class = 200;
    int image_size = 36;
};

int num_classes(Domain d);
std::vector<std::string> class_names(Domain d);

// Aerial classes that also exist in the target domain.
std::vector<std::string> shared_class_names();

// Dataset ids are synth_<domain>_g<generator_seed>; each domain is its own family.
data::DatasetManifest make_manifest(Domain d, const SynthConfig& config);

}  // namespace xfer::synthetic
