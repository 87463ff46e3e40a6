// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "xfer/errors.hpp"
#include "xfer/synthetic.hpp"

namespace xfer::synthetic {
namespace {

TEST(Synthetic, ClassCounts) {
    EXPECT_EQ(num_classes(Domain::generic), 21);
    EXPECT_EQ(num_classes(Domain::aerial), 16);
    EXPECT_EQ(num_classes(Domain::target), 8);
    EXPECT_EQ(shared_class_names().size(), 6u);
    const auto aerial = class_names(Domain::aerial);
    const auto target = class_names(Domain::target);
    for (const auto& s : shared_class_names()) {
        EXPECT_NE(std::find(aerial.begin(), aerial.end(), s), aerial.end()) << s;
        EXPECT_NE(std::find(target.begin(), target.end(), s), target.end()) << s;
    }
    int novel = 0;
    for (const auto& t : target) novel += std::find(aerial.begin(), aerial.end(), t) == aerial.end();
    EXPECT_EQ(novel, 2);
    for (auto d : {Domain::generic, Domain::aerial, Domain::target}) {
        const auto names = class_names(d);
        EXPECT_EQ(std::set<std::string>(names.begin(), names.end()).size(), names.size());
    }
}

TEST(Synthetic, RefRoundTrip) {
    SynthRef r{Domain::target, 77, 5, 123, 40};
    const std::string s = r.str();
    EXPECT_TRUE(is_synthetic_ref(s));
    const SynthRef back = parse_ref(s);
    EXPECT_EQ(back.domain, r.domain);
    EXPECT_EQ(back.generator_seed, 77u);
    EXPECT_EQ(back.class_index, 5);
    EXPECT_EQ(back.image_index, 123);
    EXPECT_EQ(back.size, 40);
    EXPECT_FALSE(is_synthetic_ref("images/a.png"));
    EXPECT_THROW(parse_ref("synth://aerial/1/2/3"), ConfigError);
    EXPECT_THROW(parse_ref("synth://aerial/1/99/3?size=32"), ConfigError);
    EXPECT_THROW(parse_ref("synth://sky/1/2/3?size=32"), ConfigError);
    EXPECT_THROW(parse_domain("sky"), ConfigError);
}

TEST(Synthetic, RenderIsDeterministicAndInRange) {
    for (auto d : {Domain::generic, Domain::aerial, Domain::target}) {
        const SynthRef r{d, 3, 1, 7, 24};
        const Image a = render(r);
        const Image b = render(r.str());
        EXPECT_EQ(a.height, 24);
        EXPECT_EQ(a.width, 24);
        EXPECT_EQ(a.channels, 3);
        EXPECT_EQ(a.pixels, b.pixels);
        for (float p : a.pixels) {
            ASSERT_TRUE(std::isfinite(p));
            ASSERT_GE(p, 0.0f);
            ASSERT_LE(p, 1.0f);
        }
        SynthRef other = r;
        other.image_index = 8;
        EXPECT_NE(render(other).pixels, a.pixels);
    }
}

TEST(Synthetic, Manifests) {
    const SynthConfig cfg{4, 5, 20};
    const auto m = make_manifest(Domain::aerial, cfg);
    EXPECT_EQ(m.dataset_id(), "synth_aerial_g4");
    EXPECT_EQ(m.num_classes(), 16u);
    EXPECT_EQ(m.size(), 80u);
    for (const auto& rec : m.records()) {
        const auto r = parse_ref(rec.image_ref);
        EXPECT_EQ(r.class_index, rec.labels.at(0));
        EXPECT_EQ(r.size, 20);
    }
    EXPECT_NE(make_manifest(Domain::target, cfg).family(), m.family());
    EXPECT_THROW(make_manifest(Domain::aerial, SynthConfig{0, 0, 20}), ConfigError);
}

}  // namespace
}  // namespace xfer::synthetic
