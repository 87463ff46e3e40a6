// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "xfer/dataset_registry.hpp"

namespace xfer::data {
namespace {

DatasetManifest parse(const std::string& text) {
    std::istringstream in(text);
    return parse_manifest(in, "test");
}

DatasetManifest uniform_manifest(int classes, int per_class) {
    std::vector<std::string> names;
    std::vector<ImageRecord> records;
    for (int c = 0; c < classes; ++c) {
        names.push_back("c" + std::to_string(c));
        for (int i = 0; i < per_class; ++i) records.push_back({"c" + std::to_string(c) + "/" + std::to_string(i), {c}});
    }
    return DatasetManifest("uniform", LabelMode::single_label, names, records);
}

std::set<std::string> refs(const DatasetManifest& m) {
    std::set<std::string> out;
    for (const auto& r : m.records()) out.insert(r.image_ref);
    return out;
}

TEST(Manifest, ParsesThreeLineFile) {
    const auto m = parse("#dataset_id=tiny;label_mode=single_label;classes=cat,dog\n"
                         "a.png\t0\nb.png\t1\nc.png\t0\n");
    EXPECT_EQ(m.dataset_id(), "tiny");
    EXPECT_EQ(m.size(), 3u);
    EXPECT_EQ(m.num_classes(), 2u);
    EXPECT_EQ(m.label_mode(), LabelMode::single_label);
    EXPECT_EQ(m.classes(), (std::vector<std::string>{"cat", "dog"}));
}

TEST(Manifest, MultiLabelRecordsKeepEveryLabel) {
    const auto m = parse("#dataset_id=ml;label_mode=multi_label;classes=a,b,c\nx.png\t2,0\ny.png\t1\n");
    EXPECT_EQ(m.records()[0].labels, (std::vector<int>{0, 2}));
    EXPECT_EQ(m.records()[0].primary_label(), 0);
}

TEST(Manifest, RejectsInvalidFiles) {
    const std::string head = "#dataset_id=t;label_mode=single_label;classes=a,b\n";
    EXPECT_THROW(parse(head + "a.png\t99\n"), ManifestError);
    EXPECT_THROW(parse(head + "a.png\t0\na.png\t1\n"), ManifestError);
    EXPECT_THROW(parse(head + "a.png\t0,1\n"), ManifestError);
    EXPECT_THROW(parse(head + "a.png\t\n"), ManifestError);
    EXPECT_THROW(parse(head + "a.png\n"), ManifestError);
    EXPECT_THROW(parse("#dataset_id=t;label_mode=single_label;classes=a,a\nx\t0\n"), ManifestError);
    EXPECT_THROW(parse("dataset_id=t;label_mode=single_label;classes=a\n"), ManifestError);
    EXPECT_THROW(parse(""), ManifestError);
    EXPECT_THROW(parse("#dataset_id=t;label_mode=weird;classes=a\n"), ManifestError);
    EXPECT_THROW(parse("#dataset_id=t;label_mode=multi_label;classes=a\nx\t-1\n"), ManifestError);
}

TEST(Manifest, WriteParseRoundTrip) {
    Rng rng(4);
    for (auto mode : {LabelMode::single_label, LabelMode::multi_label}) {
        const auto m = fixtures::random_manifest(rng, {2, 6, 1, 9, mode});
        std::ostringstream out;
        write_manifest(out, m);
        EXPECT_EQ(parse(out.str()), m);
    }
}

TEST(Manifest, UcmShape) {
    const auto ucm = fixtures::mock_ucm();
    EXPECT_EQ(ucm.size(), 2100u);
    EXPECT_EQ(ucm.num_classes(), 21u);
    EXPECT_EQ(ucm.label_mode(), LabelMode::single_label);
}

TEST(Fraction, ParsesEverySpelling) {
    for (const char* s : {"0.8", "4/5", "80%", "8/10"}) {
        const auto f = Fraction::parse(s);
        EXPECT_EQ(f.floor_times(10), 8) << s;
        EXPECT_EQ(f.floor_times(7), 5) << s;
    }
    EXPECT_EQ(Fraction::parse("0.2").floor_times(10), 2);
    for (const char* s : {"0", "1", "1.5", "-0.2", "abc", "3/0", ""}) EXPECT_THROW(Fraction::parse(s), ConfigError) << s;
}

TEST(Split, PresetFractions) {
    EXPECT_EQ(SplitSpec::source(0).train_fraction.floor_times(10), 8);
    EXPECT_EQ(SplitSpec::target(0).train_fraction.floor_times(10), 2);
}

TEST(Split, TenPerClass) {
    const auto m = uniform_manifest(5, 10);
    for (auto [spec, n_train] : {std::pair{SplitSpec::source(1), 8}, std::pair{SplitSpec::target(1), 2}}) {
        const auto s = stratified_split(m, spec);
        const auto train_counts = s.train.primary_class_counts();
        const auto test_counts = s.test.primary_class_counts();
        for (size_t c = 0; c < 5; ++c) {
            EXPECT_EQ(train_counts[c], static_cast<size_t>(n_train));
            EXPECT_EQ(test_counts[c], static_cast<size_t>(10 - n_train));
        }
    }
}

TEST(Split, PropertyAgainstOracle) {
    Rng gen(2024);
    for (int trial = 0; trial < 60; ++trial) {
        const auto mode = trial % 3 == 0 ? LabelMode::multi_label : LabelMode::single_label;
        const auto m = fixtures::random_manifest(gen, {2, 12, 5, 60, mode});
        const Fraction f = trial % 2 ? Fraction{4, 5} : Fraction{1, 5};
        const SplitSpec spec{f, gen.next(), SplitRole::source};
        const auto s = stratified_split(m, spec);
        EXPECT_EQ(oracle::check_split(m, s.train, s.test, f.num, f.den), "") << "trial " << trial;
        const auto again = stratified_split(m, spec);
        EXPECT_EQ(again.train, s.train);
        EXPECT_EQ(again.test, s.test);
    }
}

TEST(Split, SeedChangesMembershipNotCounts) {
    const auto m = uniform_manifest(4, 50);
    const auto a = stratified_split(m, SplitSpec::source(1));
    const auto b = stratified_split(m, SplitSpec::source(2));
    EXPECT_NE(refs(a.train), refs(b.train));
    EXPECT_EQ(a.train.primary_class_counts(), b.train.primary_class_counts());
}

TEST(Split, SplitIsIndependentOfInputOrder) {
    auto m = uniform_manifest(3, 20);
    auto records = m.records();
    std::reverse(records.begin(), records.end());
    const DatasetManifest reversed(m.dataset_id(), m.label_mode(), m.classes(), records);
    EXPECT_EQ(refs(stratified_split(m, SplitSpec::source(9)).train),
              refs(stratified_split(reversed, SplitSpec::source(9)).train));
}

TEST(Split, RejectsClassesTooSmallForBothSides) {
    EXPECT_THROW(stratified_split(uniform_manifest(2, 1), SplitSpec::source(0)), ConfigError);
    // floor(0.2 * 4) = 0 leaves the target train side empty
    EXPECT_THROW(stratified_split(uniform_manifest(2, 4), SplitSpec::target(0)), ConfigError);
}

TEST(Subset, NormalizeClassName) {
    EXPECT_EQ(normalize_class_name("  Dense Residential-Area "), "dense_residential_area");
    EXPECT_EQ(normalize_class_name("river"), "river");
}

TEST(Subset, MatchedClassesEqualHandList) {
    const auto m = fixtures::mock_mlrsnet();
    EXPECT_EQ(matched_classes(m, fixtures::ucm_reference_classes()), fixtures::expected_shared_classes());
}

TEST(Subset, MlrsnetCounts) {
    const auto m = fixtures::mock_mlrsnet();
    ASSERT_EQ(m.size(), 109161u);
    const auto ref = fixtures::ucm_reference_classes();
    const auto same = build_subset(m, {SubsetMode::same_classes, ref, 0});
    const auto diff = build_subset(m, {SubsetMode::different_classes, ref, 0});
    const auto half = build_subset(m, {SubsetMode::all_classes_half_images, {}, 0});
    EXPECT_EQ(same.size(), 50197u);
    EXPECT_EQ(diff.size(), 58964u);
    EXPECT_EQ(half.size(), 54573u);
    EXPECT_EQ(same.num_classes(), 17u);
    EXPECT_EQ(diff.num_classes(), 29u);
    EXPECT_EQ(half.num_classes(), 46u);
}

TEST(Subset, HalfIsPerClassFloorAndSeeded) {
    const auto m = fixtures::mock_mlrsnet();
    const auto counts = fixtures::mock_mlrsnet_counts();
    const auto a = build_subset(m, {SubsetMode::all_classes_half_images, {}, 3});
    const auto b = build_subset(m, {SubsetMode::all_classes_half_images, {}, 3});
    const auto c = build_subset(m, {SubsetMode::all_classes_half_images, {}, 4});
    EXPECT_EQ(a, b);
    EXPECT_NE(refs(a), refs(c));
    const auto got = a.primary_class_counts();
    for (size_t k = 0; k < counts.size(); ++k) EXPECT_EQ(got[k], counts[k] / 2);
}

TEST(Subset, ComplementProperty) {
    Rng gen(77);
    for (int trial = 0; trial < 40; ++trial) {
        const auto mode = trial % 2 ? LabelMode::multi_label : LabelMode::single_label;
        const auto m = fixtures::random_manifest(gen, {3, 15, 1, 30, mode});
        std::vector<std::string> ref;
        for (const auto& c : m.classes()) {
            if (gen.bernoulli(0.5)) ref.push_back(c);
        }
        if (ref.empty()) ref.push_back(m.classes().front());
        if (ref.size() == m.num_classes()) ref.pop_back();
        const auto same = build_subset(m, {SubsetMode::same_classes, ref, 0});
        const auto diff = build_subset(m, {SubsetMode::different_classes, ref, 0});
        const auto s = refs(same), d = refs(diff);
        std::vector<std::string> both;
        std::set_intersection(s.begin(), s.end(), d.begin(), d.end(), std::back_inserter(both));
        EXPECT_TRUE(both.empty());
        std::set<std::string> all = s;
        all.insert(d.begin(), d.end());
        EXPECT_EQ(all, refs(m));
        EXPECT_EQ(same.size() + diff.size(), m.size());
    }
}

TEST(Subset, Errors) {
    const auto m = uniform_manifest(3, 4);
    EXPECT_THROW(build_subset(m, {SubsetMode::same_classes, {}, 0}), ConfigError);
    EXPECT_THROW(build_subset(m, {SubsetMode::same_classes, {"nothing_like_it"}, 0}), ConfigError);
    EXPECT_THROW(build_subset(m, {SubsetMode::different_classes, {"c0", "c1", "c2"}, 0}), ConfigError);
    EXPECT_THROW(build_subset(uniform_manifest(2, 1), {SubsetMode::all_classes_half_images, {}, 0}), ConfigError);
}

DatasetManifest named(std::vector<std::string> classes) {
    std::vector<ImageRecord> records;
    for (size_t c = 0; c < classes.size(); ++c) records.push_back({"r" + std::to_string(c), {static_cast<int>(c)}});
    return DatasetManifest("n", LabelMode::single_label, classes, records);
}

TEST(Overlap, Examples) {
    EXPECT_DOUBLE_EQ(class_overlap(named({"a", "b"}), named({"b", "a"})).jaccard, 1.0);
    EXPECT_DOUBLE_EQ(class_overlap(named({"a", "b"}), named({"c"})).jaccard, 0.0);
    const auto o = class_overlap(named({"a", "b", "c"}), named({"b", "c", "d"}));
    EXPECT_DOUBLE_EQ(o.jaccard, 0.5);
    EXPECT_EQ(o.shared, (std::vector<std::string>{"b", "c"}));
    EXPECT_EQ(o.only_a, (std::vector<std::string>{"a"}));
    EXPECT_EQ(o.only_b, (std::vector<std::string>{"d"}));
}

TEST(Overlap, Symmetric) {
    Rng gen(5);
    const std::vector<std::string> pool = {"a", "b", "c", "d", "e", "f", "g", "h"};
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> x, y;
        for (const auto& n : pool) {
            if (gen.bernoulli(0.5)) x.push_back(n);
            if (gen.bernoulli(0.5)) y.push_back(n);
        }
        if (x.empty() || y.empty()) continue;
        const auto ab = class_overlap(named(x), named(y));
        const auto ba = class_overlap(named(y), named(x));
        EXPECT_EQ(ab.jaccard, ba.jaccard);
        EXPECT_EQ(ab.shared, ba.shared);
        EXPECT_EQ(ab.only_a, ba.only_b);
    }
}

TEST(Overlap, MlrsnetAgainstUcm) {
    const auto o = class_overlap(fixtures::mock_mlrsnet(), fixtures::mock_ucm());
    // mock UCM names run words together, so only single-word classes match
    for (const auto& s : o.shared) {
        EXPECT_EQ(s.find('_'), std::string::npos) << s;
    }
}

TEST(Catalog, KnownDatasets) {
    EXPECT_EQ(catalog_entry("mlrsnet").size, 109161u);
    EXPECT_EQ(catalog_entry("mlrsnet").num_classes, (std::vector<int>{46, 60}));
    EXPECT_EQ(catalog_entry("resisc45").size, 31500u);
    EXPECT_EQ(catalog_entry("patternnet").size, 30400u);
    EXPECT_EQ(catalog_entry("rsi_cb").size, 24000u);
    EXPECT_EQ(catalog_entry("aid").size, 10000u);
    EXPECT_EQ(catalog_entry("aid").image_size, 600);
    EXPECT_EQ(catalog_entry("ucm").size, 2100u);
    EXPECT_EQ(catalog_entry("ucm").num_classes, (std::vector<int>{21}));
    EXPECT_THROW(catalog_entry("nope"), std::exception);
}

}  // namespace
}  // namespace xfer::data
