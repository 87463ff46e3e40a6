// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "xfer/experiment.hpp"

namespace xfer::experiment {
namespace {

using nlohmann::json;

TEST(Config, HashIgnoresKeyOrderAndNumberSpelling) {
    const auto a = config_from_json(yaml_to_json(R"(
id: fe1
kind: transfer
source: {checkpoint: a.ckpt, lineage: [imagenet1k]}
target: ucm.tsv
mode: fe
probe: {lr: 0.001, epochs: 100}
seeds: {split: 3, train: 4}
)"));
    const auto b = config_from_json(yaml_to_json(R"(
seeds: {train: 4.0, split: 3}
probe: {epochs: 1.0e2, lr: 1e-3}
mode: fe
target: ucm.tsv
source: {lineage: [imagenet1k], checkpoint: a.ckpt}
kind: transfer
id: fe1
)"));
    EXPECT_EQ(config_hash(a), config_hash(b));
    auto c = a;
    c.train_seed = 5;
    EXPECT_NE(config_hash(c), config_hash(a));
    auto d = a;
    d.probe.lr = 2e-3;
    EXPECT_NE(config_hash(d), config_hash(a));
}

TEST(Config, DefaultsAndPresets) {
    const auto fe = config_from_json(json{{"id", "x"}, {"kind", "transfer"}, {"source", "s.ckpt"}, {"target", "t.tsv"}});
    EXPECT_EQ(fe.mode, transfer::TransferMode::feature_extraction);
    EXPECT_EQ(fe.probe, transfer::ProbeSpec{});
    EXPECT_EQ(fe.bootstrap_replicates, 1000);
    EXPECT_EQ(fe.resize_edge, 292);
    EXPECT_EQ(fe.crop_edge, 256);
    const auto pre = config_from_json(json{{"id", "p"}, {"kind", "pretrain"}, {"dataset", "d.tsv"}});
    EXPECT_EQ(pre.schedule, train::ScheduleSpec::scratch());
    const auto ada = config_from_json(
        json{{"id", "a"}, {"kind", "adapt"}, {"source", "s.ckpt"}, {"dataset", "d.tsv"}, {"schedule", {{"epochs", 20}}}});
    EXPECT_EQ(ada.schedule, train::ScheduleSpec::finetune().scaled_to(20));
    EXPECT_EQ(std::filesystem::path(ada.output_path()).lexically_normal(), "a.ckpt");
}

TEST(Config, RejectsBadInput) {
    const json base{{"id", "x"}, {"kind", "transfer"}, {"source", "s.ckpt"}, {"target", "t.tsv"}};
    auto typo = base;
    typo["moed"] = "fe";
    EXPECT_THROW(config_from_json(typo), ConfigError);
    auto mode = base;
    mode["mode"] = "both";
    EXPECT_THROW(config_from_json(mode), ConfigError);
    auto no_target = base;
    no_target.erase("target");
    EXPECT_THROW(config_from_json(no_target), ConfigError);
    auto seed = base;
    seed["seeds"] = {{"split", 1.5}};
    EXPECT_THROW(config_from_json(seed), ConfigError);
    EXPECT_THROW(config_from_json(json{{"kind", "transfer"}}), ConfigError);
}

TEST(Config, CanonicalFormRoundTrips) {
    const auto a = config_from_json(json{{"id", "ft"},
                                         {"kind", "transfer"},
                                         {"source", {{"checkpoint", "s.ckpt"}, {"label", "ImageNet-1k"}}},
                                         {"target", "t.tsv"},
                                         {"mode", "ft"},
                                         {"schedule", {{"preset", "finetune"}, {"epochs", 10}, {"batch_size", 20}}}});
    const auto b = config_from_json(config_to_json(a));
    EXPECT_EQ(config_hash(a), config_hash(b));
    EXPECT_EQ(b.schedule.batch_size, 20);
    EXPECT_EQ(b.source.label, "ImageNet-1k");
}

TEST(Yaml, ScalarTyping) {
    const json j = yaml_to_json("a: 12\nb: '12'\nc: 1e-3\nd: true\ne: ~\nf: fe\ng: [1, x]\n");
    EXPECT_TRUE(j["a"].is_number_integer());
    EXPECT_TRUE(j["b"].is_string());
    EXPECT_TRUE(j["c"].is_number_float());
    EXPECT_EQ(j["c"].get<double>(), 1e-3);
    EXPECT_TRUE(j["d"].is_boolean());
    EXPECT_TRUE(j["e"].is_null());
    EXPECT_EQ(j["f"], "fe");
    EXPECT_EQ(j["g"], json({1, "x"}));
    EXPECT_THROW(yaml_to_json("a: 1\na: 2\n"), ConfigError);
    EXPECT_THROW(yaml_to_json("a: [1, 2\n"), ConfigError);
}

TEST(Canonical, HashHelpers) {
    EXPECT_EQ(canonical_dump(json::parse(R"({"b": 2.0, "a": [1, 2.5]})")), R"({"a":[1,2.5],"b":2})");
    EXPECT_EQ(config_hash(json::parse(R"({"x": 1, "y": 2})")), config_hash(json::parse(R"({"y": 2.0, "x": 1})")));
}

// Small end-to-end fixture: a generic set, a target set, both served from memory.
class SuiteRun : public ::testing::Test {
protected:
    void SetUp() override {
        data::save_manifest(dir / "gen.tsv", fixtures::two_class_set(store, 10, 16, 1, "gen"));
        data::save_manifest(dir / "tgt.tsv", fixtures::two_class_set(store, 20, 16, 2, "tgt"));
        options.ledger = dir / "ledger.jsonl";
        options.store = &store;
    }

    Suite suite(const std::string& configs) {
        const std::string text = R"(
suite: toy
defaults:
  image: {resize: 16, crop: 12}
  bootstrap: {replicates: 50}
  probe: {epochs: 20}
configs:
)" + configs;
        return parse_suite(text, dir.path(), "suite.yaml");
    }

    fixtures::TempDir dir;
    fixtures::MemoryStore store;
    SuiteOptions options;
};

const char* kThreeConfigs = R"(
  - id: pre
    kind: pretrain
    backbone: toy_conv
    dataset: gen.tsv
    schedule: {preset: scratch, epochs: 4, batch_size: 8}
    output: pre.ckpt
  - id: fe
    kind: transfer
    source: {checkpoint: pre.ckpt, lineage: [gen], label: Generic}
    target: tgt.tsv
    mode: fe
  - id: ft
    kind: transfer
    source: {checkpoint: pre.ckpt, lineage: [gen], label: Generic}
    target: tgt.tsv
    mode: ft
    schedule: {epochs: 4, batch_size: 8}
)";

TEST_F(SuiteRun, ThreeConfigsThreeEntriesThenNone) {
    const auto s = suite(kThreeConfigs);
    ASSERT_EQ(s.entries.size(), 3u);
    for (const auto& e : s.entries) EXPECT_EQ(e.error, "") << e.experiment_id;
    const auto first = run_suite(s, options);
    EXPECT_EQ(first.count(RunStatus::completed), 3u);
    const RunLedger ledger(options.ledger);
    const auto entries = ledger.entries();
    ASSERT_EQ(entries.size(), 3u);
    EXPECT_EQ(entries[0]["lineage_after"].get<zoo::ModelLineage>().describe(), "gen(supervised,pretrain)");
    EXPECT_TRUE(std::filesystem::exists(dir / "pre.ckpt"));
    EXPECT_TRUE(std::filesystem::exists(dir / "pre.ckpt.log.jsonl"));
    for (const auto& e : entries) {
        for (const char* key : {"config_hash", "started_at", "finished_at", "lineage", "report", "seeds",
                                "framework_version", "artifacts"}) {
            EXPECT_TRUE(e.contains(key)) << key;
        }
    }

    const auto second = run_suite(suite(kThreeConfigs), options);
    EXPECT_EQ(second.count(RunStatus::skipped), 3u);
    EXPECT_EQ(ledger.entries().size(), 3u);

    auto forced = options;
    forced.force = true;
    EXPECT_EQ(run_suite(suite(kThreeConfigs), forced).count(RunStatus::completed), 3u);
    const auto after = ledger.entries();
    ASSERT_EQ(after.size(), 6u);
    // earlier lines are untouched
    for (size_t i = 0; i < 3; ++i) EXPECT_EQ(after[i], entries[i]);
}

TEST_F(SuiteRun, SourceEqualsTargetIsRejectedOthersComplete) {
    const std::string configs = std::string(kThreeConfigs) + R"(
  - id: self
    kind: transfer
    source: {checkpoint: pre.ckpt, lineage: [gen]}
    target: gen.tsv
  - id: typo
    kind: transfer
    sorce: pre.ckpt
    target: tgt.tsv
)";
    const auto s = suite(configs);
    ASSERT_EQ(s.entries.size(), 5u);
    EXPECT_NE(s.entries[3].error.find("gen"), std::string::npos) << s.entries[3].error;
    EXPECT_NE(s.entries[4].error, "");
    const auto r = run_suite(s, options);
    EXPECT_EQ(r.count(RunStatus::completed), 3u);
    EXPECT_EQ(r.count(RunStatus::rejected), 2u);
    EXPECT_EQ(r.runs[3].status, RunStatus::rejected);
    EXPECT_EQ(RunLedger(options.ledger).entries().size(), 3u);
}

TEST_F(SuiteRun, UndeclaredLineageIsCheckedWhenTheCheckpointAppears) {
    const auto s = suite(std::string(kThreeConfigs).substr(0, std::string(kThreeConfigs).find("  - id: fe")) + R"(
  - id: self_late
    kind: transfer
    source: pre.ckpt
    target: gen.tsv
)");
    ASSERT_EQ(s.entries[1].error, "");
    const auto r = run_suite(s, options);
    EXPECT_EQ(r.runs[0].status, RunStatus::completed);
    EXPECT_EQ(r.runs[1].status, RunStatus::rejected);
    EXPECT_EQ(RunLedger(options.ledger).entries().size(), 1u);
}

TEST_F(SuiteRun, DeclaredLineageMustMatchCheckpoint) {
    run_suite(suite(std::string(kThreeConfigs).substr(0, std::string(kThreeConfigs).find("  - id: fe"))), options);
    const auto s = suite(R"(
  - id: liar
    kind: transfer
    source: {checkpoint: pre.ckpt, lineage: [imagenet1k]}
    target: tgt.tsv
)");
    EXPECT_NE(s.entries[0].error.find("does not match"), std::string::npos) << s.entries[0].error;
}

TEST_F(SuiteRun, DuplicateIdsAndMissingManifests) {
    const auto s = suite(R"(
  - {id: a, kind: pretrain, dataset: gen.tsv}
  - {id: a, kind: pretrain, dataset: gen.tsv}
  - {id: b, kind: pretrain, dataset: nowhere.tsv}
)");
    EXPECT_EQ(s.entries[0].error, "");
    EXPECT_NE(s.entries[1].error.find("duplicate"), std::string::npos);
    EXPECT_NE(s.entries[2].error.find("not found"), std::string::npos);
    EXPECT_THROW(parse_suite("just a string", dir.path()), ConfigError);
}

TEST_F(SuiteRun, LedgerIsLocked) {
    const LedgerLock held(options.ledger);
    EXPECT_THROW(LedgerLock second(options.ledger), ConfigError);
    EXPECT_THROW(run_suite(suite(kThreeConfigs), options), ConfigError);
}

json entry(const std::string& source, const std::string& target, double point, const std::string& mode = "feature_extraction") {
    metrics::MetricReport r;
    r.metric = "accuracy";
    r.point = point;
    r.ci_low = point - 0.01;
    r.ci_high = point + 0.01;
    return json{{"config_hash", source + target + mode},
                {"kind", "transfer"},
                {"status", "completed"},
                {"source_label", source},
                {"target", target},
                {"mode", mode},
                {"report", r}};
}

TEST(Report, TwoByTwoHasOneBestPerColumn) {
    const std::vector<json> entries = {entry("A", "X", 0.90), entry("A", "Y", 0.80), entry("B", "X", 0.92),
                                       entry("B", "Y", 0.70)};
    const auto t = build_table(entries);
    ASSERT_EQ(t.rows, (std::vector<std::string>{"A", "B"}));
    ASSERT_EQ(t.columns, (std::vector<std::string>{"X", "Y"}));
    for (size_t c = 0; c < 2; ++c) {
        int best = 0, second = 0;
        for (size_t r = 0; r < 2; ++r) {
            best += t.cells[r][c].mark == CellMark::best;
            second += t.cells[r][c].mark == CellMark::second;
        }
        EXPECT_EQ(best, 1);
        EXPECT_EQ(second, 1);
    }
    EXPECT_EQ(t.cells[1][0].mark, CellMark::best);
    EXPECT_EQ(t.cells[0][1].mark, CellMark::best);
    const std::string text = render_table(t);
    EXPECT_NE(text.find("**92.00 (91.00, 93.00)**"), std::string::npos) << text;
    EXPECT_NE(text.find("__90.00 (89.00, 91.00)__"), std::string::npos) << text;
    const std::string md = render_table(t, TableFormat::markdown);
    EXPECT_NE(md.find("<u>90.00 (89.00, 91.00)</u>"), std::string::npos) << md;
    EXPECT_NE(md.find("\n| ---"), std::string::npos) << md;
    const std::string csv = render_table(t, TableFormat::csv);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "Source,X,Y");
}

TEST(Report, DiagonalRendersDash) {
    const std::vector<json> entries = {entry("X", "Y", 0.8), entry("Y", "X", 0.7)};
    TableSpec spec;
    spec.rows = {"X", "Y"};
    spec.columns = {"X", "Y"};
    const auto t = build_table(entries, spec);
    EXPECT_FALSE(t.cells[0][0].report);
    EXPECT_FALSE(t.cells[1][1].report);
    std::istringstream lines(render_table(t, TableFormat::csv));
    std::string header, row_x, row_y;
    std::getline(lines, header);
    std::getline(lines, row_x);
    std::getline(lines, row_y);
    EXPECT_EQ(row_x, "X,-,\"**80.00 (79.00, 81.00)**\"");
    EXPECT_EQ(row_y, "Y,\"**70.00 (69.00, 71.00)**\",-");
}

TEST(Report, SingleEntryIsBold) {
    const auto t = build_table({entry("A", "X", 0.5)});
    ASSERT_EQ(t.rows.size(), 1u);
    ASSERT_EQ(t.columns.size(), 1u);
    EXPECT_EQ(t.cells[0][0].mark, CellMark::best);
}

TEST(Report, LatestEntryWinsAndModeFilters) {
    const std::vector<json> entries = {entry("A", "X", 0.5), entry("A", "X", 0.6), entry("A", "X", 0.9, "fine_tune")};
    TableSpec fe;
    fe.mode = transfer::TransferMode::feature_extraction;
    const auto t = build_table(entries, fe);
    EXPECT_EQ(t.cells[0][0].report->point, 0.6);
    const auto all = build_table(entries);
    EXPECT_EQ(all.cells[0][0].report->point, 0.9);
}

TEST(Report, TiesGoToEarlierRow) {
    const auto t = build_table({entry("A", "X", 0.5), entry("B", "X", 0.5)});
    EXPECT_EQ(t.cells[0][0].mark, CellMark::best);
    EXPECT_EQ(t.cells[1][0].mark, CellMark::second);
}

TEST(Ledger, AppendOnlyAndFind) {
    fixtures::TempDir dir;
    const RunLedger ledger(dir / "l.jsonl");
    EXPECT_TRUE(ledger.entries().empty());
    ledger.append(json{{"config_hash", "h1"}, {"v", 1}});
    ledger.append(json{{"config_hash", "h2"}, {"v", 2}});
    EXPECT_TRUE(ledger.contains("h1"));
    EXPECT_FALSE(ledger.contains("h3"));
    EXPECT_EQ(ledger.find("h2")->at("v"), 2);
    EXPECT_THROW(ledger.append(json{{"v", 3}}), std::exception);
    std::ifstream in(dir / "l.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) ++n;
    EXPECT_EQ(n, 2);
}

}  // namespace
}  // namespace xfer::experiment
