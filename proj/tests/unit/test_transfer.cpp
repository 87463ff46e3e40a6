// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "xfer/run_ledger.hpp"
#include "xfer/transfer.hpp"

namespace xfer::transfer {
namespace {

using zoo::LineageStage;
using zoo::Objective;
using zoo::StageKind;

zoo::Checkpoint pretrained(std::vector<LineageStage> stages, int input_channels = 3, uint64_t seed = 1) {
    zoo::Model<float> m({zoo::Architecture::toy_conv, input_channels, seed}, {2, zoo::OutputMode::exclusive});
    for (auto& s : stages) m.lineage().append(s);
    return zoo::make_checkpoint(m, false);
}

LineageStage imagenet(Objective o = Objective::supervised) { return {"imagenet1k", o, StageKind::pretrain, "imagenet1k"}; }

data::DatasetManifest relabel(const data::DatasetManifest& m, const std::string& id, const std::string& family,
                              data::LabelMode mode = data::LabelMode::single_label) {
    return data::DatasetManifest(id, mode, m.classes(), m.records(), m.metadata(), family);
}

StageOptions small(const ImageStore& store) {
    StageOptions o;
    o.store = &store;
    o.resize_edge = 16;
    o.crop_edge = 12;
    return o;
}

train::ScheduleSpec tiny_schedule() {
    auto s = train::ScheduleSpec::finetune().scaled_to(4);
    s.batch_size = 4;
    return s;
}

nn::Tensor<float> one_hot(const std::vector<int>& labels, int classes) {
    nn::Tensor<float> f({static_cast<int>(labels.size()), classes});
    for (size_t i = 0; i < labels.size(); ++i) f.data[i * static_cast<size_t>(classes) + static_cast<size_t>(labels[i])] = 1.0f;
    return f;
}

TEST(Probe, ParameterCount) {
    LinearProbe p(2048, {21, zoo::OutputMode::exclusive}, 0);
    EXPECT_EQ(p.parameter_count(), 43029u);
    EXPECT_EQ(p.parameter_count(), 2048u * 21 + 21);
}

TEST(Probe, OneHotFeaturesFitPerfectly) {
    std::vector<int> labels;
    std::vector<std::vector<int>> sets;
    for (int i = 0; i < 50; ++i) {
        labels.push_back(i % 5);
        sets.push_back({i % 5});
    }
    auto probe = train_linear_probe(one_hot(labels, 5), sets, {5, zoo::OutputMode::exclusive}, 3, {0.05, 100, 100});
    EXPECT_EQ(metrics::accuracy(probe.predict(one_hot(labels, 5), sets)), 1.0);
    EXPECT_EQ(probe.epoch_losses().size(), 100u);
    EXPECT_LT(probe.epoch_losses().back(), probe.epoch_losses().front());
}

TEST(Probe, Errors) {
    const std::vector<std::vector<int>> three = {{0}, {1}, {0}};
    EXPECT_THROW(train_linear_probe(one_hot({0, 1}, 2), three, {2, zoo::OutputMode::exclusive}, 0), ConfigError);
    EXPECT_THROW(train_linear_probe(one_hot({0, 1, 0}, 2), {{0}, {5}, {0}}, {2, zoo::OutputMode::exclusive}, 0),
                 ConfigError);
    EXPECT_THROW(ProbeSpec({0.0, 100, 100}).validate(), ConfigError);
}

TEST(Probe, DeterministicForFixedSeed) {
    Rng rng(4);
    nn::Tensor<float> f({30, 8});
    for (auto& v : f.data) v = static_cast<float>(rng.normal());
    std::vector<std::vector<int>> labels;
    for (int i = 0; i < 30; ++i) labels.push_back({i % 3});
    const zoo::HeadSpec head{3, zoo::OutputMode::exclusive};
    auto a = train_linear_probe(f, labels, head, 9);
    auto b = train_linear_probe(f, labels, head, 9);
    EXPECT_EQ(a.logits(f), b.logits(f));
    EXPECT_EQ(a.epoch_losses(), b.epoch_losses());
}

TEST(Probe, IndependentHeadGivesSigmoidScores) {
    const std::vector<std::vector<int>> sets = {{0, 1}, {1}, {0}, {0, 1}};
    nn::Tensor<float> f({4, 2});
    f.data = {1, 1, 0, 1, 1, 0, 1, 1};
    auto probe = train_linear_probe(f, sets, {2, zoo::OutputMode::independent}, 0, {0.05, 200, 4});
    EXPECT_EQ(metrics::f1_multilabel(probe.predict(f, sets)), 1.0);
}

TEST(FineTune, LineageAndWidth) {
    fixtures::MemoryStore store;
    const auto ucm = fixtures::two_class_set(store, 6, 16, 1, "ucm");
    const auto ckpt = pretrained({imagenet()});
    auto model = fine_tune(ckpt, ucm, head_for(ucm), tiny_schedule(), 0, small(store));
    ASSERT_EQ(model.lineage().size(), 2u);
    EXPECT_EQ(model.lineage().stages()[0], imagenet());
    EXPECT_EQ(model.lineage().stages()[1].dataset_id, "ucm");
    EXPECT_EQ(model.lineage().stages()[1].stage_kind, StageKind::finetune);
    EXPECT_EQ(model.lineage().stages()[1].objective, Objective::supervised);
    EXPECT_EQ(model.head_spec().num_classes, 2);
    EXPECT_NE(model.backbone_checksum(), zoo::model_from_checkpoint<float>(ckpt, head_for(ucm)).backbone_checksum());
}

TEST(FineTune, RejectsTargetInLineage) {
    fixtures::MemoryStore store;
    const auto base = fixtures::two_class_set(store, 6, 16, 1, "m");
    const auto ckpt = pretrained({imagenet(), {"mlrsnet_multi", Objective::supervised, StageKind::domain_adapt, "mlrsnet"}});
    EXPECT_THROW(fine_tune(ckpt, relabel(base, "mlrsnet_single", "mlrsnet"), head_for(base), tiny_schedule(), 0,
                           small(store)),
                 SourceTargetViolation);
    EXPECT_THROW(fine_tune(ckpt, relabel(base, "imagenet1k", "imagenet1k"), head_for(base), tiny_schedule(), 0,
                           small(store)),
                 SourceTargetViolation);
}

TEST(DomainAdapt, SupervisedChain) {
    fixtures::MemoryStore store;
    const auto indomain = relabel(fixtures::two_class_set(store, 6, 16, 2, "mlrsnet_single"), "mlrsnet_single", "mlrsnet");
    const auto out = domain_adapt(pretrained({imagenet()}), indomain, head_for(indomain), tiny_schedule(), 0, small(store));
    EXPECT_FALSE(out.has_head());
    ASSERT_EQ(out.lineage.size(), 2u);
    EXPECT_EQ(out.lineage.stages()[0], imagenet());
    EXPECT_EQ(out.lineage.stages()[1],
              (LineageStage{"mlrsnet_single", Objective::supervised, StageKind::domain_adapt, "mlrsnet"}));

    // second adaptation on the same dataset collides with the lineage
    EXPECT_THROW(domain_adapt(out, indomain, head_for(indomain), tiny_schedule(), 1, small(store)),
                 SourceTargetViolation);
}

TEST(DomainAdapt, SelfSupervisedMultiLabelChain) {
    fixtures::MemoryStore store;
    const auto base = fixtures::two_class_set(store, 6, 16, 3, "mlrsnet_multi");
    const auto indomain = relabel(base, "mlrsnet_multi", "mlrsnet", data::LabelMode::multi_label);
    const auto out = domain_adapt(pretrained({imagenet(Objective::self_supervised_external)}), indomain,
                                  head_for(indomain), tiny_schedule(), 0, small(store));
    EXPECT_EQ(head_for(indomain).output_mode, zoo::OutputMode::independent);
    ASSERT_EQ(out.lineage.size(), 2u);
    EXPECT_EQ(out.lineage.stages()[0].objective, Objective::self_supervised_external);
    EXPECT_EQ(out.lineage.stages()[1].dataset_id, "mlrsnet_multi");
    EXPECT_EQ(out.lineage.stages()[1].stage_kind, StageKind::domain_adapt);
}

TEST(DomainAdapt, NeedsPretrainedBackbone) {
    fixtures::MemoryStore store;
    const auto indomain = fixtures::two_class_set(store, 6, 16, 2, "aerial");
    EXPECT_THROW(domain_adapt(pretrained({}), indomain, head_for(indomain), tiny_schedule(), 0, small(store)),
                 ConfigError);
    EXPECT_THROW(domain_adapt(pretrained({{"x", Objective::supervised, StageKind::finetune, "x"}}), indomain,
                              head_for(indomain), tiny_schedule(), 0, small(store)),
                 ConfigError);
}

class TransferRun : public ::testing::Test {
protected:
    void SetUp() override {
        target = fixtures::two_class_set(store, 20, 16, 5, "ucm");
        zoo::save_checkpoint(pretrained({imagenet()}), dir / "src.ckpt");
        options.stage = small(store);
        options.bootstrap = {200, 2.5, 97.5, 1};
        options.finetune_schedule = tiny_schedule();
        // 8 training images: the default probe rate needs far more steps
        options.probe = {0.05, 200, 4};
    }

    fixtures::TempDir dir;
    fixtures::MemoryStore store;
    data::DatasetManifest target{"t", data::LabelMode::single_label, {"a"}, {}};
    TransferOptions options;
};

TEST_F(TransferRun, FeatureExtractionOnSeparableTarget) {
    options.ledger = dir / "ledger.jsonl";
    const TransferPlan plan{dir / "src.ckpt", "ucm", TransferMode::feature_extraction, 3, 4};
    const auto out = run_transfer_experiment(plan, target, options);
    EXPECT_EQ(out.report.point, 1.0);
    EXPECT_EQ(out.report.ci_low, 1.0);
    EXPECT_EQ(out.report.ci_high, 1.0);
    EXPECT_EQ(out.report.n_test, 32u);
    EXPECT_EQ(out.backbone_checksum_before, out.backbone_checksum_after);
    EXPECT_EQ(out.lineage_after, out.lineage_before);
    EXPECT_EQ(out.ledger_entry.at("n_train"), 8);
    const auto entries = experiment::RunLedger(dir / "ledger.jsonl").entries();
    ASSERT_EQ(entries.size(), 1u);
    EXPECT_EQ(entries[0].at("config_hash"), out.config_hash);
    EXPECT_EQ(entries[0].at("seeds").at("split"), 3);

    const auto again = run_transfer_experiment(plan, target, options);
    EXPECT_EQ(again.config_hash, out.config_hash);
    EXPECT_EQ(again.report.cell(), out.report.cell());
}

TEST_F(TransferRun, FineTuneChangesBackboneAndAddsOneStage) {
    const TransferPlan plan{dir / "src.ckpt", "ucm", TransferMode::fine_tune, 3, 4};
    const auto out = run_transfer_experiment(plan, target, options);
    EXPECT_NE(out.backbone_checksum_before, out.backbone_checksum_after);
    ASSERT_EQ(out.lineage_after.size(), out.lineage_before.size() + 1);
    EXPECT_EQ(out.lineage_after.stages().back().stage_kind, StageKind::finetune);
}

TEST_F(TransferRun, RejectsSourceEqualTarget) {
    zoo::save_checkpoint(pretrained({imagenet(), {"ucm", Objective::supervised, StageKind::domain_adapt, "ucm"}}),
                         dir / "ucm.ckpt");
    options.ledger = dir / "ledger.jsonl";
    const TransferPlan plan{dir / "ucm.ckpt", "ucm", TransferMode::feature_extraction, 0, 0};
    EXPECT_THROW(run_transfer_experiment(plan, target, options), SourceTargetViolation);
    EXPECT_FALSE(std::filesystem::exists(dir / "ledger.jsonl"));
    const TransferPlan mismatch{dir / "src.ckpt", "other", TransferMode::feature_extraction, 0, 0};
    EXPECT_THROW(run_transfer_experiment(mismatch, target, options), ConfigError);
}

TEST(Plan, Validation) {
    zoo::ModelLineage l({imagenet(), {"resisc45", Objective::supervised, StageKind::domain_adapt, "resisc45"}});
    EXPECT_NO_THROW(validate_plan({"x", "ucm", TransferMode::fine_tune, 0, 0}, l));
    EXPECT_THROW(validate_plan({"x", "resisc45", TransferMode::fine_tune, 0, 0}, l), SourceTargetViolation);
    EXPECT_THROW(validate_plan({"x", "", TransferMode::fine_tune, 0, 0}, l), ConfigError);
    EXPECT_EQ(parse_transfer_mode("fe"), TransferMode::feature_extraction);
    EXPECT_EQ(parse_transfer_mode("ft"), TransferMode::fine_tune);
    EXPECT_THROW(parse_transfer_mode("lp"), ConfigError);
}

}  // namespace
}  // namespace xfer::transfer
