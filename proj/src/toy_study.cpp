// SPDX-License-Identifier: Apache-2.0

#include "xfer/toy_study.hpp"

#include <fmt/format.h>

#include <chrono>
#include <optional>

#include "xfer/synthetic.hpp"

namespace xfer::study {

using nlohmann::json;

void to_json(json& j, const ToySeedResult& r) {
    j = json{{"seed", r.seed},
             {"generic_only", r.generic_only},
             {"scratch", r.scratch},
             {"da_full", r.da_full},
             {"da_same", r.da_same},
             {"da_different", r.da_different},
             {"seconds", r.seconds}};
}

void to_json(json& j, const ToyStudySummary& s) {
    j = json{{"generic_seconds", s.generic_seconds},
             {"seeds", s.seeds},
             {"da_beats_scratch", s.da_beats_scratch},
             {"mean_same", s.mean_same},
             {"mean_different", s.mean_different}};
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

class Context {
public:
    explicit Context(const ToyStudyConfig& config) : config_(config) {
        if (!config.store) own_.emplace(std::filesystem::path{}, true);
    }

    const ImageStore* store() const { return config_.store ? config_.store : &*own_; }

    void say(const std::string& msg) const {
        if (config_.log) config_.log(msg);
    }

    train::ScheduleSpec schedule(train::ScheduleSpec base, int epochs) const {
        base = base.scaled_to(epochs);
        base.batch_size = config_.batch_size;
        return base;
    }

    augment::TransformPipeline pipeline(uint64_t seed) const {
        return augment::TransformPipeline::train(derive_seed(seed, {fnv1a64("pipeline")}), config_.image_size,
                                                 config_.crop_edge);
    }

    // toy_conv trained from scratch; the checkpoint keeps no head.
    zoo::Checkpoint scratch(const data::DatasetManifest& m, int epochs, uint64_t seed) const {
        zoo::BackboneSpec spec;
        spec.architecture = zoo::Architecture::toy_conv;
        spec.seed = seed;
        zoo::Model<float> model(spec, transfer::head_for(m));
        train::TrainOptions opts;
        opts.store = store();
        const auto r = train::train(model, m, schedule(train::ScheduleSpec::scratch(), epochs), pipeline(seed),
                                    train::LossMode::exclusive_xent, seed, opts);
        say(fmt::format("scratch on {} ({} images): final loss {:.4f}, train acc {:.3f}", m.dataset_id(), m.size(),
                        r.log.epochs.back().loss, r.log.epochs.back().train_accuracy));
        return zoo::make_checkpoint(model, false);
    }

private:
    const ToyStudyConfig& config_;
    std::optional<DefaultImageStore> own_;
};

double probe_accuracy(const zoo::Checkpoint& ckpt, const data::SplitResult& target, const ToyStudyConfig& config,
                      const ImageStore* store, uint64_t seed) {
    const zoo::HeadSpec head = transfer::head_for(target.train);
    zoo::check_source_target(ckpt.lineage, target.train.dataset_id(), target.train.family());
    auto model = zoo::model_from_checkpoint<float>(ckpt, head, seed);
    const auto eval = augment::TransformPipeline::eval(config.image_size, config.crop_edge);
    const train::InferenceOptions inf{store, 100};
    const auto f_train = train::extract_features(model, target.train, eval, inf);
    const auto f_test = train::extract_features(model, target.test, eval, inf);
    return metrics::accuracy(transfer::linear_probe(f_train, f_test, head, seed, config.probe).predictions);
}

}  // namespace

zoo::Checkpoint pretrain_generic(const ToyStudyConfig& config) {
    const Context ctx(config);
    const synthetic::SynthConfig synth{config.generic_seed, config.generic_images_per_class, config.image_size};
    const auto generic = data::stratified_split(synthetic::make_manifest(synthetic::Domain::generic, synth),
                                                data::SplitSpec::source(config.generic_seed))
                             .train;
    return ctx.scratch(generic, config.pretrain_epochs, derive_seed(config.generic_seed, {fnv1a64("generic")}));
}

ToySeedResult run_toy_seed(uint64_t seed, const zoo::Checkpoint& pretrained, const ToyStudyConfig& config) {
    const auto t0 = Clock::now();
    const Context ctx(config);
    auto say = [&](const std::string& msg) { ctx.say(fmt::format("[seed {}] {}", seed, msg)); };

    const synthetic::SynthConfig synth{seed, config.images_per_class, config.image_size};
    const synthetic::SynthConfig synth_aerial{seed, config.aerial_images_per_class, config.image_size};
    const auto aerial = data::stratified_split(synthetic::make_manifest(synthetic::Domain::aerial, synth_aerial),
                                               data::SplitSpec::source(seed))
                            .train;
    const auto target = data::stratified_split(synthetic::make_manifest(synthetic::Domain::target, synth),
                                               data::SplitSpec::target(seed));
    const auto shared = synthetic::shared_class_names();
    const auto same = data::build_subset(aerial, {data::SubsetMode::same_classes, shared, seed});
    const auto different = data::build_subset(aerial, {data::SubsetMode::different_classes, shared, seed});
    const uint64_t probe_seed = derive_seed(seed, {fnv1a64("probe")});
    auto probe = [&](const zoo::Checkpoint& ckpt) {
        return probe_accuracy(ckpt, target, config, ctx.store(), probe_seed);
    };

    ToySeedResult out;
    out.seed = seed;
    out.generic_only = probe(pretrained);
    say(fmt::format("generic only: probe {:.4f}", out.generic_only));

    transfer::StageOptions stage;
    stage.store = ctx.store();
    stage.resize_edge = config.image_size;
    stage.crop_edge = config.crop_edge;
    auto adapt_schedule = ctx.schedule(train::ScheduleSpec::finetune(), config.adapt_epochs);
    adapt_schedule.peak_lr = config.adapt_peak_lr;
    auto adapt = [&](const data::DatasetManifest& m, const char* tag) {
        train::TrainLog log;
        const auto ckpt = transfer::domain_adapt(pretrained, m, transfer::head_for(m), adapt_schedule,
                                                 derive_seed(seed, {fnv1a64(tag)}), stage, &log);
        const double acc = probe(ckpt);
        say(fmt::format("{} ({} images): final loss {:.4f}, train acc {:.3f}, probe {:.4f}", tag, m.size(),
                        log.epochs.back().loss, log.epochs.back().train_accuracy, acc));
        return acc;
    };
    out.da_full = adapt(aerial, "da_full");
    out.da_same = adapt(same, "da_same");
    out.da_different = adapt(different, "da_different");

    out.scratch = probe(ctx.scratch(aerial, config.scratch_epochs, derive_seed(seed, {fnv1a64("scratch")})));
    say(fmt::format("scratch in-domain: probe {:.4f}", out.scratch));
    out.seconds = seconds_since(t0);
    return out;
}

ToyStudySummary run_toy_study(const std::vector<uint64_t>& seeds, const ToyStudyConfig& config) {
    ToyStudySummary s;
    const auto t0 = Clock::now();
    const zoo::Checkpoint pretrained = pretrain_generic(config);
    s.generic_seconds = seconds_since(t0);
    for (uint64_t seed : seeds) {
        s.seeds.push_back(run_toy_seed(seed, pretrained, config));
        const auto& r = s.seeds.back();
        if (r.da_full > r.scratch) ++s.da_beats_scratch;
        s.mean_same += r.da_same;
        s.mean_different += r.da_different;
    }
    if (!seeds.empty()) {
        s.mean_same /= static_cast<double>(seeds.size());
        s.mean_different /= static_cast<double>(seeds.size());
    }
    return s;
}

}  // namespace xfer::study
