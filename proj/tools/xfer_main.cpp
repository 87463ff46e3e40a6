// SPDX-License-Identifier: Apache-2.0
//
// xfer: command-line front end.
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "xfer/checkpoint.hpp"
#include "xfer/dataset_registry.hpp"
#include "xfer/experiment.hpp"
#include "xfer/image_store.hpp"
#include "xfer/synthetic.hpp"
#include "xfer/toy_study.hpp"

namespace {

using nlohmann::json;
using namespace xfer;

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct Globals {
    std::string data_root;
    bool cache = false;
    bool verbose = false;
};

std::unique_ptr<DefaultImageStore> make_store(const Globals& g) {
    const std::filesystem::path root = g.data_root.empty() ? DefaultImageStore::root_from_environment()
                                                           : std::filesystem::path(g.data_root);
    return std::make_unique<DefaultImageStore>(root, g.cache);
}

experiment::SuiteOptions suite_options(const Globals& g, const DefaultImageStore& store) {
    experiment::SuiteOptions o;
    o.store = &store;
    o.log = [](const std::string& s) { spdlog::info("{}", s); };
    if (g.verbose) {
        o.on_epoch = [](const train::EpochRecord& r) {
            spdlog::info("epoch {:3d}  loss {:.4f}  lr {:.3g}  acc {:.3f}  {:.1f}s", r.epoch, r.loss, r.lr_last,
                         r.train_accuracy, r.wall_seconds);
        };
    }
    return o;
}

std::vector<std::string> read_class_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read '{}'", path.string()));
    std::string first;
    std::getline(in, first);
    if (first.rfind("#dataset_id=", 0) == 0) return data::load_manifest(path).classes();
    std::vector<std::string> out;
    auto take = [&](std::string line) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty() && line[0] != '#') out.push_back(line);
    };
    take(first);
    for (std::string line; std::getline(in, line);) take(line);
    return out;
}

// Runs one config built from flags; prints the entry and optionally records it.
int run_single(const json& raw, const Globals& g, const std::string& ledger) {
    const auto config = experiment::config_from_json(raw);
    const auto store = make_store(g);
    const json entry = experiment::run_config(config, {}, suite_options(g, *store));
    if (!ledger.empty()) experiment::RunLedger(ledger).append(entry);
    const auto report = entry.at("report").get<metrics::MetricReport>();
    spdlog::info("{} on {}: {} {}", entry.value("source", std::string()), entry.value("target", std::string()),
                 report.metric, report.cell());
    std::cout << entry.dump(2) << '\n';
    return 0;
}

json seeds_json(uint64_t split, uint64_t train, uint64_t bootstrap) {
    return {{"split", split}, {"train", train}, {"bootstrap", bootstrap}};
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("xfer"));
    spdlog::set_pattern("%H:%M:%S %^%l%$ %v");

    CLI::App app{"Transfer-learning experiments for scene classification"};
    app.set_version_flag("--version", XFER_VERSION);
    app.require_subcommand(1);
    Globals g;
    app.add_option("--data-root", g.data_root, "Root for relative image paths (default: $XFER_DATA_ROOT)");
    app.add_flag("--cache", g.cache, "Keep decoded images in memory");
    app.add_flag("-v,--verbose", g.verbose, "Log every training epoch");

    std::function<int()> action;

    // split
    auto* split = app.add_subcommand("split", "Stratified train/test split of a manifest");
    std::string manifest, role = "source", out, fraction;
    uint64_t seed = 0;
    split->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    split->add_option("--role", role, "source (80% train) or target (20% train)")->check(CLI::IsMember({"source", "target"}));
    split->add_option("--seed", seed);
    split->add_option("--fraction", fraction, "Override the train fraction, e.g. 0.8, 4/5 or 80%");
    split->add_option("--out", out, "Output directory for train.tsv and test.tsv")->required();
    split->callback([&] {
        action = [&] {
            const auto m = data::load_manifest(manifest);
            auto spec = data::SplitSpec::for_role(data::parse_split_role(role), seed);
            if (!fraction.empty()) spec.train_fraction = data::Fraction::parse(fraction);
            const auto r = data::stratified_split(m, spec);
            std::filesystem::create_directories(out);
            data::save_manifest(std::filesystem::path(out) / "train.tsv", r.train);
            data::save_manifest(std::filesystem::path(out) / "test.tsv", r.test);
            std::cout << fmt::format("{}: {} train / {} test ({} of each class, seed {})\n", m.dataset_id(),
                                     r.train.size(), r.test.size(), spec.train_fraction.str(), seed);
            return 0;
        };
    });

    // subset
    auto* subset = app.add_subcommand("subset", "Class-overlap subset of a manifest");
    std::string mode = "same", ref_classes;
    subset->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    subset->add_option("--mode", mode, "same | different | half");
    subset->add_option("--ref-classes", ref_classes, "Reference class list: a manifest or one name per line")
        ->check(CLI::ExistingFile);
    subset->add_option("--seed", seed);
    subset->add_option("--out", out, "Output manifest (default: stdout)");
    subset->callback([&] {
        action = [&] {
            const auto m = data::load_manifest(manifest);
            const auto smode = data::parse_subset_mode(mode);
            if (ref_classes.empty() && smode != data::SubsetMode::all_classes_half_images) {
                throw ConfigError("--ref-classes is required for same/different subsets");
            }
            const auto refs = ref_classes.empty() ? std::vector<std::string>{} : read_class_list(ref_classes);
            const auto s = data::build_subset(m, {smode, refs, seed});
            const auto shared = data::matched_classes(m, refs);
            spdlog::info("{}: {} of {} classes overlap the reference list; subset {} has {} images in {} classes",
                         m.dataset_id(), shared.size(), m.num_classes(), s.dataset_id(), s.size(), s.num_classes());
            if (out.empty()) {
                data::write_manifest(std::cout, s);
            } else {
                data::save_manifest(out, s);
            }
            return 0;
        };
    });

    // import-checkpoint
    auto* import = app.add_subcommand("import-checkpoint", "Convert external ImageNet weights (safetensors)");
    std::string source_kind = "supervised", in_path, architecture = "reference_residual_50";
    import->add_option("--source-kind", source_kind)->check(CLI::IsMember({"supervised", "swav"}));
    import->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
    import->add_option("--out", out)->required();
    import->add_option("--architecture", architecture);
    import->callback([&] {
        action = [&] {
            const auto ckpt = zoo::import_external(in_path, zoo::parse_external_kind(source_kind),
                                                   zoo::parse_architecture(architecture));
            zoo::save_checkpoint(ckpt, out);
            std::cout << fmt::format("{}: {} tensors, lineage [{}]\n", out, ckpt.backbone.size(),
                                     ckpt.lineage.describe());
            return 0;
        };
    });

    // pretrain / adapt / transfer share the training knobs
    std::string backbone = "toy_conv", schedule, ckpt, target, label_mode, ledger, label;
    std::optional<int> epochs, batch_size, resize, crop, input_channels;
    std::optional<double> peak_lr;
    uint64_t split_seed = 0, bootstrap_seed = 0;
    auto training_knobs = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Training seed");
        cmd->add_option("--split-seed", split_seed);
        cmd->add_option("--bootstrap-seed", bootstrap_seed);
        cmd->add_option("--epochs", epochs, "Compress the schedule to N epochs");
        cmd->add_option("--batch-size", batch_size);
        cmd->add_option("--peak-lr", peak_lr);
        cmd->add_option("--resize", resize, "Resize edge (default 292)");
        cmd->add_option("--crop", crop, "Crop edge (default 256)");
        cmd->add_option("--ledger", ledger, "Append the run to this ledger");
    };
    auto common = [&](json& j) {
        j["seeds"] = seeds_json(split_seed, seed, bootstrap_seed);
        json image = json::object();
        if (resize) image["resize"] = *resize;
        if (crop) image["crop"] = *crop;
        j["image"] = image;
        json s{{"preset", schedule}};
        if (epochs) s["epochs"] = *epochs;
        if (batch_size) s["batch_size"] = *batch_size;
        if (peak_lr) s["peak_lr"] = *peak_lr;
        j["schedule"] = s;
    };

    auto* pretrain = app.add_subcommand("pretrain", "Train a backbone on 80% of a dataset, score the rest");
    pretrain->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    pretrain->add_option("--backbone", backbone, "toy_conv | reference_residual_50");
    pretrain->add_option("--input-channels", input_channels);
    pretrain->add_option("--schedule", schedule, "scratch | finetune")->check(CLI::IsMember({"scratch", "finetune"}));
    pretrain->add_option("--label-mode", label_mode, "single | multi (default: the manifest's)");
    pretrain->add_option("--out", out)->required();
    training_knobs(pretrain);
    pretrain->callback([&] {
        action = [&] {
            json j{{"id", "pretrain"}, {"kind", "pretrain"}, {"dataset", manifest}, {"output", out},
                   {"backbone", {{"architecture", backbone}, {"input_channels", input_channels.value_or(3)}}}};
            if (schedule.empty()) schedule = "scratch";
            common(j);
            if (!label_mode.empty()) j["label_mode"] = label_mode;
            return run_single(j, g, ledger);
        };
    });

    auto* adapt = app.add_subcommand("adapt", "Domain-adaptive training of a pre-trained backbone");
    adapt->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    adapt->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
    adapt->add_option("--label-mode", label_mode, "single | multi (default: the manifest's)");
    adapt->add_option("--schedule", schedule, "scratch | finetune (default finetune)");
    adapt->add_option("--out", out)->required();
    training_knobs(adapt);
    adapt->callback([&] {
        action = [&] {
            json j{{"id", "adapt"}, {"kind", "adapt"}, {"source", ckpt}, {"dataset", manifest}, {"output", out}};
            if (schedule.empty()) schedule = "finetune";
            common(j);
            if (!label_mode.empty()) j["label_mode"] = label_mode;
            return run_single(j, g, ledger);
        };
    });

    auto* xfer_cmd = app.add_subcommand("transfer", "Probe (fe) or fine-tune (ft) a checkpoint on a target");
    std::string tmode = "fe";
    xfer_cmd->add_option("--ckpt", ckpt)->required()->check(CLI::ExistingFile);
    xfer_cmd->add_option("--target", target)->required()->check(CLI::ExistingFile);
    xfer_cmd->add_option("--mode", tmode)->check(CLI::IsMember({"fe", "ft"}));
    xfer_cmd->add_option("--label", label, "Source label for reports");
    xfer_cmd->add_option("--out", out, "Save the fine-tuned model (ft)");
    training_knobs(xfer_cmd);
    xfer_cmd->callback([&] {
        action = [&] {
            json j{{"id", "transfer"}, {"kind", "transfer"}, {"source", {{"checkpoint", ckpt}, {"label", label}}},
                   {"target", target}, {"mode", tmode}, {"output", out}};
            if (schedule.empty()) schedule = "finetune";
            common(j);
            return run_single(j, g, ledger);
        };
    });

    // run-suite
    auto* run = app.add_subcommand("run-suite", "Run every config of a suite file");
    std::string suite_path;
    bool force = false;
    run->add_option("suite", suite_path)->required()->check(CLI::ExistingFile);
    run->add_option("--ledger", ledger, "Ledger file (default: the suite's, else ledger.jsonl beside it)");
    run->add_flag("--force", force, "Re-run configs already in the ledger");
    run->callback([&] {
        action = [&] {
            const auto suite = experiment::load_suite(suite_path);
            const auto store = make_store(g);
            auto options = suite_options(g, *store);
            options.force = force;
            if (!ledger.empty()) {
                options.ledger = ledger;
            } else if (suite.ledger) {
                options.ledger = suite.ledger->is_absolute() ? *suite.ledger : suite.base_dir / *suite.ledger;
            } else {
                options.ledger = suite.base_dir / "ledger.jsonl";
            }
            const auto result = experiment::run_suite(suite, options);
            using experiment::RunStatus;
            std::cout << fmt::format("{} completed, {} skipped, {} rejected, {} failed (ledger {})\n",
                                     result.count(RunStatus::completed), result.count(RunStatus::skipped),
                                     result.count(RunStatus::rejected), result.count(RunStatus::failed),
                                     options.ledger.string());
            if (result.count(RunStatus::failed)) return kRuntimeError;
            return result.count(RunStatus::rejected) ? kConfigError : 0;
        };
    });

    // report
    auto* rep = app.add_subcommand("report", "Render a source x target table from a ledger");
    std::string kind = "transfer", format = "text", rows, columns;
    std::optional<std::string> rmode;
    rep->add_option("--ledger", ledger)->required()->check(CLI::ExistingFile);
    rep->add_option("--kind", kind, "transfer | pretrain | adapt")->check(CLI::IsMember({"transfer", "pretrain", "adapt"}));
    rep->add_option("--mode", rmode, "Only fe or ft transfers")->check(CLI::IsMember({"fe", "ft"}));
    rep->add_option("--format", format, "text | markdown | csv");
    rep->add_option("--rows", rows, "Comma-separated row order");
    rep->add_option("--columns", columns, "Comma-separated column order");
    rep->callback([&] {
        action = [&] {
            experiment::TableSpec spec;
            spec.kind = experiment::parse_config_kind(kind);
            if (rmode) spec.mode = transfer::parse_transfer_mode(*rmode);
            auto list = [](const std::string& s) {
                std::vector<std::string> out;
                std::stringstream ss(s);
                for (std::string item; std::getline(ss, item, ',');) {
                    if (!item.empty()) out.push_back(item);
                }
                return out;
            };
            spec.rows = list(rows);
            spec.columns = list(columns);
            if (spec.kind != experiment::ConfigKind::transfer) spec.corner = "Init";
            std::cout << experiment::report(experiment::RunLedger(ledger), spec,
                                            experiment::parse_table_format(format));
            return 0;
        };
    });

    // synth
    auto* synth = app.add_subcommand("synth", "Write a manifest of procedural texture images");
    std::string domain = "aerial";
    int per_class = 200, size = 36;
    synth->add_option("--domain", domain, "generic | aerial | target");
    synth->add_option("--seed", seed, "Generator seed");
    synth->add_option("--per-class", per_class);
    synth->add_option("--size", size, "Image edge in pixels");
    synth->add_option("--out", out)->required();
    synth->callback([&] {
        action = [&] {
            const auto m = synthetic::make_manifest(synthetic::parse_domain(domain), {seed, per_class, size});
            data::save_manifest(out, m);
            std::cout << fmt::format("{}: {} images, {} classes\n", m.dataset_id(), m.size(), m.num_classes());
            return 0;
        };
    });

    // toy-study
    auto* toy = app.add_subcommand("toy-study", "Desk-scale domain-adaptation study on synthetic textures");
    std::vector<uint64_t> seeds{1, 2, 3, 4, 5};
    std::string json_out;
    toy->add_option("--seeds", seeds)->delimiter(',');
    toy->add_option("--json", json_out, "Write the summary as JSON");
    toy->callback([&] {
        action = [&] {
            study::ToyStudyConfig cfg;
            cfg.log = [](const std::string& s) { spdlog::info("{}", s); };
            const auto s = study::run_toy_study(seeds, cfg);
            std::cout << fmt::format("{:>6} {:>9} {:>9} {:>9} {:>9} {:>9}\n", "seed", "generic", "scratch", "da_full",
                                     "da_same", "da_diff");
            for (const auto& r : s.seeds) {
                std::cout << fmt::format("{:>6} {:9.4f} {:9.4f} {:9.4f} {:9.4f} {:9.4f}\n", r.seed, r.generic_only,
                                         r.scratch, r.da_full, r.da_same, r.da_different);
            }
            std::cout << fmt::format("DA beats scratch in {}/{} seeds; mean same {:.4f} vs different {:.4f}\n",
                                     s.da_beats_scratch, s.seeds.size(), s.mean_same, s.mean_different);
            if (!json_out.empty()) std::ofstream(json_out) << json(s).dump(2) << '\n';
            return 0;
        };
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }
    try {
        return action ? action() : 0;
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kRuntimeError;
    }
}
