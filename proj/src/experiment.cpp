// SPDX-License-Identifier: Apache-2.0

#include "xfer/experiment.hpp"

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "xfer/checkpoint.hpp"
#include "xfer/hashing.hpp"
#include "xfer/random.hpp"

namespace xfer::experiment {

using nlohmann::json;

std::string to_string(ConfigKind k) {
    switch (k) {
        case ConfigKind::pretrain: return "pretrain";
        case ConfigKind::adapt: return "adapt";
        case ConfigKind::transfer: return "transfer";
    }
    return "?";
}

ConfigKind parse_config_kind(const std::string& s) {
    if (s == "pretrain") return ConfigKind::pretrain;
    if (s == "adapt" || s == "domain_adapt") return ConfigKind::adapt;
    if (s == "transfer") return ConfigKind::transfer;
    throw ConfigError(fmt::format("unknown config kind '{}' (expected pretrain|adapt|transfer)", s));
}

std::string to_string(RunStatus s) {
    switch (s) {
        case RunStatus::completed: return "completed";
        case RunStatus::skipped: return "skipped";
        case RunStatus::rejected: return "rejected";
        case RunStatus::failed: return "failed";
    }
    return "?";
}

bool ExperimentConfig::uses_schedule() const {
    return kind != ConfigKind::transfer || mode == transfer::TransferMode::fine_tune;
}

metrics::BootstrapSpec ExperimentConfig::bootstrap() const {
    metrics::BootstrapSpec b;
    b.replicates = bootstrap_replicates;
    b.seed = bootstrap_seed;
    return b;
}

std::string ExperimentConfig::output_path() const {
    if (!output.empty()) return output;
    if (kind == ConfigKind::transfer) return {};
    return (std::filesystem::path(output_dir) / (experiment_id + ".ckpt")).lexically_normal().string();
}

void ExperimentConfig::validate() const {
    if (experiment_id.empty()) throw ConfigError("config has no id");
    if (dataset.empty()) {
        throw ConfigError(fmt::format("config '{}' names no {}", experiment_id,
                                      kind == ConfigKind::transfer ? "target" : "dataset"));
    }
    if (kind != ConfigKind::pretrain && source.checkpoint.empty()) {
        throw ConfigError(fmt::format("config '{}' names no source checkpoint", experiment_id));
    }
    if (input_channels != 1 && input_channels != 3) {
        throw ConfigError(fmt::format("config '{}': input_channels must be 1 or 3", experiment_id));
    }
    if (uses_schedule()) schedule.validate();
    probe.validate();
    augment::TransformPipeline::eval(resize_edge, crop_edge).validate();
    bootstrap().validate();
}

// YAML -----------------------------------------------------------------------

namespace {

json scalar_to_json(const YAML::Node& node) {
    const std::string& text = node.Scalar();
    if (node.Tag() == "!") return text;  // quoted
    if (text.empty() || text == "~" || text == "null" || text == "Null" || text == "NULL") return nullptr;
    if (text == "true" || text == "True" || text == "TRUE") return true;
    if (text == "false" || text == "False" || text == "FALSE") return false;
    int64_t i = 0;
    const char* end = text.data() + text.size();
    const char* start = text.data() + (text[0] == '+' ? 1 : 0);
    if (auto [p, ec] = std::from_chars(start, end, i); ec == std::errc() && p == end) return i;
    double d = 0.0;
    if (auto [p, ec] = std::from_chars(start, end, d); ec == std::errc() && p == end && std::isfinite(d)) return d;
    return text;
}

json node_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined: return nullptr;
        case YAML::NodeType::Scalar: return scalar_to_json(node);
        case YAML::NodeType::Sequence: {
            json out = json::array();
            for (const auto& item : node) out.push_back(node_to_json(item));
            return out;
        }
        case YAML::NodeType::Map: {
            json out = json::object();
            for (const auto& kv : node) {
                const std::string key = kv.first.as<std::string>();
                if (out.contains(key)) throw ConfigError(fmt::format("duplicate key '{}'", key));
                out[key] = node_to_json(kv.second);
            }
            return out;
        }
    }
    return nullptr;
}

}  // namespace

json yaml_to_json(const std::string& text, const std::string& origin) {
    try {
        return node_to_json(YAML::Load(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(fmt::format("{}: {}", origin, e.what()));
    } catch (const ConfigError& e) {
        throw ConfigError(fmt::format("{}: {}", origin, e.what()));
    }
}

// Typed configs ----------------------------------------------------------------

namespace {

// Recursive merge; `over` wins.
json merged(json base, const json& over) {
    if (!base.is_object() || !over.is_object()) return over;
    for (const auto& [k, v] : over.items()) base[k] = base.contains(k) ? merged(base[k], v) : v;
    return base;
}

class Fields {
public:
    Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected a mapping", where_));
    }

    bool has(const char* key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }
    const json& at(const char* key) { return (seen_.insert(key), j_.at(key)); }

    std::string str(const char* key, std::string fallback = {}) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (v.is_string()) return v.get<std::string>();
        if (v.is_number_integer()) return std::to_string(v.get<int64_t>());
        throw ConfigError(fmt::format("{}: '{}' must be a string", where_, key));
    }

    int64_t integer(const char* key, int64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (v.is_number_integer()) return v.get<int64_t>();
        if (v.is_number_float()) {
            const double d = v.get<double>();
            if (std::trunc(d) == d && std::abs(d) < 9.0e15) return static_cast<int64_t>(d);
        }
        throw ConfigError(fmt::format("{}: '{}' must be an integer", where_, key));
    }

    uint64_t seed(const char* key, uint64_t fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (v.is_number_unsigned()) return v.get<uint64_t>();
        const int64_t i = integer(key, 0);
        if (i < 0) throw ConfigError(fmt::format("{}: '{}' must be non-negative", where_, key));
        return static_cast<uint64_t>(i);
    }

    double real(const char* key, double fallback) {
        if (!has(key)) return fallback;
        const json& v = j_.at(key);
        if (v.is_number()) return v.get<double>();
        throw ConfigError(fmt::format("{}: '{}' must be a number", where_, key));
    }

    // Unknown keys are almost always typos; refuse them.
    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.contains(k)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, k));
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

zoo::LineageStage parse_stage(const json& j, const std::string& where) {
    zoo::LineageStage s;
    if (j.is_string()) {
        s.dataset_id = j.get<std::string>();
        s.family = s.dataset_id;
        return s;
    }
    Fields f(j, where);
    s.dataset_id = f.str("dataset");
    if (s.dataset_id.empty()) throw ConfigError(fmt::format("{}: lineage stage needs 'dataset'", where));
    // stages written by training always carry a family; match that here
    s.family = f.str("family", s.dataset_id);
    s.objective = zoo::parse_objective(f.str("objective", "supervised"));
    s.stage_kind = zoo::parse_stage_kind(f.str("stage", "pretrain"));
    f.finish();
    return s;
}

void parse_source(ExperimentConfig& c, const json& j, const std::string& where) {
    if (j.is_string()) {
        c.source.checkpoint = j.get<std::string>();
        return;
    }
    Fields f(j, where + ".source");
    c.source.checkpoint = f.str("checkpoint");
    c.source.label = f.str("label");
    if (f.has("lineage")) {
        const json& l = f.at("lineage");
        if (!l.is_array()) throw ConfigError(fmt::format("{}.source: 'lineage' must be a list", where));
        zoo::ModelLineage lineage;
        for (const auto& s : l) lineage.append(parse_stage(s, where + ".source.lineage"));
        c.source.lineage = std::move(lineage);
    }
    f.finish();
}

void parse_schedule(ExperimentConfig& c, const json& j, const std::string& where) {
    if (j.is_string()) {
        c.schedule = train::ScheduleSpec::preset(j.get<std::string>());
        return;
    }
    Fields f(j, where + ".schedule");
    c.schedule = train::ScheduleSpec::preset(f.str("preset", c.kind == ConfigKind::pretrain ? "scratch" : "finetune"));
    if (f.has("epochs")) c.schedule = c.schedule.scaled_to(static_cast<int>(f.integer("epochs", 0)));
    c.schedule.batch_size = static_cast<int>(f.integer("batch_size", c.schedule.batch_size));
    c.schedule.peak_lr = f.real("peak_lr", c.schedule.peak_lr);
    // explicit fields, as written by config_to_json
    if (f.has("total_epochs")) {
        if (f.has("epochs")) throw ConfigError(fmt::format("{}.schedule: give 'epochs' or 'total_epochs', not both", where));
        c.schedule.total_epochs = static_cast<int>(f.integer("total_epochs", 0));
    }
    c.schedule.warmup_epochs = static_cast<int>(f.integer("warmup_epochs", c.schedule.warmup_epochs));
    if (f.has("decay_epochs")) {
        const json& d = f.at("decay_epochs");
        if (!d.is_array()) throw ConfigError(fmt::format("{}.schedule: 'decay_epochs' must be a list", where));
        c.schedule.decay_epochs.clear();
        for (const auto& e : d) {
            if (!e.is_number() || e.get<double>() != std::floor(e.get<double>())) {
                throw ConfigError(fmt::format("{}.schedule: decay epochs must be integers", where));
            }
            c.schedule.decay_epochs.push_back(static_cast<int>(e.get<double>()));
        }
    }
    c.schedule.decay_factor = f.real("decay_factor", c.schedule.decay_factor);
    c.schedule.optimizer = f.str("optimizer", c.schedule.optimizer);
    f.finish();
}

}  // namespace

ExperimentConfig config_from_json(const json& raw, const json& defaults) {
    const json j = merged(defaults.is_object() ? defaults : json::object(), raw);
    const std::string id = j.is_object() && j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "";
    const std::string where = id.empty() ? std::string("config") : fmt::format("config '{}'", id);
    Fields f(j, where);
    ExperimentConfig c;
    c.experiment_id = f.str("id");
    c.kind = parse_config_kind(f.str("kind", "transfer"));

    if (c.kind == ConfigKind::pretrain) {
        if (f.has("backbone")) {
            const json& b = f.at("backbone");
            if (b.is_string()) {
                c.architecture = zoo::parse_architecture(b.get<std::string>());
            } else {
                Fields bf(b, where + ".backbone");
                c.architecture = zoo::parse_architecture(bf.str("architecture", "toy_conv"));
                c.input_channels = static_cast<int>(bf.integer("input_channels", 3));
                bf.finish();
            }
        }
        c.schedule = train::ScheduleSpec::scratch();
    } else if (f.has("source")) {
        parse_source(c, f.at("source"), where);
    }

    const char* dataset_key = c.kind == ConfigKind::transfer ? "target" : "dataset";
    c.dataset = f.str(dataset_key);
    if (c.kind != ConfigKind::transfer && f.has("label_mode")) {
        c.label_mode = data::parse_label_mode(f.str("label_mode"));
    }
    if (c.kind == ConfigKind::transfer) c.mode = transfer::parse_transfer_mode(f.str("mode", "fe"));
    if (f.has("schedule")) parse_schedule(c, f.at("schedule"), where);
    if (f.has("probe")) {
        Fields pf(f.at("probe"), where + ".probe");
        c.probe.lr = pf.real("lr", c.probe.lr);
        c.probe.epochs = static_cast<int>(pf.integer("epochs", c.probe.epochs));
        c.probe.batch_size = static_cast<int>(pf.integer("batch_size", c.probe.batch_size));
        pf.finish();
    }
    if (f.has("image")) {
        Fields imf(f.at("image"), where + ".image");
        c.resize_edge = static_cast<int>(imf.integer("resize", c.resize_edge));
        c.crop_edge = static_cast<int>(imf.integer("crop", c.crop_edge));
        imf.finish();
    }
    if (f.has("seeds")) {
        Fields sf(f.at("seeds"), where + ".seeds");
        c.split_seed = sf.seed("split", 0);
        c.train_seed = sf.seed("train", 0);
        c.bootstrap_seed = sf.seed("bootstrap", 0);
        sf.finish();
    }
    if (f.has("bootstrap")) {
        Fields bf(f.at("bootstrap"), where + ".bootstrap");
        c.bootstrap_replicates = static_cast<int>(bf.integer("replicates", c.bootstrap_replicates));
        bf.finish();
    }
    c.output = f.str("output");
    c.output_dir = f.str("output_dir", ".");
    f.finish();
    c.validate();
    return c;
}

json config_to_json(const ExperimentConfig& c) {
    json j{{"id", c.experiment_id},
           {"kind", to_string(c.kind)},
           {c.kind == ConfigKind::transfer ? "target" : "dataset", c.dataset},
           {"image", {{"resize", c.resize_edge}, {"crop", c.crop_edge}}},
           {"seeds", {{"split", c.split_seed}, {"train", c.train_seed}, {"bootstrap", c.bootstrap_seed}}},
           {"bootstrap", {{"replicates", c.bootstrap_replicates}}},
           {"output", c.output},
           {"output_dir", c.output_dir}};
    if (c.kind == ConfigKind::pretrain) {
        j["backbone"] = {{"architecture", zoo::to_string(c.architecture)}, {"input_channels", c.input_channels}};
    } else {
        json s{{"checkpoint", c.source.checkpoint}, {"label", c.source.label}};
        if (c.source.lineage) s["lineage"] = *c.source.lineage;
        j["source"] = s;
    }
    if (c.kind != ConfigKind::transfer) {
        j["label_mode"] = c.label_mode ? data::to_string(*c.label_mode) : "manifest";
    } else {
        j["mode"] = transfer::to_string(c.mode);
    }
    if (c.uses_schedule()) j["schedule"] = c.schedule;
    if (c.kind == ConfigKind::transfer && c.mode == transfer::TransferMode::feature_extraction) j["probe"] = c.probe;
    return canonicalize(j);
}

std::string config_hash(const ExperimentConfig& c) { return experiment::config_hash(config_to_json(c)); }

// Suites -----------------------------------------------------------------------

Suite parse_suite(const std::string& text, const std::filesystem::path& base_dir, const std::string& origin) {
    const json doc = yaml_to_json(text, origin);
    json list;
    json defaults = json::object();
    Suite suite;
    suite.base_dir = base_dir;
    if (doc.is_array()) {
        list = doc;
    } else if (doc.is_object()) {
        Fields f(doc, origin);
        suite.name = f.str("suite");
        if (f.has("ledger")) suite.ledger = f.str("ledger");
        if (f.has("defaults")) defaults = f.at("defaults");
        if (!f.has("configs")) throw ConfigError(fmt::format("{}: suite has no 'configs' list", origin));
        list = f.at("configs");
        f.finish();
    }
    if (!list.is_array()) throw ConfigError(fmt::format("{}: expected a list of configs", origin));

    std::set<std::string> ids;
    for (size_t i = 0; i < list.size(); ++i) {
        SuiteEntry e;
        e.index = i;
        const json& raw = list[i];
        e.experiment_id = raw.is_object() && raw.contains("id") && raw["id"].is_string()
                              ? raw["id"].get<std::string>()
                              : fmt::format("#{}", i + 1);
        try {
            ExperimentConfig c = config_from_json(raw, defaults);
            if (!ids.insert(c.experiment_id).second) {
                throw ConfigError(fmt::format("duplicate config id '{}'", c.experiment_id));
            }
            e.hash = config_hash(c);
            validate_config(c, base_dir);
            e.config = std::move(c);
        } catch (const ConfigError& ex) {
            e.error = ex.what();
        } catch (const std::exception& ex) {
            e.error = ex.what();
        }
        suite.entries.push_back(std::move(e));
    }
    return suite;
}

Suite load_suite(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(fmt::format("cannot read suite '{}'", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_suite(buf.str(), path.parent_path(), path.string());
}

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

data::DatasetManifest load_dataset(const ExperimentConfig& c, const std::filesystem::path& base) {
    const auto path = resolve(base, c.dataset);
    if (!std::filesystem::exists(path)) {
        throw ConfigError(fmt::format("config '{}': manifest '{}' not found", c.experiment_id, path.string()));
    }
    return data::load_manifest(path);
}

zoo::HeadSpec head_for(const ExperimentConfig& c, const data::DatasetManifest& m) {
    const data::LabelMode mode = c.label_mode.value_or(m.label_mode());
    if (m.label_mode() == data::LabelMode::multi_label && mode == data::LabelMode::single_label) {
        throw ConfigError(fmt::format("config '{}': '{}' is multi-label; a single-label head cannot train on it",
                                      c.experiment_id, m.dataset_id()));
    }
    return {static_cast<int>(m.num_classes()),
            mode == data::LabelMode::multi_label ? zoo::OutputMode::independent : zoo::OutputMode::exclusive};
}

std::optional<zoo::ModelLineage> known_lineage(const ExperimentConfig& c, const std::filesystem::path& base) {
    const auto path = resolve(base, c.source.checkpoint);
    if (std::filesystem::exists(path)) {
        const zoo::ModelLineage actual = zoo::load_checkpoint(path).lineage;
        if (c.source.lineage && !(*c.source.lineage == actual)) {
            throw ConfigError(fmt::format("config '{}': declared lineage [{}] does not match checkpoint [{}]",
                                          c.experiment_id, c.source.lineage->describe(), actual.describe()));
        }
        return actual;
    }
    return c.source.lineage;
}

}  // namespace

void validate_config(const ExperimentConfig& c, const std::filesystem::path& base) {
    c.validate();
    const auto manifest = load_dataset(c, base);
    if (c.kind != ConfigKind::transfer) head_for(c, manifest);
    if (c.kind == ConfigKind::pretrain) return;
    if (const auto lineage = known_lineage(c, base)) {
        zoo::check_source_target(*lineage, manifest.dataset_id(), manifest.family());
    }
}

namespace {

json base_entry(const ExperimentConfig& c, const std::string& hash, const std::string& started) {
    return json{{"config_hash", hash},
                {"experiment_id", c.experiment_id},
                {"kind", to_string(c.kind)},
                {"status", "completed"},
                {"started_at", started},
                {"config", config_to_json(c)},
                {"seeds", {{"split", c.split_seed}, {"train", c.train_seed}, {"bootstrap", c.bootstrap_seed}}},
                {"framework_version", XFER_VERSION}};
}

metrics::MetricReport score(zoo::Model<float>& model, const data::DatasetManifest& test, const ExperimentConfig& c,
                            const ImageStore* store) {
    const auto eval = augment::TransformPipeline::eval(c.resize_edge, c.crop_edge);
    const auto preds = train::predict(model, test, eval, {store, 64});
    return model.head_spec().output_mode == zoo::OutputMode::independent ? metrics::f1_report(preds, c.bootstrap())
                                                                         : metrics::accuracy_report(preds, c.bootstrap());
}

void write_log(const std::filesystem::path& ckpt, const train::TrainLog& log) {
    std::ofstream out(ckpt.string() + ".log.jsonl", std::ios::binary);
    out << log.to_jsonl();
}

// pretrain / adapt: train on 80% of the dataset, score the held-out 20%.
json run_training(const ExperimentConfig& c, const std::filesystem::path& base, const SuiteOptions& options,
                  const std::string& hash) {
    const std::string started = utc_timestamp();
    const auto manifest = load_dataset(c, base);
    const zoo::HeadSpec head = head_for(c, manifest);
    const auto split = data::stratified_split(manifest, data::SplitSpec::source(c.split_seed));
    const auto out_path = resolve(base, c.output_path());
    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());

    train::TrainLog log;
    std::optional<zoo::Model<float>> model;
    zoo::ModelLineage before;
    if (c.kind == ConfigKind::pretrain) {
        zoo::BackboneSpec spec;
        spec.architecture = c.architecture;
        spec.input_channels = c.input_channels;
        spec.seed = c.train_seed;
        model.emplace(spec, head);
        train::TrainOptions t;
        t.store = options.store;
        t.on_epoch = options.on_epoch;
        const auto pipeline = augment::TransformPipeline::train(derive_seed(c.train_seed, {fnv1a64("pipeline")}),
                                                                c.resize_edge, c.crop_edge);
        log = train::train(*model, split.train, c.schedule, pipeline, train::loss_mode_for(head.output_mode),
                           c.train_seed, t)
                  .log;
    } else {
        const zoo::Checkpoint source = zoo::load_checkpoint(resolve(base, c.source.checkpoint));
        if (c.source.lineage && !(*c.source.lineage == source.lineage)) {
            throw ConfigError(fmt::format("config '{}': declared lineage [{}] does not match checkpoint [{}]",
                                          c.experiment_id, c.source.lineage->describe(), source.lineage.describe()));
        }
        before = source.lineage;
        transfer::StageOptions stage{options.store, c.resize_edge, c.crop_edge, options.on_epoch};
        model.emplace(transfer::domain_adapt_model(source, split.train, head, c.schedule, c.train_seed, stage, &log));
    }
    const metrics::MetricReport report = score(*model, split.test, c, options.store);
    zoo::save_checkpoint(*model, out_path, c.kind == ConfigKind::pretrain);
    write_log(out_path, log);

    json e = base_entry(c, hash, started);
    e["finished_at"] = utc_timestamp();
    e["source"] = c.kind == ConfigKind::pretrain ? std::string("scratch") : before.describe();
    e["source_label"] = !c.source.label.empty() ? c.source.label : e["source"].get<std::string>();
    e["target"] = manifest.dataset_id();
    e["lineage"] = before;
    e["lineage_after"] = model->lineage();
    e["n_train"] = split.train.size();
    e["n_test"] = split.test.size();
    e["final_loss"] = log.epochs.empty() ? 0.0 : log.epochs.back().loss;
    e["report"] = report;
    e["artifacts"] = {{"checkpoint", out_path.string()}, {"train_log", out_path.string() + ".log.jsonl"}};
    return e;
}

json run_transfer(const ExperimentConfig& c, const std::filesystem::path& base, const SuiteOptions& options,
                  const std::string& hash) {
    const auto manifest = load_dataset(c, base);
    transfer::TransferPlan plan{resolve(base, c.source.checkpoint), manifest.dataset_id(), c.mode, c.split_seed,
                                c.train_seed};
    if (c.source.lineage) {
        const zoo::ModelLineage actual = zoo::load_checkpoint(plan.source_checkpoint).lineage;
        if (!(*c.source.lineage == actual)) {
            throw ConfigError(fmt::format("config '{}': declared lineage [{}] does not match checkpoint [{}]",
                                          c.experiment_id, c.source.lineage->describe(), actual.describe()));
        }
    }
    transfer::TransferOptions t;
    t.finetune_schedule = c.schedule;
    t.probe = c.probe;
    t.bootstrap = c.bootstrap();
    t.stage = {options.store, c.resize_edge, c.crop_edge, options.on_epoch};
    t.experiment_id = c.experiment_id;
    t.config_hash = hash;
    if (!c.output.empty()) t.output_checkpoint = resolve(base, c.output);
    auto outcome = transfer::run_transfer_experiment(plan, manifest, t);
    json e = std::move(outcome.ledger_entry);
    e["plan_config"] = e["config"];
    e["config"] = config_to_json(c);
    e["source_label"] = !c.source.label.empty() ? c.source.label : e["source"].get<std::string>();
    return e;
}

}  // namespace

json run_config(const ExperimentConfig& c, const std::filesystem::path& base, const SuiteOptions& options) {
    validate_config(c, base);
    const std::string hash = config_hash(c);
    return c.kind == ConfigKind::transfer ? run_transfer(c, base, options, hash)
                                          : run_training(c, base, options, hash);
}

size_t SuiteResult::count(RunStatus s) const {
    return static_cast<size_t>(std::count_if(runs.begin(), runs.end(), [&](const ConfigRun& r) { return r.status == s; }));
}

SuiteResult run_suite(const Suite& suite, const SuiteOptions& options) {
    const LedgerLock lock(options.ledger);
    const RunLedger ledger(options.ledger);
    auto say = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };
    SuiteResult result;
    for (const auto& entry : suite.entries) {
        ConfigRun run;
        run.experiment_id = entry.experiment_id;
        run.hash = entry.hash;
        if (!entry.config) {
            run.status = RunStatus::rejected;
            run.message = entry.error;
        } else if (!options.force && ledger.contains(entry.hash)) {
            run.status = RunStatus::skipped;
            run.message = "already completed";
        } else {
            try {
                run.entry = run_config(*entry.config, suite.base_dir, options);
                ledger.append(run.entry);
                run.status = RunStatus::completed;
                if (run.entry.contains("report")) {
                    run.message = run.entry["report"].get<metrics::MetricReport>().cell();
                }
            } catch (const ConfigError& e) {
                run.status = RunStatus::rejected;
                run.message = e.what();
            } catch (const std::exception& e) {
                run.status = RunStatus::failed;
                run.message = e.what();
            }
        }
        say(fmt::format("[{}] {} {}{}", to_string(run.status), run.experiment_id, run.hash.substr(0, 12),
                        run.message.empty() ? "" : ": " + run.message));
        result.runs.push_back(std::move(run));
    }
    return result;
}

// Reports ----------------------------------------------------------------------

TableFormat parse_table_format(const std::string& s) {
    if (s == "text" || s == "txt") return TableFormat::text;
    if (s == "markdown" || s == "md") return TableFormat::markdown;
    if (s == "csv") return TableFormat::csv;
    throw ConfigError(fmt::format("unknown table format '{}' (expected text|markdown|csv)", s));
}

ReportTable build_table(const std::vector<json>& entries, const TableSpec& spec) {
    ReportTable t;
    t.corner = spec.corner;
    t.rows = spec.rows;
    t.columns = spec.columns;
    std::map<std::pair<std::string, std::string>, metrics::MetricReport> latest;
    for (const auto& e : entries) {
        if (e.value("status", std::string("completed")) != "completed") continue;
        if (e.value("kind", std::string()) != to_string(spec.kind) || !e.contains("report")) continue;
        if (spec.mode && e.value("mode", std::string()) != transfer::to_string(*spec.mode)) continue;
        const std::string row = e.value("source_label", e.value("source", std::string("?")));
        const std::string col = e.value("target", std::string("?"));
        if (spec.rows.empty() && std::find(t.rows.begin(), t.rows.end(), row) == t.rows.end()) t.rows.push_back(row);
        if (spec.columns.empty() && std::find(t.columns.begin(), t.columns.end(), col) == t.columns.end()) {
            t.columns.push_back(col);
        }
        latest[{row, col}] = e.at("report").get<metrics::MetricReport>();
    }
    t.cells.assign(t.rows.size(), std::vector<TableCell>(t.columns.size()));
    for (size_t r = 0; r < t.rows.size(); ++r) {
        for (size_t c = 0; c < t.columns.size(); ++c) {
            if (auto it = latest.find({t.rows[r], t.columns[c]}); it != latest.end()) t.cells[r][c].report = it->second;
        }
    }
    for (size_t c = 0; c < t.columns.size(); ++c) {
        std::vector<size_t> filled;
        for (size_t r = 0; r < t.rows.size(); ++r) {
            if (t.cells[r][c].report) filled.push_back(r);
        }
        std::stable_sort(filled.begin(), filled.end(), [&](size_t a, size_t b) {
            return t.cells[a][c].report->point > t.cells[b][c].report->point;
        });
        if (!filled.empty()) t.cells[filled[0]][c].mark = CellMark::best;
        if (filled.size() > 1) t.cells[filled[1]][c].mark = CellMark::second;
    }
    return t;
}

namespace {

std::string cell_text(const TableCell& cell, TableFormat format) {
    if (!cell.report) return "-";
    const std::string v = cell.report->cell();
    switch (cell.mark) {
        case CellMark::best: return "**" + v + "**";
        case CellMark::second: return format == TableFormat::markdown ? "<u>" + v + "</u>" : "__" + v + "__";
        case CellMark::none: break;
    }
    return v;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

}  // namespace

std::string render_table(const ReportTable& t, TableFormat format) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({t.corner});
    for (const auto& c : t.columns) grid.back().push_back(c);
    for (size_t r = 0; r < t.rows.size(); ++r) {
        grid.push_back({t.rows[r]});
        for (size_t c = 0; c < t.columns.size(); ++c) grid.back().push_back(cell_text(t.cells[r][c], format));
    }

    std::string out;
    if (format == TableFormat::csv) {
        for (const auto& row : grid) {
            for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(row[i]);
            out += '\n';
        }
        return out;
    }
    std::vector<size_t> width(grid.front().size(), 0);
    for (const auto& row : grid) {
        for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    auto line = [&](const std::vector<std::string>& row) {
        std::string s = format == TableFormat::markdown ? "| " : "";
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) s += format == TableFormat::markdown ? " | " : "  ";
            s += row[i] + std::string(width[i] - row[i].size(), ' ');
        }
        if (format == TableFormat::markdown) s += " |";
        while (format == TableFormat::text && !s.empty() && s.back() == ' ') s.pop_back();
        return s + '\n';
    };
    out += line(grid.front());
    if (format == TableFormat::markdown) {
        std::vector<std::string> rule;
        for (size_t w : width) rule.push_back(std::string(std::max<size_t>(w, 3), '-'));
        for (size_t i = 0; i < rule.size(); ++i) width[i] = std::max(width[i], rule[i].size());
        out = line(grid.front()) + line(rule);
    } else {
        size_t total = 0;
        for (size_t w : width) total += w;
        out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
    }
    for (size_t r = 1; r < grid.size(); ++r) out += line(grid[r]);
    return out;
}

std::string report(const RunLedger& ledger, const TableSpec& spec, TableFormat format) {
    return render_table(build_table(ledger.entries(), spec), format);
}

}  // namespace xfer::experiment
