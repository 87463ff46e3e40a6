// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "xfer/image_store.hpp"
#include "xfer/metrics.hpp"
#include "xfer/model_zoo.hpp"
#include "xfer/run_ledger.hpp"
#include "xfer/schedule.hpp"
#include "xfer/transfer.hpp"

namespace xfer::experiment {

enum class ConfigKind { pretrain, adapt, transfer };

std::string to_string(ConfigKind k);
ConfigKind parse_config_kind(const std::string& s);

struct SourceSpec {
    // Path as written in the suite; may be produced by an earlier config.
    std::string checkpoint;
    // Declared lineage. Lets the source/target rule be checked before the
    // checkpoint exists; must match the checkpoint's own lineage at run time.
    std::optional<zoo::ModelLineage> lineage;
    // Row label in reports; defaults to the lineage description.
    std::string label;
};

// One experiment of a suite, with every default resolved. Paths are kept as
// written and resolved against the suite directory when run.
struct ExperimentConfig {
    std::string experiment_id;
    ConfigKind kind = ConfigKind::transfer;

    // pretrain: scratch backbone
    zoo::Architecture architecture = zoo::Architecture::toy_conv;
    int input_channels = 3;
    // adapt / transfer
    SourceSpec source;

    // Manifest path: the training set for pretrain/adapt, the target for transfer.
    std::string dataset;
    // Head output mode for pretrain/adapt; unset follows the manifest.
    std::optional<data::LabelMode> label_mode;
    transfer::TransferMode mode = transfer::TransferMode::feature_extraction;

    train::ScheduleSpec schedule = train::ScheduleSpec::finetune();
    transfer::ProbeSpec probe;
    int resize_edge = 292;
    int crop_edge = 256;

    uint64_t split_seed = 0;
    uint64_t train_seed = 0;
    uint64_t bootstrap_seed = 0;
    int bootstrap_replicates = 1000;

    // Checkpoint written by pretrain/adapt (and by ft transfers when set).
    std::string output;
    std::string output_dir = ".";

    bool uses_schedule() const;
    metrics::BootstrapSpec bootstrap() const;
    // Default checkpoint path when `output` is empty.
    std::string output_path() const;
    void validate() const;
};

// Typed view of one suite entry. Unknown keys are errors. Numbers may be
// written in any spelling; `schedule` and `probe` accept either a preset name
// or a mapping, `source` either a checkpoint path or a mapping.
ExperimentConfig config_from_json(const nlohmann::json& j, const nlohmann::json& defaults = nlohmann::json::object());

// Canonical form: every field explicit, enums spelled out.
nlohmann::json config_to_json(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

// YAML (or JSON, which is YAML) document -> JSON. Quoted scalars stay
// strings; plain scalars become integers, reals, booleans or null when they
// parse as such.
nlohmann::json yaml_to_json(const std::string& text, const std::string& origin = "<yaml>");

struct SuiteEntry {
    size_t index = 0;
    std::string experiment_id;
    std::optional<ExperimentConfig> config;
    std::string hash;
    // Set when the entry was rejected while loading.
    std::string error;
};

struct Suite {
    std::string name;
    std::filesystem::path base_dir;
    std::optional<std::filesystem::path> ledger;
    std::vector<SuiteEntry> entries;
};

// Each config is parsed and checked on its own; a bad entry is recorded with
// its error and does not stop the others from loading. A document that is not
// a suite at all throws ConfigError.
Suite parse_suite(const std::string& text, const std::filesystem::path& base_dir, const std::string& origin = "<suite>");
Suite load_suite(const std::filesystem::path& path);

// Load-time checks: manifest readable, label mode consistent, and the
// source/target rule against the declared lineage or, when it already
// exists, the checkpoint's lineage.
void validate_config(const ExperimentConfig& config, const std::filesystem::path& base_dir);

enum class RunStatus { completed, skipped, rejected, failed };

std::string to_string(RunStatus s);

struct ConfigRun {
    std::string experiment_id;
    std::string hash;
    RunStatus status = RunStatus::completed;
    std::string message;
    nlohmann::json entry;
};

struct SuiteOptions {
    std::filesystem::path ledger;
    bool force = false;
    const ImageStore* store = nullptr;
    std::function<void(const std::string&)> log;
    std::function<void(const train::EpochRecord&)> on_epoch;
};

struct SuiteResult {
    std::vector<ConfigRun> runs;

    size_t count(RunStatus s) const;
};

// Runs one config and returns its ledger entry without appending it.
nlohmann::json run_config(const ExperimentConfig& config, const std::filesystem::path& base_dir,
                          const SuiteOptions& options = {});

// File order, one ledger entry per completed config. Configs whose hash is
// already completed in the ledger are skipped unless `force`. Rejected
// (ConfigError) and failed configs are reported and never written. Holds the
// ledger lock for the whole run.
SuiteResult run_suite(const Suite& suite, const SuiteOptions& options);

// Reports --------------------------------------------------------------------

enum class TableFormat { text, markdown, csv };

TableFormat parse_table_format(const std::string& s);

struct TableSpec {
    ConfigKind kind = ConfigKind::transfer;
    std::optional<transfer::TransferMode> mode;
    // Explicit row/column order; empty means order of first appearance.
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::string corner = "Source";
};

enum class CellMark { none, best, second };

struct TableCell {
    std::optional<metrics::MetricReport> report;
    CellMark mark = CellMark::none;
};

struct ReportTable {
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::vector<std::vector<TableCell>> cells;  // [row][column]
    std::string corner = "Source";
};

// Latest completed entry per (row, column) wins. Per column the highest point
// estimate is marked best and the runner-up second; ties go to the earlier row.
ReportTable build_table(const std::vector<nlohmann::json>& entries, const TableSpec& spec = {});

// Cells read "value (low, high)" in percent; missing cells read "-". Best is
// wrapped in ** and second in __ (text, csv) or <u></u> (markdown).
std::string render_table(const ReportTable& table, TableFormat format = TableFormat::text);

std::string report(const RunLedger& ledger, const TableSpec& spec = {}, TableFormat format = TableFormat::text);

}  // namespace xfer::experiment
