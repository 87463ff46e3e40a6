// SPDX-License-Identifier: Apache-2.0

#include "xfer/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xfer/errors.hpp"
#include "xfer/random.hpp"

namespace xfer::metrics {

int argmax(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("empty score vector");
    int best = 0;
    for (size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[static_cast<size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

double accuracy(std::span<const PredictionRecord> records) {
    if (records.empty()) throw std::invalid_argument("accuracy of an empty record list");
    size_t correct = 0;
    for (const auto& r : records) {
        if (r.labels.empty()) throw std::invalid_argument(fmt::format("record '{}' has no label", r.id));
        if (argmax(r.scores) == r.labels.front()) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

double f1_multilabel(std::span<const PredictionRecord> records, double threshold) {
    if (records.empty()) throw std::invalid_argument("F1 of an empty record list");
    long tp = 0;
    long fp = 0;
    long fn = 0;
    std::vector<char> truth;
    for (const auto& r : records) {
        truth.assign(r.scores.size(), 0);
        for (int l : r.labels) {
            if (l < 0 || static_cast<size_t>(l) >= r.scores.size()) {
                throw std::invalid_argument(fmt::format("record '{}' label {} outside score vector", r.id, l));
            }
            truth[static_cast<size_t>(l)] = 1;
        }
        for (size_t c = 0; c < r.scores.size(); ++c) {
            const bool predicted = r.scores[c] > threshold;
            if (predicted && truth[c]) ++tp;
            if (predicted && !truth[c]) ++fp;
            if (!predicted && truth[c]) ++fn;
        }
    }
    const long denom = 2 * tp + fp + fn;
    // No positives anywhere: undefined, reported as 0 (scikit-learn's zero_division default).
    if (denom == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

void BootstrapSpec::validate() const {
    if (replicates < 1) throw ConfigError("bootstrap needs at least one replicate");
    if (!(low_percentile > 0.0 && low_percentile < high_percentile && high_percentile < 100.0)) {
        throw ConfigError(
            fmt::format("bootstrap percentiles must satisfy 0 < low < high < 100, got ({}, {})", low_percentile,
                        high_percentile));
    }
}

std::string format_cell(double point, double low, double high) {
    return fmt::format("{:.2f} ({:.2f}, {:.2f})", 100.0 * point, 100.0 * low, 100.0 * high);
}

std::string MetricReport::cell() const { return format_cell(point, ci_low, ci_high); }

void to_json(nlohmann::json& j, const BootstrapSpec& s) {
    j = {{"replicates", s.replicates},
         {"low_percentile", s.low_percentile},
         {"high_percentile", s.high_percentile},
         {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, BootstrapSpec& s) {
    s.replicates = j.at("replicates").get<int>();
    s.low_percentile = j.at("low_percentile").get<double>();
    s.high_percentile = j.at("high_percentile").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
}

void to_json(nlohmann::json& j, const MetricReport& r) {
    j = {{"metric", r.metric},   {"point", r.point},   {"ci_low", r.ci_low},       {"ci_high", r.ci_high},
         {"n_test", r.n_test},   {"cell", r.cell()},   {"bootstrap", r.bootstrap}, {"details", r.details}};
}

void from_json(const nlohmann::json& j, MetricReport& r) {
    r.metric = j.at("metric").get<std::string>();
    r.point = j.at("point").get<double>();
    r.ci_low = j.at("ci_low").get<double>();
    r.ci_high = j.at("ci_high").get<double>();
    r.n_test = j.at("n_test").get<size_t>();
    r.bootstrap = j.at("bootstrap").get<BootstrapSpec>();
    r.details = j.value("details", nlohmann::json::object());
}

double percentile(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("percentile of an empty sample");
    if (sorted.size() == 1) return sorted.front();
    const double pos = std::clamp(p, 0.0, 100.0) / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<double> bootstrap_distribution(std::span<const PredictionRecord> records, const MetricFn& metric_fn,
                                           const BootstrapSpec& spec) {
    spec.validate();
    if (records.empty()) throw std::invalid_argument("bootstrap of an empty record list");
    const size_t n = records.size();
    std::vector<double> stats(static_cast<size_t>(spec.replicates));
    std::vector<PredictionRecord> sample(n);
    for (int r = 0; r < spec.replicates; ++r) {
        Rng rng(derive_seed(spec.seed, {static_cast<uint64_t>(r)}));
        for (size_t i = 0; i < n; ++i) sample[i] = records[rng.uniform_index(n)];
        try {
            stats[static_cast<size_t>(r)] = metric_fn(sample);
        } catch (const std::exception& e) {
            throw std::runtime_error(fmt::format("bootstrap replicate {}: {}", r, e.what()));
        }
    }
    return stats;
}

MetricReport bootstrap_ci(std::span<const PredictionRecord> records, const MetricFn& metric_fn,
                          const BootstrapSpec& spec, const std::string& metric_name) {
    MetricReport report;
    report.metric = metric_name;
    report.bootstrap = spec;
    report.n_test = records.size();
    std::vector<double> stats = bootstrap_distribution(records, metric_fn, spec);
    report.point = metric_fn(records);
    std::sort(stats.begin(), stats.end());
    report.ci_low = percentile(stats, spec.low_percentile);
    report.ci_high = percentile(stats, spec.high_percentile);
    return report;
}

MetricReport accuracy_report(std::span<const PredictionRecord> records, const BootstrapSpec& spec) {
    MetricReport r = bootstrap_ci(records, [](auto rs) { return accuracy(rs); }, spec, "accuracy");
    r.details = {{"tie_break", "lowest_index"}};
    return r;
}

MetricReport f1_report(std::span<const PredictionRecord> records, const BootstrapSpec& spec, double threshold) {
    MetricReport r = bootstrap_ci(records, [threshold](auto rs) { return f1_multilabel(rs, threshold); }, spec, "f1");
    r.details = {{"averaging", "micro"}, {"threshold", threshold}, {"decision", "score > threshold"}};
    return r;
}

}  // namespace xfer::metrics
