// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace xfer::metrics {

struct PredictionRecord {
    std::vector<double> scores;  // one per class
    std::vector<int> labels;     // true class index, or index set for multi-label
    std::string id;
};

// Fraction of records whose argmax score (ties -> lowest index) equals the
// first true label.
double accuracy(std::span<const PredictionRecord> records);

// Micro-averaged F1 = 2TP / (2TP + FP + FN) pooled over every (example, class)
// pair; class c is predicted when score > threshold (0.5 itself is negative).
double f1_multilabel(std::span<const PredictionRecord> records, double threshold = 0.5);

int argmax(std::span<const double> scores);

struct BootstrapSpec {
    int replicates = 1000;
    double low_percentile = 2.5;
    double high_percentile = 97.5;
    uint64_t seed = 0;

    void validate() const;
};

struct MetricReport {
    std::string metric;
    double point = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    size_t n_test = 0;
    BootstrapSpec bootstrap;
    // Free-form qualifiers, e.g. {"averaging": "micro", "threshold": 0.5}.
    nlohmann::json details = nlohmann::json::object();

    // "92.41 (92.27, 92.54)": percent with two decimals.
    std::string cell() const;
};

void to_json(nlohmann::json& j, const BootstrapSpec& s);
void from_json(const nlohmann::json& j, BootstrapSpec& s);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

std::string format_cell(double point, double low, double high);

// Linear interpolation between the closest order statistics of an ascending
// sample; p in [0, 100].
double percentile(std::span<const double> sorted, double p);

using MetricFn = std::function<double(std::span<const PredictionRecord>)>;

// Nonparametric percentile bootstrap. Replicate r resamples |records| items
// with replacement from a stream derived from (seed, r), so the result does
// not depend on evaluation order.
MetricReport bootstrap_ci(std::span<const PredictionRecord> records, const MetricFn& metric_fn,
                          const BootstrapSpec& spec, const std::string& metric_name = "metric");

// The replicate statistics themselves, in replicate order.
std::vector<double> bootstrap_distribution(std::span<const PredictionRecord> records, const MetricFn& metric_fn,
                                           const BootstrapSpec& spec);

MetricReport accuracy_report(std::span<const PredictionRecord> records, const BootstrapSpec& spec);
MetricReport f1_report(std::span<const PredictionRecord> records, const BootstrapSpec& spec, double threshold = 0.5);

}  // namespace xfer::metrics
