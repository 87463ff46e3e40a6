// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace xfer::oracle {

double accuracy(const std::vector<metrics::PredictionRecord>& records) {
    int correct = 0;
    for (const auto& r : records) {
        size_t best = 0;
        for (size_t c = 1; c < r.scores.size(); ++c) {
            if (r.scores[c] > r.scores[best]) best = c;
        }
        if (static_cast<int>(best) == r.labels.at(0)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

double micro_f1(const std::vector<metrics::PredictionRecord>& records, double threshold) {
    long tp = 0, fp = 0, fn = 0;
    for (const auto& r : records) {
        for (size_t c = 0; c < r.scores.size(); ++c) {
            const bool truth = std::find(r.labels.begin(), r.labels.end(), static_cast<int>(c)) != r.labels.end();
            const bool pred = r.scores[c] > threshold;
            tp += pred && truth;
            fp += pred && !truth;
            fn += !pred && truth;
        }
    }
    if (tp + fp + fn == 0) return 0.0;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

bool violates_source_target(const StageIds& lineage, const std::string& target_id, const std::string& target_family) {
    const std::set<std::string> target{target_id, target_family.empty() ? target_id : target_family};
    for (const auto& [id, family] : lineage) {
        if (target.count(id) || target.count(family.empty() ? id : family)) return true;
    }
    return false;
}

std::string check_split(const data::DatasetManifest& m, const data::DatasetManifest& train,
                        const data::DatasetManifest& test, int64_t num, int64_t den) {
    std::multiset<std::string> all, parts;
    std::map<int, int64_t> n_class, n_train;
    for (const auto& r : m.records()) {
        all.insert(r.image_ref);
        ++n_class[r.labels.front()];
    }
    std::set<std::string> train_refs;
    for (const auto& r : train.records()) {
        parts.insert(r.image_ref);
        train_refs.insert(r.image_ref);
        ++n_train[r.labels.front()];
    }
    for (const auto& r : test.records()) {
        if (train_refs.count(r.image_ref)) return "record in both train and test: " + r.image_ref;
        parts.insert(r.image_ref);
    }
    if (all != parts) return "train and test do not cover the manifest exactly";
    for (const auto& [c, n] : n_class) {
        if (n_train[c] != num * n / den) {
            return "class " + std::to_string(c) + ": " + std::to_string(n_train[c]) + " train records, expected " +
                   std::to_string(num * n / den);
        }
    }
    if (train.classes() != m.classes() || test.classes() != m.classes()) return "class vocabulary changed";
    return {};
}

std::string normalize(const std::string& name) {
    size_t a = 0, b = name.size();
    while (a < b && std::isspace(static_cast<unsigned char>(name[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(name[b - 1]))) --b;
    std::string out;
    for (size_t i = a; i < b; ++i) {
        const char ch = name[i];
        out += (ch == ' ' || ch == '-') ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
    return out;
}

}  // namespace xfer::oracle
