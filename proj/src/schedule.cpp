// SPDX-License-Identifier: Apache-2.0

#include "xfer/schedule.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

#include "xfer/errors.hpp"

namespace xfer::train {

ScheduleSpec ScheduleSpec::scratch() { return ScheduleSpec{}; }

ScheduleSpec ScheduleSpec::finetune() {
    ScheduleSpec s;
    s.peak_lr = 3e-4;
    return s;
}

ScheduleSpec ScheduleSpec::preset(const std::string& name) {
    if (name == "scratch") return scratch();
    if (name == "finetune" || name == "fine_tune") return finetune();
    throw ConfigError(fmt::format("unknown schedule preset '{}' (expected scratch|finetune)", name));
}

ScheduleSpec ScheduleSpec::scaled_to(int epochs) const {
    if (epochs < 4) throw ConfigError("a scaled schedule needs at least 4 epochs");
    ScheduleSpec s = *this;
    const double ratio = static_cast<double>(epochs) / total_epochs;
    s.total_epochs = epochs;
    s.warmup_epochs = warmup_epochs == 0 ? 0 : std::max(1, static_cast<int>(std::floor(warmup_epochs * ratio)));
    s.decay_epochs.clear();
    int prev = s.warmup_epochs;
    for (int d : decay_epochs) {
        int e = static_cast<int>(std::lround(d * ratio));
        e = std::clamp(e, prev + 1, epochs - 1);
        if (!s.decay_epochs.empty() && e <= s.decay_epochs.back()) continue;
        s.decay_epochs.push_back(e);
        prev = e;
    }
    s.validate();
    return s;
}

void ScheduleSpec::validate() const {
    if (total_epochs <= 0) throw ConfigError("total_epochs must be positive");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (warmup_epochs < 0) throw ConfigError("warmup_epochs must be non-negative");
    if (!(peak_lr > 0.0)) throw ConfigError("peak_lr must be positive");
    if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw ConfigError("decay_factor must lie in (0, 1)");
    if (!std::is_sorted(decay_epochs.begin(), decay_epochs.end()) ||
        std::adjacent_find(decay_epochs.begin(), decay_epochs.end()) != decay_epochs.end()) {
        throw ConfigError("decay epochs must be strictly increasing");
    }
    if (!decay_epochs.empty() && !(warmup_epochs < decay_epochs.front() && decay_epochs.back() < total_epochs)) {
        throw ConfigError(fmt::format("schedule needs warmup ({}) < first decay ({}) <= last decay ({}) < total ({})",
                                      warmup_epochs, decay_epochs.front(), decay_epochs.back(), total_epochs));
    }
    if (decay_epochs.empty() && warmup_epochs >= total_epochs) throw ConfigError("warmup covers the whole schedule");
    if (optimizer != "adam") throw ConfigError(fmt::format("unsupported optimizer '{}'", optimizer));
}

void to_json(nlohmann::json& j, const ScheduleSpec& s) {
    j = {{"total_epochs", s.total_epochs}, {"batch_size", s.batch_size},     {"warmup_epochs", s.warmup_epochs},
         {"peak_lr", s.peak_lr},           {"decay_epochs", s.decay_epochs}, {"decay_factor", s.decay_factor},
         {"optimizer", s.optimizer}};
}

void from_json(const nlohmann::json& j, ScheduleSpec& s) {
    s.total_epochs = j.at("total_epochs").get<int>();
    s.batch_size = j.at("batch_size").get<int>();
    s.warmup_epochs = j.at("warmup_epochs").get<int>();
    s.peak_lr = j.at("peak_lr").get<double>();
    s.decay_epochs = j.at("decay_epochs").get<std::vector<int>>();
    s.decay_factor = j.at("decay_factor").get<double>();
    s.optimizer = j.value("optimizer", std::string("adam"));
}

double lr_at(const ScheduleSpec& s, int epoch, int step_in_epoch, int steps_per_epoch) {
    if (epoch < 0 || epoch >= s.total_epochs) {
        throw std::out_of_range(fmt::format("epoch {} outside [0, {})", epoch, s.total_epochs));
    }
    if (steps_per_epoch <= 0 || step_in_epoch < 0 || step_in_epoch >= steps_per_epoch) {
        throw std::out_of_range(fmt::format("step {} outside [0, {})", step_in_epoch, steps_per_epoch));
    }
    if (epoch < s.warmup_epochs) {
        const double step = static_cast<double>(epoch) * steps_per_epoch + step_in_epoch + 1;
        return s.peak_lr * step / (static_cast<double>(s.warmup_epochs) * steps_per_epoch);
    }
    // cumulative product, one factor per decay epoch already reached
    double lr = s.peak_lr;
    for (int d : s.decay_epochs) {
        if (d <= epoch) lr *= s.decay_factor;
    }
    return lr;
}

}  // namespace xfer::train
