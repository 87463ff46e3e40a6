// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace xfer::train {

// Linear warmup to peak_lr, then a step decay by decay_factor at the start of
// each decay epoch. Presets: 100 epochs, batch 100, 5 warmup epochs, decay by
// 0.2 at epochs 50/70/90; peak 3e-3 from scratch, 3e-4 when fine-tuning.
struct ScheduleSpec {
    int total_epochs = 100;
    int batch_size = 100;
    int warmup_epochs = 5;
    double peak_lr = 3e-3;
    std::vector<int> decay_epochs{50, 70, 90};
    double decay_factor = 0.2;
    std::string optimizer = "adam";

    static ScheduleSpec scratch();
    static ScheduleSpec finetune();
    static ScheduleSpec preset(const std::string& name);

    // Same shape compressed to `epochs`: warmup and decay epochs keep their
    // relative position (5/50/70/90 of 100).
    ScheduleSpec scaled_to(int epochs) const;

    void validate() const;
    bool operator==(const ScheduleSpec&) const = default;
};

void to_json(nlohmann::json& j, const ScheduleSpec& s);
void from_json(const nlohmann::json& j, ScheduleSpec& s);

// Learning rate for optimizer step `step_in_epoch` of `epoch`. During warmup
// the rate rises per step from peak/(warmup*steps_per_epoch) to peak.
double lr_at(const ScheduleSpec& schedule, int epoch, int step_in_epoch, int steps_per_epoch);

}  // namespace xfer::train
