#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "thinkrl/calibration.hpp"
#include "thinkrl/rl.hpp"
#include "thinkrl/sft.hpp"
#include "thinkrl/task_world.hpp"

namespace thinkrl {

/// Everything a run needs, resolved from a flat key = value config file.
/// One global seed; each stage derives its own streams from it by label.
struct RunConfig {
    std::uint64_t seed = 7;

    WorldConfig world{};        // world.seed is derived, not a config key
    TierParams tiers{};
    int tier_runs = 8;

    double sft_lr_coarse = 0.5;
    double sft_lr_precise = 0.05;
    double sft_precise_fraction = 0.125;  // calibrated subset feeding the precise corpus

    int filter_samples = 8;

    TrainConfig train{};        // train.seed is derived, not a config key

    int eval_samples_per_task = 1;

    std::vector<std::string> stages = {
        "gen-tasks", "calibrate", "sft", "filter",
        "train-agrpo", "eval", "compare-modes", "report"};

    void validate() const;  // throws ConfigError naming the violated bound
};

/// Strict parser: '#' comments, blank lines, key = value otherwise. Unknown
/// or duplicate keys and malformed values are ConfigErrors; nothing runs
/// after a bad config.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& file);

/// Every key with its resolved value, sorted, one per line. Feeds the run
/// hash and is written into the run directory for reproducibility.
std::string canonical_config(const RunConfig& cfg);

/// 16 hex digits over the canonical form.
std::string config_hash(const RunConfig& cfg);

}  // namespace thinkrl
