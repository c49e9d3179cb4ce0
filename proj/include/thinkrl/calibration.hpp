#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thinkrl/task_world.hpp"

namespace thinkrl {

/// Correct-answer counts for one task across the tier responders.
struct TierCounts {
    std::string task_id;
    int m1 = 0;
    int m2 = 0;
    int m3 = 0;
};

struct CalibrationConfig {
    TierParams tiers{};
    int runs = 8;  // samples per (task, tier)
    std::uint64_t seed = 7;

    void validate() const;
};

/// Samples each tier `runs` times per task. Each draw gets its own stream
/// keyed by (seed, tier, task id, run index), so results do not depend on
/// task order.
std::vector<TierCounts> run_tiers(const std::vector<Task>& tasks,
                                  const WorldDims& dims,
                                  const CalibrationConfig& cfg);

/// First-match level cascade over the tier counts (thresholds out of 8 runs):
///   L1 if m1 > 6; else L2 if m1 > 3 and m2 > 6; else L3 if m1 < 3 and
///   m2 > 7; else L4 if m2 < 3 and m3 > 6; else L5 if m3 < 3; else L3.
/// The final arm is the fallback; *unmatched is set accordingly when given.
Level assign_level(const TierCounts& counts, bool* unmatched = nullptr);

struct CalibrationReport {
    std::array<int, 5> level_counts{};                      // tasks per L1..L5
    std::array<std::optional<double>, 5> m1_acc_by_level{}; // mean m1/runs, null if empty
    int unmatched = 0;                                      // fallback-assigned tasks
};

/// Runs the tiers and attaches a level to every task; returns the calibrated
/// copy plus the summary report.
std::pair<std::vector<Task>, CalibrationReport> calibrate(
    const std::vector<Task>& tasks, const WorldDims& dims,
    const CalibrationConfig& cfg);

/// JSON object {"levels":{"L1":..,..},"m1_acc_by_level":[..],"unmatched":..}.
void save_calibration_report(const CalibrationReport& report,
                             const std::filesystem::path& file);

}  // namespace thinkrl
