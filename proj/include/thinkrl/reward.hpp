#pragma once

#include <optional>

#include "thinkrl/policy.hpp"
#include "thinkrl/task_world.hpp"

namespace thinkrl {

enum class Mode { Think, NoThink };

struct Parsed {
    Mode mode = Mode::NoThink;
    int answer = 0;
};

/// nullopt when the token sequence is not a legal response shape.
std::optional<Parsed> try_parse(const Trajectory& traj);

/// Same, but throws FormatViolation instead.
Parsed parse(const Trajectory& traj);

struct RewardRecord {
    Mode mode = Mode::NoThink;
    bool correct = false;
    double value = 0.0;
};

/// Mode-aware reward: no-think correct +2, think correct +1, think incorrect
/// 0, no-think incorrect -1. Rewards skipping the reasoning detour exactly
/// when it was safe to skip. Throws FormatViolation on malformed shape.
RewardRecord adaptive_reward(const Trajectory& traj, const Task& task);

/// Baseline mode-indifferent reward: +1 for a well-formed response, +1 for a
/// correct answer (so 0, 1 or 2). Malformed shapes score 0 instead of throwing.
RewardRecord format_accuracy_reward(const Trajectory& traj, const Task& task);

}  // namespace thinkrl
