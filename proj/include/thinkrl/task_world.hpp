#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thinkrl/rng.hpp"

namespace thinkrl {

enum class Family { Easy, Hard };

/// Calibrated difficulty level, easiest to hardest.
enum class Level { L1, L2, L3, L4, L5 };

std::string to_string(Family f);
std::string to_string(Level l);
Family family_from_string(const std::string& s);
Level level_from_string(const std::string& s);

/// Shared table dimensions: number of coarse bins, fine values, answers.
struct WorldDims {
    int n_coarse = 8;
    int n_fine = 4;
    int n_answers = 4;

    bool operator==(const WorldDims&) const = default;
};

/// One synthetic task. The observable features are (coarse, fine); the answer
/// is derivable from them, so an oracle reasoning trace always exists.
///   easy: answer depends on coarse alone (per-bin constant), fine is 0.
///   hard: answer = (coarse + fine) mod n_answers, so any responder that sees
///         only coarse is capped strictly below accuracy 1 when F, K >= 2.
struct Task {
    std::string id;
    int coarse = 0;
    int fine = 0;
    int answer = 0;
    Family family = Family::Easy;
    std::optional<Level> level;
};

struct WorldConfig {
    int n_coarse = 8;
    int n_fine = 4;
    int n_answers = 4;
    int n_tasks = 400;
    double easy_fraction = 0.5;
    std::uint64_t seed = 7;

    WorldDims dims() const { return {n_coarse, n_fine, n_answers}; }
    void validate() const;  // throws ConfigError naming the violated bound
};

/// Deterministic world generation. Easy count = round(easy_fraction * n_tasks).
/// Easy and hard tasks occupy disjoint coarse-bin ranges (easy bins first)
/// whenever n_coarse >= 2 and both families are present, so a policy whose
/// mode choice conditions on coarse can in principle treat the families
/// differently. Easy answers are assigned per coarse bin by seeded draw; hard
/// tasks cycle through (coarse, fine) cells so every hard bin covers all fine
/// values once there are enough tasks.
std::vector<Task> generate_world(const WorldConfig& cfg);

/// Ground-truth answer for a task.
int oracle_answer(const Task& task);

/// Reference responders of increasing capability, used for difficulty
/// calibration. M1 is weak, M2 sees coarse features only, M3 is strong.
enum class Tier { M1, M2, M3 };

struct TierParams {
    double p1_easy = 0.55;  // M1 answers correctly with this probability on easy
    double p1_hard = 0.0;   // ... and with this probability on hard
    double p2_easy = 0.95;  // M2 accuracy on easy tasks
    double p3 = 0.9;        // M3 accuracy on all tasks

    void validate() const;
};

/// One simulated answer from a tier responder.
///   M1: correct w.p. p1(family), otherwise uniform over all K answers.
///   M2: easy tasks correct w.p. p2_easy (otherwise a wrong answer);
///       hard tasks uniform over the answers consistent with the coarse bin.
///   M3: correct w.p. p3, otherwise a wrong answer.
int tier_sample(Tier tier, const Task& task, const WorldDims& dims,
                const TierParams& params, RngStream& rng);

/// Line-delimited JSON, one task per line, fixed field order
/// {"id","coarse","fine","answer","family","level"}; level is null when the
/// task has not been calibrated.
void save_tasks(const std::vector<Task>& tasks, const std::filesystem::path& file);

/// Strict loader: parse errors carry the line number, unknown fields are
/// rejected, missing fields are named.
std::vector<Task> load_tasks(const std::filesystem::path& file);

}  // namespace thinkrl
