#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thinkrl/policy.hpp"
#include "thinkrl/task_world.hpp"

namespace thinkrl {

/// Aggregate metrics for one difficulty level ("L1".."L5") or "ALL".
struct EvalRow {
    std::string level;
    double acc = 0.0;
    double think_rate = 0.0;
    int n = 0;                    // scored samples at this level
    double mean_trace_len = 0.0;  // reasoning tokens per response
};

/// Unforced (or force-mode) evaluation: samples_per_task responses per task,
/// one row per populated level in L1..L5 order plus an ALL row whose fields
/// are the n-weighted means. Tasks must carry levels (InputError lists ids).
std::vector<EvalRow> evaluate(const PolicyParams& params,
                              const std::vector<Task>& tasks,
                              int samples_per_task, std::uint64_t seed,
                              std::optional<ModeForce> force = std::nullopt);

struct ModeComparison {
    std::vector<EvalRow> all_think;
    std::vector<EvalRow> all_nothink;
    std::vector<EvalRow> adaptive;
};

/// Forced-think, forced-no-think, and unforced tables over the same tasks.
ModeComparison compare_modes(const PolicyParams& params,
                             const std::vector<Task>& tasks,
                             int samples_per_task, std::uint64_t seed);

struct FamilySummary {
    double acc = 0.0;
    double think_rate = 0.0;
    int n = 0;
};

/// Easy/hard breakdown of the same unforced evaluation; used for reporting
/// the adaptivity split directly.
std::map<Family, FamilySummary> evaluate_by_family(const PolicyParams& params,
                                                   const std::vector<Task>& tasks,
                                                   int samples_per_task,
                                                   std::uint64_t seed);

/// CSV with header level,acc,think_rate,n,mean_trace_len; numbers in
/// shortest round-trip form so identical inputs yield identical bytes.
void write_eval_csv(const std::vector<EvalRow>& rows,
                    const std::filesystem::path& file);
std::vector<EvalRow> read_eval_csv(const std::filesystem::path& file);

}  // namespace thinkrl
