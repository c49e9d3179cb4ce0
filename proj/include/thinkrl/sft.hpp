#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "thinkrl/policy.hpp"
#include "thinkrl/task_world.hpp"

namespace thinkrl {

enum class CorpusTier { Coarse, Precise };

std::string to_string(CorpusTier t);
CorpusTier corpus_tier_from_string(const std::string& s);

/// One supervised example: the full target token sequence for a task
/// (mode token included, nothing forced).
struct SftExample {
    std::string task_id;
    Trajectory target;
    CorpusTier tier = CorpusTier::Coarse;
};

/// Coarse-stage corpus: one example per task, think:no-think = 2:1 with
/// rounding toward think, mode assigned by seeded shuffle without consulting
/// difficulty. Think targets carry the oracle reasoning trace (the task's
/// fine feature).
std::vector<SftExample> build_coarse_corpus(const std::vector<Task>& tasks,
                                            RngStream& rng);

/// Precise-stage corpus from calibrated tasks: L1-L2 become no-think targets,
/// L3-L5 think targets, then the larger side is subsampled by seeded draw so
/// the two sides are exactly 1:1. Tasks missing a level are an InputError
/// listing the offending ids.
std::vector<SftExample> build_precise_corpus(const std::vector<Task>& tasks,
                                             RngStream& rng);

/// Negative sum of target-token log-probabilities under params (mode token
/// included, unforced scoring).
double sft_loss(const PolicyParams& params, const Task& task,
                const SftExample& example);

struct SftConfig {
    // The coarse pass carries the bulk of the format/answer teaching; the
    // precise pass is a light refinement, mirroring the large/small corpus
    // imbalance this schedule is meant for.
    double lr_coarse = 0.5;
    double lr_precise = 0.05;
    std::uint64_t seed = 7;

    void validate() const;
};

struct SftPhaseLog {
    std::string phase;   // "coarse" or "precise"
    double loss_before;  // corpus mean loss entering the epoch
    double loss_after;   // corpus mean loss after the epoch
};

struct SftResult {
    PolicyParams params;
    std::vector<SftPhaseLog> log;
};

/// Exactly one shuffled epoch of per-example gradient descent over the coarse
/// corpus, then one over the precise corpus. Deterministic given cfg.seed.
SftResult train_sft(const PolicyParams& init, const std::vector<Task>& tasks,
                    const std::vector<SftExample>& coarse,
                    const std::vector<SftExample>& precise,
                    const SftConfig& cfg);

/// Line-delimited JSON, fixed field order
/// {"task_id","mode","reason","answer","tier"}; reason is null for no-think.
void save_corpus(const std::vector<SftExample>& corpus,
                 const std::filesystem::path& file);
std::vector<SftExample> load_corpus(const std::filesystem::path& file);

}  // namespace thinkrl
