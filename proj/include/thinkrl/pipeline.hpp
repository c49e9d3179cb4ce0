#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "thinkrl/config.hpp"

namespace thinkrl {

/// Artifact names inside a run directory. Stages communicate only through
/// these files, so each stage can also be run standalone on a directory.
struct RunPaths {
    std::filesystem::path dir;

    std::filesystem::path resolved_config() const { return dir / "config_resolved.txt"; }
    std::filesystem::path failure_marker() const { return dir / "FAILED"; }
    std::filesystem::path tasks() const { return dir / "tasks.jsonl"; }
    std::filesystem::path tasks_calibrated() const { return dir / "tasks_calibrated.jsonl"; }
    std::filesystem::path calibration_report() const { return dir / "calibration_report.json"; }
    std::filesystem::path corpus_coarse() const { return dir / "corpus_coarse.jsonl"; }
    std::filesystem::path corpus_precise() const { return dir / "corpus_precise.jsonl"; }
    std::filesystem::path sft_params() const { return dir / "sft_params.json"; }
    std::filesystem::path sft_log() const { return dir / "sft_log.json"; }
    std::filesystem::path rl_tasks() const { return dir / "rl_tasks.jsonl"; }
    std::filesystem::path agrpo_params() const { return dir / "agrpo_params.json"; }
    std::filesystem::path agrpo_log() const { return dir / "agrpo_log.jsonl"; }
    std::filesystem::path grpo_params() const { return dir / "grpo_params.json"; }
    std::filesystem::path grpo_log() const { return dir / "grpo_log.jsonl"; }
    std::filesystem::path eval_csv() const { return dir / "eval.csv"; }
    std::filesystem::path eval_all_think() const { return dir / "eval_all_think.csv"; }
    std::filesystem::path eval_all_nothink() const { return dir / "eval_all_nothink.csv"; }
    std::filesystem::path eval_adaptive() const { return dir / "eval_adaptive.csv"; }
    std::filesystem::path report() const { return dir / "report.json"; }
};

/// The run directory for a config under out_root: <config-hash>-s<seed>.
RunPaths run_paths_for(const RunConfig& cfg, const std::filesystem::path& out_root);

/// Executes one named stage against the artifacts in paths.dir. Valid names
/// are the entries of RunConfig::stages plus "train-grpo". Throws on failure.
void run_stage(const std::string& name, const RunConfig& cfg, const RunPaths& paths);

/// Runs cfg.stages in order inside the hash-named run directory. Identical
/// configs rerun to byte-identical artifacts. On a stage failure the partial
/// outputs stay in place, a FAILED marker names the stage, and the return
/// value is nonzero.
int run_pipeline(const RunConfig& cfg, const std::filesystem::path& out_root);

}  // namespace thinkrl
