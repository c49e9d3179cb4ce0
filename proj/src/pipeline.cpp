#include "thinkrl/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

#include "thinkrl/calibration.hpp"
#include "thinkrl/common.hpp"
#include "thinkrl/eval.hpp"
#include "thinkrl/rl.hpp"
#include "thinkrl/sft.hpp"

namespace thinkrl {

using ordered_json = nlohmann::ordered_json;

RunPaths run_paths_for(const RunConfig& cfg, const std::filesystem::path& out_root) {
    RunPaths p;
    p.dir = out_root / (config_hash(cfg) + "-s" + std::to_string(cfg.seed));
    return p;
}

namespace {

std::vector<Task> load_calibrated(const RunPaths& paths) {
    return load_tasks(paths.tasks_calibrated());
}

/// Final parameters for evaluation: prefer the adaptive run, then the vanilla
/// run, then the supervised checkpoint.
PolicyParams load_final_params(const RunPaths& paths) {
    namespace fs = std::filesystem;
    for (const auto& file :
         {paths.agrpo_params(), paths.grpo_params(), paths.sft_params()}) {
        if (fs::exists(file)) return load_params(file);
    }
    throw InputError("no parameter checkpoint in " + paths.dir.string() +
                     "; run the sft stage first");
}

std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
                                      rng.uniform_int(static_cast<int>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

void stage_gen_tasks(const RunConfig& cfg, const RunPaths& paths) {
    save_tasks(generate_world(cfg.world), paths.tasks());
}

void stage_calibrate(const RunConfig& cfg, const RunPaths& paths) {
    const auto tasks = load_tasks(paths.tasks());
    CalibrationConfig ccfg;
    ccfg.tiers = cfg.tiers;
    ccfg.runs = cfg.tier_runs;
    ccfg.seed = cfg.seed;
    auto [labeled, report] = calibrate(tasks, cfg.world.dims(), ccfg);
    save_tasks(labeled, paths.tasks_calibrated());
    save_calibration_report(report, paths.calibration_report());
}

void stage_sft(const RunConfig& cfg, const RunPaths& paths) {
    const auto tasks = load_calibrated(paths);

    RngStream coarse_rng = SeedSeq(cfg.seed).mix("corpus-coarse").stream();
    const auto coarse = build_coarse_corpus(tasks, coarse_rng);

    const std::size_t n_precise = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(cfg.sft_precise_fraction * tasks.size())));
    RngStream subset_rng = SeedSeq(cfg.seed).mix("precise-subset").stream();
    auto order = shuffled_indices(tasks.size(), subset_rng);
    order.resize(std::min(n_precise, order.size()));
    std::sort(order.begin(), order.end());
    std::vector<Task> subset;
    for (std::size_t i : order) subset.push_back(tasks[i]);
    RngStream precise_rng = SeedSeq(cfg.seed).mix("corpus-precise").stream();
    const auto precise = build_precise_corpus(subset, precise_rng);

    save_corpus(coarse, paths.corpus_coarse());
    save_corpus(precise, paths.corpus_precise());

    SftConfig scfg;
    scfg.lr_coarse = cfg.sft_lr_coarse;
    scfg.lr_precise = cfg.sft_lr_precise;
    scfg.seed = cfg.seed;
    const SftResult res = train_sft(PolicyParams::zeros(cfg.world.dims()), tasks,
                                    coarse, precise, scfg);
    save_params(res.params, paths.sft_params());

    ordered_json log = ordered_json::array();
    for (const SftPhaseLog& p : res.log) {
        ordered_json row;
        row["phase"] = p.phase;
        row["loss_before"] = p.loss_before;
        row["loss_after"] = p.loss_after;
        log.push_back(row);
    }
    std::ofstream out(paths.sft_log());
    if (!out) throw InputError("cannot open " + paths.sft_log().string());
    out << log.dump(2) << '\n';
}

void stage_filter(const RunConfig& cfg, const RunPaths& paths) {
    const auto tasks = load_calibrated(paths);
    const auto params = load_params(paths.sft_params());
    save_tasks(filter_rl_data(params, tasks, cfg.filter_samples, cfg.seed),
               paths.rl_tasks());
}

void stage_train(const RunConfig& cfg, const RunPaths& paths, bool adaptive) {
    const auto tasks = load_tasks(paths.rl_tasks());
    const auto params = load_params(paths.sft_params());
    const TrainResult res = adaptive ? train_agrpo(params, tasks, cfg.train)
                                     : train_grpo_vanilla(params, tasks, cfg.train);
    save_params(res.params, adaptive ? paths.agrpo_params() : paths.grpo_params());
    save_training_log(res.log, adaptive ? paths.agrpo_log() : paths.grpo_log());
}

void stage_eval(const RunConfig& cfg, const RunPaths& paths) {
    const auto tasks = load_calibrated(paths);
    const auto params = load_final_params(paths);
    write_eval_csv(
        evaluate(params, tasks, cfg.eval_samples_per_task, cfg.seed),
        paths.eval_csv());
}

void stage_compare_modes(const RunConfig& cfg, const RunPaths& paths) {
    const auto tasks = load_calibrated(paths);
    const auto params = load_final_params(paths);
    const ModeComparison cmp =
        compare_modes(params, tasks, cfg.eval_samples_per_task, cfg.seed);
    write_eval_csv(cmp.all_think, paths.eval_all_think());
    write_eval_csv(cmp.all_nothink, paths.eval_all_nothink());
    write_eval_csv(cmp.adaptive, paths.eval_adaptive());
}

ordered_json json_file_or_null(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) return nullptr;
    std::ifstream in(file);
    return ordered_json::parse(in);
}

ordered_json last_log_row_or_null(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) return nullptr;
    const auto log = load_training_log(file);
    if (log.empty()) return nullptr;
    const IterationLog& row = log.back();
    ordered_json j;
    j["iter"] = row.iter;
    j["mean_reward"] = row.mean_reward;
    j["think_rate"] = row.think_rate;
    j["acc"] = row.acc;
    j["n_groups"] = row.n_groups;
    j["n_rejected_halves"] = row.n_rejected_halves;
    return j;
}

ordered_json eval_rows_or_null(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) return nullptr;
    ordered_json rows = ordered_json::array();
    for (const EvalRow& r : read_eval_csv(file)) {
        ordered_json j;
        j["level"] = r.level;
        j["acc"] = r.acc;
        j["think_rate"] = r.think_rate;
        j["n"] = r.n;
        j["mean_trace_len"] = r.mean_trace_len;
        rows.push_back(j);
    }
    return rows;
}

void stage_report(const RunConfig& cfg, const RunPaths& paths) {
    ordered_json j;
    j["config_hash"] = config_hash(cfg);
    j["seed"] = cfg.seed;
    j["calibration"] = json_file_or_null(paths.calibration_report());
    j["sft"] = json_file_or_null(paths.sft_log());
    j["agrpo_final"] = last_log_row_or_null(paths.agrpo_log());
    j["grpo_final"] = last_log_row_or_null(paths.grpo_log());
    j["eval"] = eval_rows_or_null(paths.eval_csv());
    ordered_json cmp;
    cmp["all_think"] = eval_rows_or_null(paths.eval_all_think());
    cmp["all_nothink"] = eval_rows_or_null(paths.eval_all_nothink());
    cmp["adaptive"] = eval_rows_or_null(paths.eval_adaptive());
    j["mode_comparison"] = cmp;
    std::ofstream out(paths.report());
    if (!out) throw InputError("cannot open " + paths.report().string());
    out << j.dump(2) << '\n';
}

}  // namespace

void run_stage(const std::string& name, const RunConfig& cfg, const RunPaths& paths) {
    if (name == "gen-tasks") stage_gen_tasks(cfg, paths);
    else if (name == "calibrate") stage_calibrate(cfg, paths);
    else if (name == "sft") stage_sft(cfg, paths);
    else if (name == "filter") stage_filter(cfg, paths);
    else if (name == "train-agrpo") stage_train(cfg, paths, true);
    else if (name == "train-grpo") stage_train(cfg, paths, false);
    else if (name == "eval") stage_eval(cfg, paths);
    else if (name == "compare-modes") stage_compare_modes(cfg, paths);
    else if (name == "report") stage_report(cfg, paths);
    else throw ConfigError("unknown stage '" + name + "'");
}

int run_pipeline(const RunConfig& cfg, const std::filesystem::path& out_root) {
    cfg.validate();
    const RunPaths paths = run_paths_for(cfg, out_root);
    std::filesystem::create_directories(paths.dir);
    std::filesystem::remove(paths.failure_marker());
    {
        std::ofstream out(paths.resolved_config());
        if (!out)
            throw InputError("cannot open " + paths.resolved_config().string());
        out << canonical_config(cfg);
    }
    for (const std::string& stage : cfg.stages) {
        try {
            run_stage(stage, cfg, paths);
        } catch (const std::exception& e) {
            std::ofstream marker(paths.failure_marker());
            marker << stage << ": " << e.what() << '\n';
            std::cerr << "stage " << stage << " failed: " << e.what() << '\n';
            return 1;
        }
    }
    return 0;
}

}  // namespace thinkrl
