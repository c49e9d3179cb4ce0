#include "thinkrl/calibration.hpp"

#include <fstream>

#include <json.hpp>

#include "thinkrl/common.hpp"

namespace thinkrl {

using ordered_json = nlohmann::ordered_json;

void CalibrationConfig::validate() const {
    tiers.validate();
    if (runs < 1) throw ConfigError("calibration.runs must be >= 1");
}

std::vector<TierCounts> run_tiers(const std::vector<Task>& tasks,
                                  const WorldDims& dims,
                                  const CalibrationConfig& cfg) {
    cfg.validate();
    std::vector<TierCounts> out;
    out.reserve(tasks.size());
    for (const Task& task : tasks) {
        TierCounts c;
        c.task_id = task.id;
        struct Probe {
            Tier tier;
            const char* name;
            int* count;
        };
        const Probe probes[] = {
            {Tier::M1, "M1", &c.m1}, {Tier::M2, "M2", &c.m2}, {Tier::M3, "M3", &c.m3}};
        for (const Probe& p : probes) {
            for (int run = 0; run < cfg.runs; ++run) {
                RngStream rng =
                    SeedSeq(cfg.seed).mix(p.name).mix(task.id).mix(run).stream();
                if (tier_sample(p.tier, task, dims, cfg.tiers, rng) ==
                    oracle_answer(task))
                    ++*p.count;
            }
        }
        out.push_back(std::move(c));
    }
    return out;
}

// First matching rule wins; a task matching none of the five patterns falls
// back to the middle level and is reported via `unmatched`.
Level assign_level(const TierCounts& c, bool* unmatched) {
    if (unmatched) *unmatched = false;
    if (c.m1 > 6) return Level::L1;
    if (c.m1 > 3 && c.m2 > 6) return Level::L2;
    if (c.m1 < 3 && c.m2 > 7) return Level::L3;
    if (c.m2 < 3 && c.m3 > 6) return Level::L4;
    if (c.m3 < 3) return Level::L5;
    if (unmatched) *unmatched = true;
    return Level::L3;
}

std::pair<std::vector<Task>, CalibrationReport> calibrate(
    const std::vector<Task>& tasks, const WorldDims& dims,
    const CalibrationConfig& cfg) {
    const std::vector<TierCounts> counts = run_tiers(tasks, dims, cfg);
    std::vector<Task> labeled = tasks;
    CalibrationReport report;
    std::array<double, 5> m1_sum{};
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        bool fell_through = false;
        const Level lvl = assign_level(counts[i], &fell_through);
        labeled[i].level = lvl;
        const int li = static_cast<int>(lvl);
        ++report.level_counts[li];
        m1_sum[li] += static_cast<double>(counts[i].m1) / cfg.runs;
        if (fell_through) ++report.unmatched;
    }
    for (int li = 0; li < 5; ++li)
        if (report.level_counts[li] > 0)
            report.m1_acc_by_level[li] = m1_sum[li] / report.level_counts[li];
    return {std::move(labeled), report};
}

void save_calibration_report(const CalibrationReport& report,
                             const std::filesystem::path& file) {
    ordered_json j;
    ordered_json counts = ordered_json::object();
    ordered_json accs = ordered_json::array();
    for (int li = 0; li < 5; ++li) {
        counts[to_string(static_cast<Level>(li))] = report.level_counts[li];
        if (report.m1_acc_by_level[li])
            accs.push_back(*report.m1_acc_by_level[li]);
        else
            accs.push_back(nullptr);
    }
    j["levels"] = counts;
    j["m1_acc_by_level"] = accs;
    j["unmatched"] = report.unmatched;
    std::ofstream out(file);
    if (!out) throw InputError("cannot open " + file.string() + " for writing");
    out << j.dump(2) << '\n';
}

}  // namespace thinkrl
