#include "thinkrl/eval.hpp"

#include <fstream>
#include <sstream>

#include "thinkrl/common.hpp"
#include "thinkrl/reward.hpp"

namespace thinkrl {

namespace {

const char* force_tag(std::optional<ModeForce> force) {
    if (!force) return "free";
    return *force == ModeForce::Think ? "think" : "nothink";
}

struct Tally {
    long n = 0;
    long correct = 0;
    long think = 0;
    long tokens = 0;

    void add(const Trajectory& traj, const Task& task) {
        ++n;
        const auto p = try_parse(traj);
        if (p && p->answer == oracle_answer(task)) ++correct;
        if (!traj.tokens.empty() && traj.tokens[0].kind == TokenKind::ModeThink)
            ++think;
        for (const Token& tok : traj.tokens)
            if (tok.kind == TokenKind::Reason) ++tokens;
    }

    EvalRow row(const std::string& label) const {
        EvalRow r;
        r.level = label;
        r.acc = static_cast<double>(correct) / static_cast<double>(n);
        r.think_rate = static_cast<double>(think) / static_cast<double>(n);
        r.n = static_cast<int>(n);
        r.mean_trace_len = static_cast<double>(tokens) / static_cast<double>(n);
        return r;
    }
};

}  // namespace

std::vector<EvalRow> evaluate(const PolicyParams& params,
                              const std::vector<Task>& tasks,
                              int samples_per_task, std::uint64_t seed,
                              std::optional<ModeForce> force) {
    if (samples_per_task < 1) throw ConfigError("samples_per_task must be >= 1");
    if (tasks.empty()) throw InputError("evaluation needs at least one task");
    std::string unlabeled;
    for (const Task& task : tasks)
        if (!task.level) unlabeled += (unlabeled.empty() ? "" : ", ") + task.id;
    if (!unlabeled.empty())
        throw InputError("tasks missing difficulty levels: " + unlabeled);

    std::array<Tally, 5> by_level{};
    Tally all;
    const char* tag = force_tag(force);
    for (const Task& task : tasks) {
        for (int s = 0; s < samples_per_task; ++s) {
            RngStream rng =
                SeedSeq(seed).mix("eval").mix(tag).mix(task.id).mix(s).stream();
            const Trajectory traj = sample_trajectory(params, task, force, rng);
            all.add(traj, task);
            by_level[static_cast<int>(*task.level)].add(traj, task);
        }
    }

    std::vector<EvalRow> rows;
    for (int li = 0; li < 5; ++li)
        if (by_level[li].n > 0)
            rows.push_back(by_level[li].row(to_string(static_cast<Level>(li))));
    rows.push_back(all.row("ALL"));
    return rows;
}

ModeComparison compare_modes(const PolicyParams& params,
                             const std::vector<Task>& tasks,
                             int samples_per_task, std::uint64_t seed) {
    ModeComparison cmp;
    cmp.all_think = evaluate(params, tasks, samples_per_task, seed, ModeForce::Think);
    cmp.all_nothink =
        evaluate(params, tasks, samples_per_task, seed, ModeForce::NoThink);
    cmp.adaptive = evaluate(params, tasks, samples_per_task, seed, std::nullopt);
    return cmp;
}

std::map<Family, FamilySummary> evaluate_by_family(const PolicyParams& params,
                                                   const std::vector<Task>& tasks,
                                                   int samples_per_task,
                                                   std::uint64_t seed) {
    if (samples_per_task < 1) throw ConfigError("samples_per_task must be >= 1");
    if (tasks.empty()) throw InputError("evaluation needs at least one task");

    std::map<Family, Tally> tallies;
    for (const Task& task : tasks) {
        for (int s = 0; s < samples_per_task; ++s) {
            // Same streams as the unforced evaluate() so both views describe
            // the same sampled behavior.
            RngStream rng =
                SeedSeq(seed).mix("eval").mix("free").mix(task.id).mix(s).stream();
            const Trajectory traj =
                sample_trajectory(params, task, std::nullopt, rng);
            tallies[task.family].add(traj, task);
        }
    }

    std::map<Family, FamilySummary> out;
    for (const auto& [family, tally] : tallies) {
        FamilySummary s;
        s.acc = static_cast<double>(tally.correct) / static_cast<double>(tally.n);
        s.think_rate =
            static_cast<double>(tally.think) / static_cast<double>(tally.n);
        s.n = static_cast<int>(tally.n);
        out[family] = s;
    }
    return out;
}

void write_eval_csv(const std::vector<EvalRow>& rows,
                    const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw InputError("cannot open " + file.string() + " for writing");
    out << "level,acc,think_rate,n,mean_trace_len\n";
    for (const EvalRow& r : rows) {
        out << r.level << ',' << format_double(r.acc) << ','
            << format_double(r.think_rate) << ',' << r.n << ','
            << format_double(r.mean_trace_len) << '\n';
    }
}

std::vector<EvalRow> read_eval_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line) || line != "level,acc,think_rate,n,mean_trace_len")
        throw ParseError(file.string() + ": bad or missing csv header");

    std::vector<EvalRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5)
            throw ParseError("line " + std::to_string(line_no) +
                             ": expected 5 csv fields, got " +
                             std::to_string(fields.size()));
        try {
            EvalRow r;
            r.level = fields[0];
            r.acc = std::stod(fields[1]);
            r.think_rate = std::stod(fields[2]);
            r.n = std::stoi(fields[3]);
            r.mean_trace_len = std::stod(fields[4]);
            rows.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

}  // namespace thinkrl
