#include "thinkrl/sft.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "thinkrl/common.hpp"
#include "thinkrl/reward.hpp"

namespace thinkrl {

using ordered_json = nlohmann::ordered_json;

std::string to_string(CorpusTier t) {
    return t == CorpusTier::Coarse ? "coarse" : "precise";
}

CorpusTier corpus_tier_from_string(const std::string& s) {
    if (s == "coarse") return CorpusTier::Coarse;
    if (s == "precise") return CorpusTier::Precise;
    throw ParseError("unknown corpus tier '" + s + "'");
}

void SftConfig::validate() const {
    if (!(lr_coarse > 0.0) || !std::isfinite(lr_coarse))
        throw ConfigError("sft.lr_coarse must be > 0 and finite");
    if (!(lr_precise > 0.0) || !std::isfinite(lr_precise))
        throw ConfigError("sft.lr_precise must be > 0 and finite");
}

static Trajectory target_for(const Task& task, Mode mode) {
    Trajectory t;
    if (mode == Mode::Think) {
        t.tokens = {{TokenKind::ModeThink, 0},
                    {TokenKind::Reason, task.fine},  // oracle reasoning trace
                    {TokenKind::Answer, task.answer}};
    } else {
        t.tokens = {{TokenKind::ModeNoThink, 0}, {TokenKind::Answer, task.answer}};
    }
    t.logprobs.assign(t.tokens.size(), 0.0);
    t.forced_prefix_len = 0;
    return t;
}

// Seeded partial shuffle: the first `take` slots of a Fisher-Yates pass.
static std::vector<std::size_t> shuffled_indices(std::size_t n, RngStream& rng) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(
                                      rng.uniform_int(static_cast<int>(n - i)));
        std::swap(idx[i], idx[j]);
    }
    return idx;
}

std::vector<SftExample> build_coarse_corpus(const std::vector<Task>& tasks,
                                            RngStream& rng) {
    if (tasks.empty()) throw InputError("coarse corpus needs at least one task");
    const std::size_t n = tasks.size();
    const std::size_t n_nothink = n / 3;  // think:no-think = 2:1, rounded toward think

    // Mode is assigned by a seeded draw over example slots, without looking at
    // the task beyond its position: shuffle indices, first third goes no-think.
    std::vector<Mode> mode(n, Mode::Think);
    const auto order = shuffled_indices(n, rng);
    for (std::size_t i = 0; i < n_nothink; ++i) mode[order[i]] = Mode::NoThink;

    std::vector<SftExample> corpus;
    corpus.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        corpus.push_back({tasks[i].id, target_for(tasks[i], mode[i]), CorpusTier::Coarse});
    return corpus;
}

std::vector<SftExample> build_precise_corpus(const std::vector<Task>& tasks,
                                             RngStream& rng) {
    std::string missing;
    for (const Task& t : tasks)
        if (!t.level) missing += missing.empty() ? t.id : ", " + t.id;
    if (!missing.empty())
        throw InputError("precise corpus requires calibrated tasks; missing level: " +
                         missing);

    std::vector<std::size_t> nothink_side, think_side;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Level l = *tasks[i].level;
        if (l == Level::L1 || l == Level::L2)
            nothink_side.push_back(i);
        else
            think_side.push_back(i);
    }

    // Balance to exactly 1:1 by dropping surplus from the larger side.
    auto subsample = [&](std::vector<std::size_t>& side, std::size_t keep) {
        const auto order = shuffled_indices(side.size(), rng);
        std::vector<std::size_t> kept;
        kept.reserve(keep);
        for (std::size_t i = 0; i < keep; ++i) kept.push_back(side[order[i]]);
        std::sort(kept.begin(), kept.end());
        side = std::move(kept);
    };
    const std::size_t keep = std::min(nothink_side.size(), think_side.size());
    if (nothink_side.size() > keep) subsample(nothink_side, keep);
    if (think_side.size() > keep) subsample(think_side, keep);

    std::vector<std::pair<std::size_t, Mode>> picks;
    picks.reserve(2 * keep);
    for (std::size_t i : nothink_side) picks.emplace_back(i, Mode::NoThink);
    for (std::size_t i : think_side) picks.emplace_back(i, Mode::Think);
    std::sort(picks.begin(), picks.end());

    std::vector<SftExample> corpus;
    corpus.reserve(picks.size());
    for (const auto& [i, m] : picks)
        corpus.push_back({tasks[i].id, target_for(tasks[i], m), CorpusTier::Precise});
    return corpus;
}

double sft_loss(const PolicyParams& params, const Task& task,
                const SftExample& example) {
    const auto lp = logprob(params, task, example.target, /*rescore_forced=*/true);
    double sum = 0.0;
    for (double v : lp) sum += v;
    return -sum;
}

namespace {

const Task& task_by_id(const std::map<std::string, const Task*>& index,
                       const std::string& id) {
    auto it = index.find(id);
    if (it == index.end()) throw InputError("corpus references unknown task '" + id + "'");
    return *it->second;
}

double corpus_mean_loss(const PolicyParams& params,
                        const std::map<std::string, const Task*>& index,
                        const std::vector<SftExample>& corpus) {
    double sum = 0.0;
    for (const SftExample& ex : corpus)
        sum += sft_loss(params, task_by_id(index, ex.task_id), ex);
    return sum / static_cast<double>(corpus.size());
}

}  // namespace

SftResult train_sft(const PolicyParams& init, const std::vector<Task>& tasks,
                    const std::vector<SftExample>& coarse,
                    const std::vector<SftExample>& precise, const SftConfig& cfg) {
    cfg.validate();
    if (coarse.empty() || precise.empty())
        throw InputError("train_sft needs non-empty coarse and precise corpora");

    std::map<std::string, const Task*> index;
    for (const Task& t : tasks) index[t.id] = &t;

    SftResult result{init, {}};
    struct Phase {
        const char* name;
        const std::vector<SftExample>* corpus;
        double lr;
    };
    const Phase phases[] = {{"coarse", &coarse, cfg.lr_coarse},
                            {"precise", &precise, cfg.lr_precise}};

    for (const Phase& phase : phases) {
        const double before = corpus_mean_loss(result.params, index, *phase.corpus);
        OptState opt{phase.lr, 0};
        RngStream rng = SeedSeq(cfg.seed).mix("sft-shuffle").mix(phase.name).stream();
        const auto order = shuffled_indices(phase.corpus->size(), rng);
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            const SftExample& ex = (*phase.corpus)[order[pos]];
            const Task& task = task_by_id(index, ex.task_id);
            const double loss = sft_loss(result.params, task, ex);
            if (!std::isfinite(loss))
                throw NumericError("non-finite loss at " + std::string(phase.name) +
                                   " example " + std::to_string(pos) + " (task " +
                                   ex.task_id + ")");
            // Descending the loss is ascending the target log-likelihood.
            const PolicyParams grad = grad_logprob(result.params, task, ex.target);
            result.params = apply_step(result.params, grad, opt);
        }
        const double after = corpus_mean_loss(result.params, index, *phase.corpus);
        result.log.push_back({phase.name, before, after});
    }
    return result;
}

void save_corpus(const std::vector<SftExample>& corpus,
                 const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw InputError("cannot open " + file.string() + " for writing");
    for (const SftExample& ex : corpus) {
        const Parsed p = parse(ex.target);
        ordered_json j;
        j["task_id"] = ex.task_id;
        j["mode"] = p.mode == Mode::Think ? "think" : "nothink";
        if (p.mode == Mode::Think)
            j["reason"] = ex.target.tokens[1].value;
        else
            j["reason"] = nullptr;
        j["answer"] = p.answer;
        j["tier"] = to_string(ex.tier);
        out << j.dump() << '\n';
    }
}

std::vector<SftExample> load_corpus(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open " + file.string());
    std::vector<SftExample> corpus;
    std::string line;
    std::size_t line_no = 0;
    static const std::set<std::string> known = {"task_id", "mode", "reason",
                                                "answer", "tier"};
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            if (!j.is_object()) throw ParseError("expected an object");
            for (const auto& [key, _] : j.items())
                if (!known.count(key)) throw ParseError("unknown field '" + key + "'");
            SftExample ex;
            ex.task_id = j.at("task_id").get<std::string>();
            const auto mode = j.at("mode").get<std::string>();
            const int answer = j.at("answer").get<int>();
            ex.tier = corpus_tier_from_string(j.at("tier").get<std::string>());
            Trajectory target;
            if (mode == "think") {
                target.tokens = {{TokenKind::ModeThink, 0},
                                 {TokenKind::Reason, j.at("reason").get<int>()},
                                 {TokenKind::Answer, answer}};
            } else if (mode == "nothink") {
                if (!j.at("reason").is_null())
                    throw ParseError("no-think example carries a reason token");
                target.tokens = {{TokenKind::ModeNoThink, 0}, {TokenKind::Answer, answer}};
            } else {
                throw ParseError("unknown mode '" + mode + "'");
            }
            target.logprobs.assign(target.tokens.size(), 0.0);
            ex.target = std::move(target);
            corpus.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return corpus;
}

}  // namespace thinkrl
