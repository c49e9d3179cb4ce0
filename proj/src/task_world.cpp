#include "thinkrl/task_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "thinkrl/common.hpp"

namespace thinkrl {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Family f) { return f == Family::Easy ? "easy" : "hard"; }

std::string to_string(Level l) {
    switch (l) {
        case Level::L1: return "L1";
        case Level::L2: return "L2";
        case Level::L3: return "L3";
        case Level::L4: return "L4";
        case Level::L5: return "L5";
    }
    throw InputError("bad level enum value");
}

Family family_from_string(const std::string& s) {
    if (s == "easy") return Family::Easy;
    if (s == "hard") return Family::Hard;
    throw ParseError("unknown family '" + s + "'");
}

Level level_from_string(const std::string& s) {
    for (Level l : {Level::L1, Level::L2, Level::L3, Level::L4, Level::L5})
        if (to_string(l) == s) return l;
    throw ParseError("unknown level '" + s + "'");
}

void WorldConfig::validate() const {
    if (n_coarse < 1) throw ConfigError("world.n_coarse must be >= 1");
    if (n_fine < 2) throw ConfigError("world.n_fine must be >= 2");
    if (n_answers < 2) throw ConfigError("world.n_answers must be >= 2");
    if (n_tasks < 1) throw ConfigError("world.n_tasks must be >= 1");
    if (!(easy_fraction >= 0.0 && easy_fraction <= 1.0))
        throw ConfigError("world.easy_fraction must be in [0, 1]");
}

static std::string task_id_for(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "t%05d", index);
    return buf;
}

std::vector<Task> generate_world(const WorldConfig& cfg) {
    cfg.validate();
    const int n = cfg.n_tasks;
    const int n_easy = static_cast<int>(std::llround(cfg.easy_fraction * n));
    const int n_hard = n - n_easy;
    const int c = cfg.n_coarse;

    // Bin split: easy bins come first. Mixed worlds keep the families in
    // disjoint bins so a coarse-conditioned responder can tell them apart;
    // with a single bin that separation is impossible and both share bin 0.
    int easy_bins = 0, hard_bins = c, hard_base = 0;
    if (n_easy > 0 && n_hard > 0) {
        if (c >= 2) {
            easy_bins = std::clamp(
                static_cast<int>(std::llround(cfg.easy_fraction * c)), 1, c - 1);
            hard_bins = c - easy_bins;
            hard_base = easy_bins;
        } else {
            easy_bins = 1;
            hard_bins = 1;
            hard_base = 0;
        }
    } else if (n_easy > 0) {
        easy_bins = c;
        hard_bins = 0;
    }

    std::vector<int> easy_answer(std::max(easy_bins, 1), 0);
    RngStream rng = SeedSeq(cfg.seed).mix("easy-answers").stream();
    for (int b = 0; b < easy_bins; ++b) easy_answer[b] = rng.uniform_int(cfg.n_answers);

    std::vector<Task> tasks;
    tasks.reserve(n);
    for (int i = 0; i < n_easy; ++i) {
        Task t;
        t.id = task_id_for(static_cast<int>(tasks.size()));
        t.coarse = i % easy_bins;
        t.fine = 0;  // the fine feature carries no information on easy tasks
        t.answer = easy_answer[t.coarse];
        t.family = Family::Easy;
        tasks.push_back(std::move(t));
    }
    for (int j = 0; j < n_hard; ++j) {
        const int cell = j % (hard_bins * cfg.n_fine);
        Task t;
        t.id = task_id_for(static_cast<int>(tasks.size()));
        t.coarse = hard_base + cell / cfg.n_fine;
        t.fine = cell % cfg.n_fine;
        t.answer = (t.coarse + t.fine) % cfg.n_answers;
        t.family = Family::Hard;
        tasks.push_back(std::move(t));
    }
    return tasks;
}

int oracle_answer(const Task& task) { return task.answer; }

void TierParams::validate() const {
    for (double p : {p1_easy, p1_hard, p2_easy, p3})
        if (!(p >= 0.0 && p <= 1.0))
            throw ConfigError("tier probabilities must be in [0, 1]");
}

// Uniform draw over the K-1 wrong answers.
static int wrong_answer(const Task& task, int k, RngStream& rng) {
    int w = rng.uniform_int(k - 1);
    return w >= task.answer ? w + 1 : w;
}

int tier_sample(Tier tier, const Task& task, const WorldDims& dims,
                const TierParams& params, RngStream& rng) {
    params.validate();
    const int k = dims.n_answers;
    switch (tier) {
        case Tier::M1: {
            const double p1 = task.family == Family::Easy ? params.p1_easy : params.p1_hard;
            if (rng.bernoulli(p1)) return task.answer;
            return rng.uniform_int(k);
        }
        case Tier::M2: {
            if (task.family == Family::Easy) {
                if (rng.bernoulli(params.p2_easy)) return task.answer;
                return wrong_answer(task, k, rng);
            }
            // Coarse features only: uniform over the answers this coarse bin
            // can produce across its fine values.
            std::set<int> consistent;
            for (int f = 0; f < dims.n_fine; ++f)
                consistent.insert((task.coarse + f) % k);
            std::vector<int> choices(consistent.begin(), consistent.end());
            return choices[rng.uniform_int(static_cast<int>(choices.size()))];
        }
        case Tier::M3: {
            if (rng.bernoulli(params.p3)) return task.answer;
            return wrong_answer(task, k, rng);
        }
    }
    throw InputError("bad tier enum value");
}

void save_tasks(const std::vector<Task>& tasks, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw InputError("cannot open " + file.string() + " for writing");
    for (const Task& t : tasks) {
        ordered_json j;
        j["id"] = t.id;
        j["coarse"] = t.coarse;
        j["fine"] = t.fine;
        j["answer"] = t.answer;
        j["family"] = to_string(t.family);
        if (t.level)
            j["level"] = to_string(*t.level);
        else
            j["level"] = nullptr;
        out << j.dump() << '\n';
    }
}

static const nlohmann::json& require_field(const nlohmann::json& j,
                                           const char* name) {
    auto it = j.find(name);
    if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'");
    return *it;
}

std::vector<Task> load_tasks(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open " + file.string());
    std::vector<Task> tasks;
    std::string line;
    std::size_t line_no = 0;
    static const std::set<std::string> known = {"id",     "coarse", "fine",
                                                "answer", "family", "level"};
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object())
            throw ParseError("line " + std::to_string(line_no) + ": expected an object");
        for (const auto& [key, _] : j.items())
            if (!known.count(key))
                throw ParseError("line " + std::to_string(line_no) +
                                 ": unknown field '" + key + "'");
        try {
            Task t;
            t.id = require_field(j, "id").get<std::string>();
            t.coarse = require_field(j, "coarse").get<int>();
            t.fine = require_field(j, "fine").get<int>();
            t.answer = require_field(j, "answer").get<int>();
            t.family = family_from_string(require_field(j, "family").get<std::string>());
            const auto& lv = require_field(j, "level");
            if (!lv.is_null()) t.level = level_from_string(lv.get<std::string>());
            tasks.push_back(std::move(t));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return tasks;
}

}  // namespace thinkrl
