#include "thinkrl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "thinkrl/common.hpp"
#include "thinkrl/rng.hpp"

namespace thinkrl {

namespace {

const std::set<std::string> kStageNames = {
    "gen-tasks", "calibrate",  "sft",  "filter",        "train-agrpo",
    "train-grpo", "eval",      "compare-modes", "report"};

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* first = v.data();
    const char* last = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc{} || ptr != last)
        throw ConfigError("bad value '" + v + "' for key '" + key + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw ConfigError("bad value '" + v + "' for key '" + key +
                      "' (want true or false)");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ',';
        out += parts[i];
    }
    return out;
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "world.n_coarse") cfg.world.n_coarse = parse_number<int>(key, value);
    else if (key == "world.n_fine") cfg.world.n_fine = parse_number<int>(key, value);
    else if (key == "world.n_answers") cfg.world.n_answers = parse_number<int>(key, value);
    else if (key == "world.n_tasks") cfg.world.n_tasks = parse_number<int>(key, value);
    else if (key == "world.easy_fraction") cfg.world.easy_fraction = parse_number<double>(key, value);
    else if (key == "tiers.p1_easy") cfg.tiers.p1_easy = parse_number<double>(key, value);
    else if (key == "tiers.p1_hard") cfg.tiers.p1_hard = parse_number<double>(key, value);
    else if (key == "tiers.p2_easy") cfg.tiers.p2_easy = parse_number<double>(key, value);
    else if (key == "tiers.p3") cfg.tiers.p3 = parse_number<double>(key, value);
    else if (key == "tier_runs") cfg.tier_runs = parse_number<int>(key, value);
    else if (key == "sft.lr_coarse") cfg.sft_lr_coarse = parse_number<double>(key, value);
    else if (key == "sft.lr_precise") cfg.sft_lr_precise = parse_number<double>(key, value);
    else if (key == "sft.precise_fraction") cfg.sft_precise_fraction = parse_number<double>(key, value);
    else if (key == "filter.samples") cfg.filter_samples = parse_number<int>(key, value);
    else if (key == "train.g") cfg.train.g = parse_number<int>(key, value);
    else if (key == "train.eps_clip") cfg.train.eps_clip = parse_number<double>(key, value);
    else if (key == "train.tau") cfg.train.tau = parse_number<double>(key, value);
    else if (key == "train.lr") cfg.train.learning_rate = parse_number<double>(key, value);
    else if (key == "train.iters") cfg.train.iters = parse_number<int>(key, value);
    else if (key == "train.rejection_mode") cfg.train.rejection_mode = rejection_mode_from_string(value);
    else if (key == "train.reward") cfg.train.reward = reward_kind_from_string(value);
    else if (key == "train.norm_per_half") cfg.train.norm_per_half = parse_bool(key, value);
    else if (key == "train.pooled_token_mean") cfg.train.pooled_token_mean = parse_bool(key, value);
    else if (key == "train.mode_token_in_loss") cfg.train.mode_token_in_loss = parse_bool(key, value);
    else if (key == "eval.samples_per_task") cfg.eval_samples_per_task = parse_number<int>(key, value);
    else if (key == "stages") cfg.stages = split_list(value);
    else throw ConfigError("unknown config key '" + key + "'");
}

}  // namespace

void RunConfig::validate() const {
    world.validate();
    tiers.validate();
    if (tier_runs < 1) throw ConfigError("tier_runs must be >= 1");
    if (!(sft_lr_coarse > 0.0) || !std::isfinite(sft_lr_coarse))
        throw ConfigError("sft.lr_coarse must be > 0 and finite");
    if (!(sft_lr_precise > 0.0) || !std::isfinite(sft_lr_precise))
        throw ConfigError("sft.lr_precise must be > 0 and finite");
    if (!(sft_precise_fraction > 0.0 && sft_precise_fraction <= 1.0))
        throw ConfigError("sft.precise_fraction must be in (0, 1]");
    if (filter_samples < 2) throw ConfigError("filter.samples must be >= 2");
    train.validate();
    if (eval_samples_per_task < 1)
        throw ConfigError("eval.samples_per_task must be >= 1");
    if (stages.empty()) throw ConfigError("stages must not be empty");
    for (const std::string& s : stages)
        if (!kStageNames.count(s)) throw ConfigError("unknown stage '" + s + "'");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!seen.insert(key).second)
            throw ConfigError("duplicate config key '" + key + "'");
        apply_key(cfg, key, value);
    }
    // One seed drives everything; stage streams diverge by label, not seed.
    cfg.world.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

std::string canonical_config(const RunConfig& cfg) {
    // Keys emitted in sorted order; values in round-trip form.
    std::ostringstream out;
    out << "eval.samples_per_task = " << cfg.eval_samples_per_task << '\n';
    out << "filter.samples = " << cfg.filter_samples << '\n';
    out << "seed = " << cfg.seed << '\n';
    out << "sft.lr_coarse = " << format_double(cfg.sft_lr_coarse) << '\n';
    out << "sft.lr_precise = " << format_double(cfg.sft_lr_precise) << '\n';
    out << "sft.precise_fraction = " << format_double(cfg.sft_precise_fraction) << '\n';
    out << "stages = " << join(cfg.stages) << '\n';
    out << "tier_runs = " << cfg.tier_runs << '\n';
    out << "tiers.p1_easy = " << format_double(cfg.tiers.p1_easy) << '\n';
    out << "tiers.p1_hard = " << format_double(cfg.tiers.p1_hard) << '\n';
    out << "tiers.p2_easy = " << format_double(cfg.tiers.p2_easy) << '\n';
    out << "tiers.p3 = " << format_double(cfg.tiers.p3) << '\n';
    out << "train.eps_clip = " << format_double(cfg.train.eps_clip) << '\n';
    out << "train.g = " << cfg.train.g << '\n';
    out << "train.iters = " << cfg.train.iters << '\n';
    out << "train.lr = " << format_double(cfg.train.learning_rate) << '\n';
    out << "train.mode_token_in_loss = " << (cfg.train.mode_token_in_loss ? "true" : "false") << '\n';
    out << "train.norm_per_half = " << (cfg.train.norm_per_half ? "true" : "false") << '\n';
    out << "train.pooled_token_mean = " << (cfg.train.pooled_token_mean ? "true" : "false") << '\n';
    out << "train.rejection_mode = " << to_string(cfg.train.rejection_mode) << '\n';
    out << "train.reward = " << to_string(cfg.train.reward) << '\n';
    out << "train.tau = " << format_double(cfg.train.tau) << '\n';
    out << "world.easy_fraction = " << format_double(cfg.world.easy_fraction) << '\n';
    out << "world.n_answers = " << cfg.world.n_answers << '\n';
    out << "world.n_coarse = " << cfg.world.n_coarse << '\n';
    out << "world.n_fine = " << cfg.world.n_fine << '\n';
    out << "world.n_tasks = " << cfg.world.n_tasks << '\n';
    return out.str();
}

std::string config_hash(const RunConfig& cfg) {
    const std::uint64_t h = fnv1a64(canonical_config(cfg));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace thinkrl
