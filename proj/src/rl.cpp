#include "thinkrl/rl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "thinkrl/common.hpp"

namespace thinkrl {

using ordered_json = nlohmann::ordered_json;

std::string to_string(RejectionMode m) {
    return m == RejectionMode::ArgsortTop ? "argsort_top" : "random";
}

RejectionMode rejection_mode_from_string(const std::string& s) {
    if (s == "argsort_top") return RejectionMode::ArgsortTop;
    if (s == "random") return RejectionMode::Random;
    throw ConfigError("unknown rejection mode '" + s + "'");
}

std::string to_string(RewardKind k) {
    return k == RewardKind::Adaptive ? "adaptive" : "format_accuracy";
}

RewardKind reward_kind_from_string(const std::string& s) {
    if (s == "adaptive") return RewardKind::Adaptive;
    if (s == "format_accuracy") return RewardKind::FormatAccuracy;
    throw ConfigError("unknown reward kind '" + s + "'");
}

void TrainConfig::validate() const {
    if (g < 2) throw ConfigError("train.g must be >= 2");
    if (g % 2 != 0) throw ConfigError("train.g must be even");
    if (!(eps_clip > 0.0 && eps_clip < 1.0))
        throw ConfigError("train.eps_clip must be in (0, 1)");
    if (!std::isfinite(tau)) throw ConfigError("train.tau must be finite");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("train.lr must be > 0 and finite");
    if (iters < 1) throw ConfigError("train.iters must be >= 1");
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2)
        throw InputError("group advantages need at least two rewards");
    for (double r : rewards)
        if (!std::isfinite(r)) throw NumericError("non-finite reward in group");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double std_dev = std::sqrt(var / n);
    std::vector<double> adv(rewards.size(), 0.0);
    if (std_dev < 1e-12) return adv;  // no signal in an all-equal group
    for (std::size_t i = 0; i < rewards.size(); ++i)
        adv[i] = (rewards[i] - mean) / std_dev;
    return adv;
}

double clipped_term(double ratio, double advantage, double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw ConfigError("eps_clip must be in (0, 1)");
    if (!std::isfinite(ratio) || !std::isfinite(advantage))
        throw NumericError("non-finite input to clipped_term");
    if (!(ratio > 0.0)) throw InputError("probability ratio must be > 0");
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * advantage;
    return std::min(ratio * advantage, clipped);
}

namespace {

RewardRecord score(RewardKind kind, const Trajectory& traj, const Task& task) {
    return kind == RewardKind::Adaptive ? adaptive_reward(traj, task)
                                        : format_accuracy_reward(traj, task);
}

void select_all(Group& g) {
    g.selected.resize(g.trajectories.size());
    std::iota(g.selected.begin(), g.selected.end(), std::size_t{0});
    g.mask.assign(g.trajectories.size(), 1);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

Group sample_group_vanilla(const PolicyParams& params_old, const Task& task,
                           int g, RewardKind reward, RngStream& rng) {
    if (g < 2) throw ConfigError("group size must be >= 2");
    Group group;
    group.task_id = task.id;
    for (int i = 0; i < g; ++i) {
        Trajectory t = sample_trajectory(params_old, task, std::nullopt, rng);
        group.rewards.push_back(score(reward, t, task).value);
        group.trajectories.push_back(std::move(t));
    }
    group.r_avg = mean_of(group.rewards);
    select_all(group);
    return group;
}

Group adaptive_sample(const PolicyParams& params_old, const Task& task,
                      const TrainConfig& cfg, RngStream& rng) {
    cfg.validate();
    Group group;
    group.task_id = task.id;
    for (int i = 0; i < 2 * cfg.g; ++i) {
        const ModeForce force = i < cfg.g ? ModeForce::Think : ModeForce::NoThink;
        Trajectory t = sample_trajectory(params_old, task, force, rng);
        group.rewards.push_back(adaptive_reward(t, task).value);
        group.trajectories.push_back(std::move(t));
    }
    select_all(group);
    apply_rejection(group, cfg.tau, cfg.g / 2, cfg.rejection_mode, rng);
    return group;
}

void apply_rejection(Group& group, double tau, int keep_per_half,
                     RejectionMode mode, RngStream& rng) {
    const std::size_t n = group.trajectories.size();
    if (n < 2 || n % 2 != 0)
        throw InputError("rejection needs an even group of at least two trajectories");
    if (group.rewards.size() != n)
        throw InputError("group rewards do not match trajectory count");
    const std::size_t half = n / 2;
    if (keep_per_half < 1 || static_cast<std::size_t>(keep_per_half) > half)
        throw ConfigError("keep_per_half must be in [1, group half size]");

    group.r_avg = mean_of(group.rewards);
    select_all(group);
    if (!(group.r_avg > tau)) return;  // group not mostly solved: keep everything

    // Mostly solved: keep only keep_per_half trajectories per forced half.
    std::vector<std::size_t> kept;
    for (std::size_t base : {std::size_t{0}, half}) {
        std::vector<std::size_t> idx(half);
        std::iota(idx.begin(), idx.end(), base);
        if (mode == RejectionMode::ArgsortTop) {
            // Descending reward, ties to the lower index.
            std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return group.rewards[a] > group.rewards[b];
            });
        } else {
            for (std::size_t i = 0; i + 1 < idx.size(); ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(
                            rng.uniform_int(static_cast<int>(idx.size() - i)));
                std::swap(idx[i], idx[j]);
            }
        }
        kept.insert(kept.end(), idx.begin(), idx.begin() + keep_per_half);
    }
    std::sort(kept.begin(), kept.end());
    group.selected = std::move(kept);
    group.mask.assign(n, 0);
    for (std::size_t i : group.selected) group.mask[i] = 1;
}

std::vector<double> masked_advantages(const Group& group, bool per_half) {
    const std::size_t n = group.trajectories.size();
    if (group.rewards.size() != n || group.mask.size() != n)
        throw InputError("group rewards/mask do not match trajectory count");
    if (group.selected.size() < 2)
        throw InputError("degenerate group: fewer than two selected trajectories");

    std::vector<double> adv(n, 0.0);
    auto normalize = [&](const std::vector<std::size_t>& subset) {
        if (subset.empty()) return;
        double mean = 0.0;
        for (std::size_t i : subset) mean += group.rewards[i];
        mean /= static_cast<double>(subset.size());
        double var = 0.0;
        for (std::size_t i : subset) {
            const double d = group.rewards[i] - mean;
            var += d * d;
        }
        const double std_dev = std::sqrt(var / static_cast<double>(subset.size()));
        if (std_dev < 1e-12) return;  // leave zeros
        for (std::size_t i : subset) adv[i] = (group.rewards[i] - mean) / std_dev;
    };

    if (!per_half) {
        normalize(group.selected);
    } else {
        const std::size_t half = n / 2;
        std::vector<std::size_t> lo, hi;
        for (std::size_t i : group.selected) (i < half ? lo : hi).push_back(i);
        normalize(lo);
        normalize(hi);
    }
    return adv;
}

LossGrad agrpo_loss_and_grad(const PolicyParams& params,
                             const PolicyParams& params_old, const Group& group,
                             const Task& task, const AgrpoOptions& opts) {
    if (!params.same_shape(params_old))
        throw ShapeError("params and params_old shapes differ");
    const std::vector<double> adv = masked_advantages(group, opts.norm_per_half);

    // Token inclusion: everything unforced, plus forced mode tokens when they
    // are rescored into the surrogate.
    auto included = [&](const Trajectory& traj, std::size_t t) {
        return static_cast<int>(t) >= traj.forced_prefix_len || opts.mode_token_in_loss;
    };

    std::size_t total_tokens = 0;
    if (opts.pooled_token_mean) {
        for (std::size_t i : group.selected) {
            const Trajectory& traj = group.trajectories[i];
            for (std::size_t t = 0; t < traj.tokens.size(); ++t)
                if (included(traj, t)) ++total_tokens;
        }
        if (total_tokens == 0) throw InputError("no tokens participate in the loss");
    }

    LossGrad out;
    out.grad = PolicyParams::zeros(params.dims);
    const double n_sel = static_cast<double>(group.selected.size());

    for (std::size_t i : group.selected) {
        const Trajectory& traj = group.trajectories[i];
        const double a = adv[i];
        const auto lp_new = logprob(params, task, traj, opts.mode_token_in_loss);
        const auto lp_old = logprob(params_old, task, traj, opts.mode_token_in_loss);

        std::size_t t_count = 0;
        for (std::size_t t = 0; t < traj.tokens.size(); ++t)
            if (included(traj, t)) ++t_count;
        if (t_count == 0) throw InputError("trajectory has no unforced tokens");
        const double scale = opts.pooled_token_mean
                                 ? 1.0 / static_cast<double>(total_tokens)
                                 : 1.0 / (n_sel * static_cast<double>(t_count));

        std::vector<double> weights(traj.tokens.size(), 0.0);
        for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
            if (!included(traj, t)) continue;
            const double ratio = std::exp(lp_new[t] - lp_old[t]);
            if (!std::isfinite(ratio) || !(ratio > 0.0))
                throw NumericError("non-finite probability ratio at trajectory " +
                                   std::to_string(i) + ", token " + std::to_string(t));
            const double unclipped = ratio * a;
            const double clipped =
                std::clamp(ratio, 1.0 - opts.eps_clip, 1.0 + opts.eps_clip) * a;
            out.objective += scale * std::min(unclipped, clipped);
            // The clipped branch is flat in theta; the unclipped branch has
            // d(ratio * a)/d lpone = ratio * a.
            weights[t] = unclipped <= clipped ? scale * ratio * a : 0.0;
        }
        add_weighted_logprob_grad(params, task, traj, weights, out.grad);
    }
    return out;
}

namespace {

double p_think(const PolicyParams& params, int coarse) {
    const double t = params.mode[params.mode_index(coarse, 0)];
    const double n = params.mode[params.mode_index(coarse, 1)];
    return 1.0 / (1.0 + std::exp(n - t));
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

bool trajectory_correct(const Trajectory& traj, const Task& task) {
    const auto p = try_parse(traj);
    return p && p->answer == oracle_answer(task);
}

bool trajectory_thinks(const Trajectory& traj) {
    return !traj.tokens.empty() && traj.tokens[0].kind == TokenKind::ModeThink;
}

TrainResult train_loop(const PolicyParams& params_init,
                       const std::vector<Task>& tasks, const TrainConfig& cfg,
                       bool adaptive) {
    cfg.validate();
    if (tasks.empty()) throw InputError("training needs at least one task");

    AgrpoOptions opts;
    opts.eps_clip = cfg.eps_clip;
    opts.norm_per_half = adaptive && cfg.norm_per_half;
    opts.pooled_token_mean = cfg.pooled_token_mean;
    opts.mode_token_in_loss = adaptive && cfg.mode_token_in_loss;

    TrainResult result{params_init, {}};
    OptState opt{cfg.learning_rate, 0};

    for (int iter = 0; iter < cfg.iters; ++iter) {
        const PolicyParams params_old = result.params;
        RngStream order_rng = SeedSeq(cfg.seed).mix("order").mix(iter).stream();
        const auto order = shuffled_indices(tasks.size(), order_rng);

        double reward_sum = 0.0;
        long n_traj = 0, n_correct = 0, n_think = 0;
        int n_groups = 0, n_rejected_halves = 0;

        try {
            for (std::size_t pos : order) {
                const Task& task = tasks[pos];
                RngStream rng =
                    SeedSeq(cfg.seed).mix("group").mix(iter).mix(task.id).stream();
                Group group =
                    adaptive
                        ? adaptive_sample(params_old, task, cfg, rng)
                        : sample_group_vanilla(params_old, task, cfg.g, cfg.reward, rng);
                for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
                    reward_sum += group.rewards[i];
                    ++n_traj;
                    if (trajectory_correct(group.trajectories[i], task)) ++n_correct;
                    if (trajectory_thinks(group.trajectories[i])) ++n_think;
                }
                if (group.selected.size() < group.trajectories.size())
                    n_rejected_halves += 2;
                ++n_groups;
                if (group.selected.size() < 2) continue;  // degenerate, skip training

                const LossGrad lg =
                    agrpo_loss_and_grad(result.params, params_old, group, task, opts);
                result.params = apply_step(result.params, lg.grad, opt);
            }
        } catch (const NumericError& e) {
            throw NumericError("iteration " + std::to_string(iter) + ": " + e.what());
        }

        IterationLog row;
        row.iter = iter;
        row.mean_reward = reward_sum / static_cast<double>(n_traj);
        if (adaptive) {
            // Samples are forced half/half here, so log the model's own
            // think propensity over the batch instead of the sample rate.
            double tr = 0.0;
            for (const Task& t : tasks) tr += p_think(params_old, t.coarse);
            row.think_rate = tr / static_cast<double>(tasks.size());
        } else {
            row.think_rate = static_cast<double>(n_think) / static_cast<double>(n_traj);
        }
        row.acc = static_cast<double>(n_correct) / static_cast<double>(n_traj);
        row.n_groups = n_groups;
        row.n_rejected_halves = n_rejected_halves;
        result.log.push_back(row);
    }
    return result;
}

}  // namespace

TrainResult train_agrpo(const PolicyParams& params_sft,
                        const std::vector<Task>& tasks, const TrainConfig& cfg) {
    return train_loop(params_sft, tasks, cfg, /*adaptive=*/true);
}

TrainResult train_grpo_vanilla(const PolicyParams& params_init,
                               const std::vector<Task>& tasks,
                               const TrainConfig& cfg) {
    return train_loop(params_init, tasks, cfg, /*adaptive=*/false);
}

std::vector<Task> filter_rl_data(const PolicyParams& params_sft,
                                 const std::vector<Task>& tasks, int n_samples,
                                 std::uint64_t seed) {
    if (n_samples < 2) throw ConfigError("filter needs n_samples >= 2");
    std::vector<Task> kept;
    for (const Task& task : tasks) {
        int passes = 0;
        for (int k = 0; k < n_samples; ++k) {
            RngStream rng = SeedSeq(seed).mix("filter").mix(task.id).mix(k).stream();
            const Trajectory t = sample_trajectory(params_sft, task, std::nullopt, rng);
            if (trajectory_correct(t, task)) ++passes;
        }
        if (passes > 0 && passes < n_samples) kept.push_back(task);
    }
    return kept;
}

void save_training_log(const std::vector<IterationLog>& log,
                       const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw InputError("cannot open " + file.string() + " for writing");
    for (const IterationLog& row : log) {
        ordered_json j;
        j["iter"] = row.iter;
        j["mean_reward"] = row.mean_reward;
        j["think_rate"] = row.think_rate;
        j["acc"] = row.acc;
        j["n_groups"] = row.n_groups;
        j["n_rejected_halves"] = row.n_rejected_halves;
        out << j.dump() << '\n';
    }
}

std::vector<IterationLog> load_training_log(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open " + file.string());
    std::vector<IterationLog> log;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            IterationLog row;
            row.iter = j.at("iter").get<int>();
            row.mean_reward = j.at("mean_reward").get<double>();
            row.think_rate = j.at("think_rate").get<double>();
            row.acc = j.at("acc").get<double>();
            row.n_groups = j.at("n_groups").get<int>();
            row.n_rejected_halves = j.at("n_rejected_halves").get<int>();
            log.push_back(row);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return log;
}

}  // namespace thinkrl
