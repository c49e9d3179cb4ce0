#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "thinkrl/policy.hpp"
#include "thinkrl/reward.hpp"
#include "thinkrl/task_world.hpp"

namespace thinkrl {

/// One query's sampled group. For adaptive groups the first half is
/// forced-think and the second half forced-no-think; vanilla groups are
/// unforced. selected lists the trajectory indices that survive rejection
/// (everything, when rejection did not fire); mask is its 0/1 form.
struct Group {
    std::string task_id;
    std::vector<Trajectory> trajectories;
    std::vector<double> rewards;
    std::vector<std::size_t> selected;
    std::vector<int> mask;
    double r_avg = 0.0;
};

enum class RejectionMode { ArgsortTop, Random };
enum class RewardKind { Adaptive, FormatAccuracy };

std::string to_string(RejectionMode m);
RejectionMode rejection_mode_from_string(const std::string& s);
std::string to_string(RewardKind k);
RewardKind reward_kind_from_string(const std::string& s);

struct TrainConfig {
    int g = 8;                  // trajectories per forced half (and per vanilla group)
    double eps_clip = 0.2;
    double tau = 1.0;           // rejection threshold on the group mean reward
    double learning_rate = 0.1;
    int iters = 500;
    std::uint64_t seed = 7;
    RejectionMode rejection_mode = RejectionMode::ArgsortTop;
    RewardKind reward = RewardKind::FormatAccuracy;  // vanilla loop only
    bool norm_per_half = false;       // normalize advantages within each half
    bool pooled_token_mean = false;   // pool tokens across trajectories in the loss
    bool mode_token_in_loss = true;   // let forced mode tokens join the surrogate,
                                      // rescored under theta / theta_old

    void validate() const;  // throws ConfigError naming the violated bound
};

/// Group-normalized advantages (reward - mean) / population std. All-equal
/// rewards (std below 1e-12) give all zeros; fewer than two rewards is an
/// InputError.
std::vector<double> group_advantages(const std::vector<double>& rewards);

/// min(ratio * adv, clip(ratio, 1-eps, 1+eps) * adv). Requires ratio > 0,
/// eps in (0,1), finite inputs.
double clipped_term(double ratio, double advantage, double eps);

/// G unforced trajectories from frozen params with the chosen reward;
/// everything selected, mask all ones.
Group sample_group_vanilla(const PolicyParams& params_old, const Task& task,
                           int g, RewardKind reward, RngStream& rng);

/// G forced-think then G forced-no-think trajectories from frozen params,
/// scored with the mode-aware reward. When the group mean exceeds cfg.tau the
/// group is mostly solved and only g/2 trajectories per half stay selected:
/// the top ones by reward (ties to the lower index) under ArgsortTop, or a
/// seeded uniform choice under Random.
Group adaptive_sample(const PolicyParams& params_old, const Task& task,
                      const TrainConfig& cfg, RngStream& rng);

/// Rejection step alone, exposed for direct property checks: applies the
/// half-wise keep-k selection to an already-scored group.
void apply_rejection(Group& group, double tau, int keep_per_half,
                     RejectionMode mode, RngStream& rng);

/// Masked group-normalized advantages: statistics over the selected rewards
/// jointly (or per half when per_half), zero at masked positions. Fewer than
/// two selected trajectories is an InputError (degenerate group).
std::vector<double> masked_advantages(const Group& group, bool per_half = false);

struct AgrpoOptions {
    double eps_clip = 0.2;
    bool norm_per_half = false;
    bool pooled_token_mean = false;
    bool mode_token_in_loss = false;  // by default the surrogate covers unforced tokens only
};

struct LossGrad {
    double objective = 0.0;  // clipped surrogate, to be ascended
    PolicyParams grad;
};

/// Clipped-surrogate objective and its exact gradient over the selected
/// trajectories of a group. Per token, ratio = exp(lp_theta - lp_theta_old);
/// tokens average within a trajectory and trajectories average across the
/// selected set (pooled_token_mean instead averages all tokens in one pool).
/// With mode_token_in_loss, forced mode tokens join at their rescored
/// probabilities. Non-finite ratios raise NumericError naming the trajectory
/// and token.
LossGrad agrpo_loss_and_grad(const PolicyParams& params,
                             const PolicyParams& params_old, const Group& group,
                             const Task& task, const AgrpoOptions& opts);

struct IterationLog {
    int iter = 0;
    double mean_reward = 0.0;
    double think_rate = 0.0;
    double acc = 0.0;
    int n_groups = 0;
    int n_rejected_halves = 0;
};

struct TrainResult {
    PolicyParams params;
    std::vector<IterationLog> log;
};

/// Adaptive training loop: per iteration snapshot params_old, walk the full
/// task list in seeded-shuffle order, and for each task sample an adaptive
/// group, mask it, and ascend the surrogate. think_rate in the log is the
/// mean model probability of choosing think over the batch (samples are
/// forced here, so the empirical rate would be 0.5 by construction).
TrainResult train_agrpo(const PolicyParams& params_sft,
                        const std::vector<Task>& tasks, const TrainConfig& cfg);

/// Plain GRPO loop: unforced groups, cfg.reward, no rejection (mask all
/// ones). Same logging schema; think_rate is the empirical fraction of
/// sampled trajectories in think mode.
TrainResult train_grpo_vanilla(const PolicyParams& params_init,
                               const std::vector<Task>& tasks,
                               const TrainConfig& cfg);

/// Draws n_samples unforced responses per task from the frozen policy and
/// keeps tasks with an interior pass count (0 < passes < n_samples): always
/// solved and never solved both carry no training signal. n_samples >= 2.
std::vector<Task> filter_rl_data(const PolicyParams& params_sft,
                                 const std::vector<Task>& tasks, int n_samples,
                                 std::uint64_t seed);

/// Line-delimited JSON, one iteration per line, fixed field order
/// {"iter","mean_reward","think_rate","acc","n_groups","n_rejected_halves"}.
void save_training_log(const std::vector<IterationLog>& log,
                       const std::filesystem::path& file);
std::vector<IterationLog> load_training_log(const std::filesystem::path& file);

}  // namespace thinkrl
