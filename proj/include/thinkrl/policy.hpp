#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "thinkrl/rng.hpp"
#include "thinkrl/task_world.hpp"

namespace thinkrl {

enum class TokenKind { ModeThink, ModeNoThink, Reason, Answer };

struct Token {
    TokenKind kind = TokenKind::ModeNoThink;
    int value = 0;  // reason index or answer index; unused for mode tokens

    bool operator==(const Token&) const = default;
};

/// A sampled (or target) response. Legal shapes are exactly
///   [ModeNoThink, Answer]            and
///   [ModeThink, Reason, Answer].
/// forced_prefix_len is 1 when the mode token was imposed by the caller
/// rather than sampled; forced tokens carry logprob 0.
struct Trajectory {
    std::vector<Token> tokens;
    std::vector<double> logprobs;
    int forced_prefix_len = 0;
};

/// Tabular softmax policy over the synthetic task world.
///   mode[c][2]           mode logits per coarse bin (index 0 think, 1 no-think)
///   reason[c][f][F]      reasoning-token logits given the true fine feature
///   ans_think[c][r][K]   answer logits given the emitted reasoning token
///   ans_nothink[c][K]    answer logits from coarse alone
/// The same structure doubles as gradient storage.
struct PolicyParams {
    WorldDims dims;
    std::vector<double> mode;
    std::vector<double> reason;
    std::vector<double> ans_think;
    std::vector<double> ans_nothink;

    static PolicyParams zeros(const WorldDims& dims);

    std::size_t mode_index(int coarse, int m) const;
    std::size_t reason_index(int coarse, int fine, int r) const;
    std::size_t ans_think_index(int coarse, int r, int a) const;
    std::size_t ans_nothink_index(int coarse, int a) const;

    /// this += scale * other. Shapes must match.
    void add_scaled(const PolicyParams& other, double scale);

    bool same_shape(const PolicyParams& other) const;
    bool operator==(const PolicyParams&) const = default;
};

enum class ModeForce { Think, NoThink };

/// Autoregressive draw of one trajectory. When force is set the mode token is
/// imposed with probability one (never the opposite mode) and logged with
/// logprob 0; everything after the prefix is sampled from the softmax rows.
Trajectory sample_trajectory(const PolicyParams& params, const Task& task,
                             std::optional<ModeForce> force, RngStream& rng);

/// Per-token log-probabilities of a trajectory under params. By default
/// forced prefix tokens score 0 (they were not drawn from the policy);
/// rescore_forced = true instead scores them at their true model probability.
/// Unforced entries reproduce the values recorded at sampling time bit for bit.
std::vector<double> logprob(const PolicyParams& params, const Task& task,
                            const Trajectory& traj, bool rescore_forced = false);

/// Throws ShapeError unless the trajectory has a legal shape, in-range token
/// payloads for dims, logprobs aligned with tokens, and a 0/1 forced prefix.
void validate_trajectory(const Trajectory& traj, const WorldDims& dims);

/// Accumulates sum_t weights[t] * d logprob_t / d params into grad. Tokens
/// with weight 0 are skipped; forced tokens use their true softmax row (the
/// caller decides whether they participate by zeroing their weight).
void add_weighted_logprob_grad(const PolicyParams& params, const Task& task,
                               const Trajectory& traj,
                               const std::vector<double>& weights,
                               PolicyParams& grad);

/// Exact gradient of the summed unforced-token log-probability. Forced
/// prefix tokens contribute zero.
PolicyParams grad_logprob(const PolicyParams& params, const Task& task,
                          const Trajectory& traj);

/// Plain gradient-ascent optimizer state.
struct OptState {
    double learning_rate = 0.1;
    long step_count = 0;
};

/// params + learning_rate * grad. Refuses non-finite gradients (NumericError
/// naming the offending table and index) and bumps step_count on success.
PolicyParams apply_step(const PolicyParams& params, const PolicyParams& grad,
                        OptState& opt);

/// Versioned JSON checkpoint; load(save(p)) == p exactly.
void save_params(const PolicyParams& params, const std::filesystem::path& file);
PolicyParams load_params(const std::filesystem::path& file);

}  // namespace thinkrl
