#include "thinkrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>

#include <json.hpp>

#include "thinkrl/common.hpp"

namespace thinkrl {

using ordered_json = nlohmann::ordered_json;

static void validate_dims(const WorldDims& d) {
    if (d.n_coarse < 1 || d.n_fine < 2 || d.n_answers < 2)
        throw ShapeError("policy dims require n_coarse >= 1, n_fine >= 2, n_answers >= 2");
}

PolicyParams PolicyParams::zeros(const WorldDims& dims) {
    validate_dims(dims);
    PolicyParams p;
    p.dims = dims;
    const std::size_t c = dims.n_coarse, f = dims.n_fine, k = dims.n_answers;
    p.mode.assign(c * 2, 0.0);
    p.reason.assign(c * f * f, 0.0);
    p.ans_think.assign(c * f * k, 0.0);
    p.ans_nothink.assign(c * k, 0.0);
    return p;
}

std::size_t PolicyParams::mode_index(int coarse, int m) const {
    return static_cast<std::size_t>(coarse) * 2 + m;
}
std::size_t PolicyParams::reason_index(int coarse, int fine, int r) const {
    const std::size_t f = dims.n_fine;
    return (static_cast<std::size_t>(coarse) * f + fine) * f + r;
}
std::size_t PolicyParams::ans_think_index(int coarse, int r, int a) const {
    const std::size_t f = dims.n_fine, k = dims.n_answers;
    return (static_cast<std::size_t>(coarse) * f + r) * k + a;
}
std::size_t PolicyParams::ans_nothink_index(int coarse, int a) const {
    return static_cast<std::size_t>(coarse) * dims.n_answers + a;
}

bool PolicyParams::same_shape(const PolicyParams& other) const {
    return dims.n_coarse == other.dims.n_coarse && dims.n_fine == other.dims.n_fine &&
           dims.n_answers == other.dims.n_answers;
}

void PolicyParams::add_scaled(const PolicyParams& other, double scale) {
    if (!same_shape(other)) throw ShapeError("parameter shapes differ in add_scaled");
    auto axpy = [scale](std::vector<double>& dst, const std::vector<double>& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
    };
    axpy(mode, other.mode);
    axpy(reason, other.reason);
    axpy(ans_think, other.ans_think);
    axpy(ans_nothink, other.ans_nothink);
}

// Stable log-softmax of one logit row. The maximum entry maps to
// -log(sum exp(x - max)) <= 0 exactly, so logprobs never go positive.
static std::vector<double> log_softmax(std::span<const double> row) {
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double lse = std::log(sum);
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] - mx - lse;
    return out;
}

static std::vector<double> probs_from_log(const std::vector<double>& logp) {
    std::vector<double> p(logp.size());
    for (std::size_t i = 0; i < logp.size(); ++i) p[i] = std::exp(logp[i]);
    return p;
}

namespace {

// Which logit row a token is scored against, given the trajectory context.
struct RowRef {
    const std::vector<double>* table;
    std::size_t offset;
    std::size_t width;
    int chosen;
};

std::span<const double> row_span(const RowRef& r) {
    return {r.table->data() + r.offset, r.width};
}

void check_task(const PolicyParams& params, const Task& task) {
    const WorldDims& d = params.dims;
    if (task.coarse < 0 || task.coarse >= d.n_coarse || task.fine < 0 ||
        task.fine >= d.n_fine || task.answer < 0 || task.answer >= d.n_answers)
        throw ShapeError("task features out of range for policy dims (task " +
                         task.id + ")");
}

// Row + chosen index for token position t. Assumes a validated trajectory.
RowRef row_for_token(const PolicyParams& params, const Task& task,
                     const Trajectory& traj, std::size_t t) {
    const WorldDims& d = params.dims;
    const Token& tok = traj.tokens[t];
    switch (tok.kind) {
        case TokenKind::ModeThink:
        case TokenKind::ModeNoThink: {
            const int m = tok.kind == TokenKind::ModeThink ? 0 : 1;
            return {&params.mode, params.mode_index(task.coarse, 0), 2, m};
        }
        case TokenKind::Reason:
            return {&params.reason, params.reason_index(task.coarse, task.fine, 0),
                    static_cast<std::size_t>(d.n_fine), tok.value};
        case TokenKind::Answer: {
            if (traj.tokens[0].kind == TokenKind::ModeThink) {
                const int r = traj.tokens[1].value;
                return {&params.ans_think, params.ans_think_index(task.coarse, r, 0),
                        static_cast<std::size_t>(d.n_answers), tok.value};
            }
            return {&params.ans_nothink, params.ans_nothink_index(task.coarse, 0),
                    static_cast<std::size_t>(d.n_answers), tok.value};
        }
    }
    throw ShapeError("bad token kind");
}

}  // namespace

void validate_trajectory(const Trajectory& traj, const WorldDims& dims) {
    const auto& tk = traj.tokens;
    const bool nothink_shape = tk.size() == 2 && tk[0].kind == TokenKind::ModeNoThink &&
                               tk[1].kind == TokenKind::Answer;
    const bool think_shape = tk.size() == 3 && tk[0].kind == TokenKind::ModeThink &&
                             tk[1].kind == TokenKind::Reason &&
                             tk[2].kind == TokenKind::Answer;
    if (!nothink_shape && !think_shape)
        throw ShapeError("trajectory is not [no-think, answer] or [think, reason, answer]");
    if (traj.logprobs.size() != tk.size())
        throw ShapeError("logprobs length does not match token count");
    if (traj.forced_prefix_len != 0 && traj.forced_prefix_len != 1)
        throw ShapeError("forced_prefix_len must be 0 or 1");
    if (think_shape && (tk[1].value < 0 || tk[1].value >= dims.n_fine))
        throw ShapeError("reason token out of range");
    const Token& ans = tk.back();
    if (ans.value < 0 || ans.value >= dims.n_answers)
        throw ShapeError("answer token out of range");
}

Trajectory sample_trajectory(const PolicyParams& params, const Task& task,
                             std::optional<ModeForce> force, RngStream& rng) {
    check_task(params, task);
    Trajectory traj;

    bool think;
    if (force) {
        think = *force == ModeForce::Think;
        traj.tokens.push_back(
            {think ? TokenKind::ModeThink : TokenKind::ModeNoThink, 0});
        traj.logprobs.push_back(0.0);
        traj.forced_prefix_len = 1;
    } else {
        const auto lp = log_softmax(
            {params.mode.data() + params.mode_index(task.coarse, 0), 2});
        const int m = rng.categorical(probs_from_log(lp));
        think = m == 0;
        traj.tokens.push_back(
            {think ? TokenKind::ModeThink : TokenKind::ModeNoThink, 0});
        traj.logprobs.push_back(lp[m]);
    }

    if (think) {
        const auto lp_r = log_softmax(
            {params.reason.data() + params.reason_index(task.coarse, task.fine, 0),
             static_cast<std::size_t>(params.dims.n_fine)});
        const int r = rng.categorical(probs_from_log(lp_r));
        traj.tokens.push_back({TokenKind::Reason, r});
        traj.logprobs.push_back(lp_r[r]);

        const auto lp_a = log_softmax(
            {params.ans_think.data() + params.ans_think_index(task.coarse, r, 0),
             static_cast<std::size_t>(params.dims.n_answers)});
        const int a = rng.categorical(probs_from_log(lp_a));
        traj.tokens.push_back({TokenKind::Answer, a});
        traj.logprobs.push_back(lp_a[a]);
    } else {
        const auto lp_a = log_softmax(
            {params.ans_nothink.data() + params.ans_nothink_index(task.coarse, 0),
             static_cast<std::size_t>(params.dims.n_answers)});
        const int a = rng.categorical(probs_from_log(lp_a));
        traj.tokens.push_back({TokenKind::Answer, a});
        traj.logprobs.push_back(lp_a[a]);
    }
    return traj;
}

std::vector<double> logprob(const PolicyParams& params, const Task& task,
                            const Trajectory& traj, bool rescore_forced) {
    check_task(params, task);
    validate_trajectory(traj, params.dims);
    std::vector<double> out(traj.tokens.size(), 0.0);
    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        if (static_cast<int>(t) < traj.forced_prefix_len && !rescore_forced) continue;
        const RowRef row = row_for_token(params, task, traj, t);
        out[t] = log_softmax(row_span(row))[row.chosen];
    }
    return out;
}

void add_weighted_logprob_grad(const PolicyParams& params, const Task& task,
                               const Trajectory& traj,
                               const std::vector<double>& weights,
                               PolicyParams& grad) {
    check_task(params, task);
    validate_trajectory(traj, params.dims);
    if (weights.size() != traj.tokens.size())
        throw ShapeError("token weight count does not match trajectory length");
    if (!params.same_shape(grad)) throw ShapeError("gradient shape mismatch");

    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        const double w = weights[t];
        if (w == 0.0) continue;
        const RowRef row = row_for_token(params, task, traj, t);
        const auto probs = probs_from_log(log_softmax(row_span(row)));
        std::vector<double>* gtable = nullptr;
        if (row.table == &params.mode) gtable = &grad.mode;
        else if (row.table == &params.reason) gtable = &grad.reason;
        else if (row.table == &params.ans_think) gtable = &grad.ans_think;
        else gtable = &grad.ans_nothink;
        for (std::size_t j = 0; j < row.width; ++j) {
            const double onehot = j == static_cast<std::size_t>(row.chosen) ? 1.0 : 0.0;
            (*gtable)[row.offset + j] += w * (onehot - probs[j]);
        }
    }
}

PolicyParams grad_logprob(const PolicyParams& params, const Task& task,
                          const Trajectory& traj) {
    PolicyParams grad = PolicyParams::zeros(params.dims);
    std::vector<double> weights(traj.tokens.size(), 1.0);
    for (int t = 0; t < traj.forced_prefix_len && t < static_cast<int>(weights.size()); ++t)
        weights[t] = 0.0;
    add_weighted_logprob_grad(params, task, traj, weights, grad);
    return grad;
}

PolicyParams apply_step(const PolicyParams& params, const PolicyParams& grad,
                        OptState& opt) {
    if (!params.same_shape(grad)) throw ShapeError("gradient shape mismatch in apply_step");
    auto check = [](const std::vector<double>& v, const char* name) {
        for (std::size_t i = 0; i < v.size(); ++i)
            if (!std::isfinite(v[i]))
                throw NumericError(std::string("non-finite gradient at ") + name + "[" +
                                   std::to_string(i) + "], step refused");
    };
    check(grad.mode, "mode");
    check(grad.reason, "reason");
    check(grad.ans_think, "ans_think");
    check(grad.ans_nothink, "ans_nothink");

    PolicyParams next = params;
    next.add_scaled(grad, opt.learning_rate);
    ++opt.step_count;
    return next;
}

void save_params(const PolicyParams& params, const std::filesystem::path& file) {
    ordered_json j;
    j["version"] = 1;
    j["n_coarse"] = params.dims.n_coarse;
    j["n_fine"] = params.dims.n_fine;
    j["n_answers"] = params.dims.n_answers;
    j["mode"] = params.mode;
    j["reason"] = params.reason;
    j["ans_think"] = params.ans_think;
    j["ans_nothink"] = params.ans_nothink;
    std::ofstream out(file);
    if (!out) throw InputError("cannot open " + file.string() + " for writing");
    out << j.dump(2) << '\n';
}

PolicyParams load_params(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw InputError("cannot open " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw ParseError("unsupported checkpoint version");
        WorldDims dims{j.at("n_coarse").get<int>(), j.at("n_fine").get<int>(),
                       j.at("n_answers").get<int>()};
        PolicyParams p = PolicyParams::zeros(dims);
        auto load_table = [&](const char* name, std::vector<double>& dst) {
            auto v = j.at(name).get<std::vector<double>>();
            if (v.size() != dst.size())
                throw ShapeError(std::string("checkpoint table '") + name +
                                 "' has wrong length");
            dst = std::move(v);
        };
        load_table("mode", p.mode);
        load_table("reason", p.reason);
        load_table("ans_think", p.ans_think);
        load_table("ans_nothink", p.ans_nothink);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
}

}  // namespace thinkrl
