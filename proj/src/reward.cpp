#include "thinkrl/reward.hpp"

#include "thinkrl/common.hpp"

namespace thinkrl {

std::optional<Parsed> try_parse(const Trajectory& traj) {
    const auto& tk = traj.tokens;
    if (tk.size() == 2 && tk[0].kind == TokenKind::ModeNoThink &&
        tk[1].kind == TokenKind::Answer)
        return Parsed{Mode::NoThink, tk[1].value};
    if (tk.size() == 3 && tk[0].kind == TokenKind::ModeThink &&
        tk[1].kind == TokenKind::Reason && tk[2].kind == TokenKind::Answer)
        return Parsed{Mode::Think, tk[2].value};
    return std::nullopt;
}

Parsed parse(const Trajectory& traj) {
    if (auto p = try_parse(traj)) return *p;
    throw FormatViolation(
        "response is neither [no-think, answer] nor [think, reason, answer]");
}

RewardRecord adaptive_reward(const Trajectory& traj, const Task& task) {
    const Parsed p = parse(traj);
    const bool correct = p.answer == oracle_answer(task);
    double value;
    if (p.mode == Mode::NoThink)
        value = correct ? 2.0 : -1.0;
    else
        value = correct ? 1.0 : 0.0;
    return {p.mode, correct, value};
}

RewardRecord format_accuracy_reward(const Trajectory& traj, const Task& task) {
    const auto p = try_parse(traj);
    if (!p) {
        // Malformed: no format point, no accuracy point. Mode is best-effort
        // from the leading token for bookkeeping only.
        const Mode m = !traj.tokens.empty() && traj.tokens[0].kind == TokenKind::ModeThink
                           ? Mode::Think
                           : Mode::NoThink;
        return {m, false, 0.0};
    }
    const bool correct = p->answer == oracle_answer(task);
    return {p->mode, correct, 1.0 + (correct ? 1.0 : 0.0)};
}

}  // namespace thinkrl
