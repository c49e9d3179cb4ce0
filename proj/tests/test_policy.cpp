#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "thinkrl/common.hpp"
#include "thinkrl/policy.hpp"
#include "thinkrl/reward.hpp"
#include "thinkrl/rng.hpp"

using namespace thinkrl;

namespace {

PolicyParams random_params(const WorldDims& dims, RngStream& rng) {
    auto p = PolicyParams::zeros(dims);
    for (auto* table : {&p.mode, &p.reason, &p.ans_think, &p.ans_nothink})
        for (double& v : *table) v = 2.0 * rng.uniform01() - 1.0;
    return p;
}

Task some_task(const WorldDims& dims, RngStream& rng) {
    Task t;
    t.id = "t0";
    t.coarse = rng.uniform_int(dims.n_coarse);
    t.fine = rng.uniform_int(dims.n_fine);
    t.answer = rng.uniform_int(dims.n_answers);
    t.family = Family::Hard;
    return t;
}

double sum_logprob_unforced(const PolicyParams& p, const Task& task, const Trajectory& traj) {
    const auto lps = logprob(p, task, traj);
    double s = 0.0;
    for (std::size_t i = traj.forced_prefix_len; i < lps.size(); ++i) s += lps[i];
    return s;
}

// Central finite differences of the summed unforced-token logprob.
double max_rel_grad_err(const PolicyParams& p, const Task& task, const Trajectory& traj) {
    const PolicyParams analytic = grad_logprob(p, task, traj);
    const double h = 1e-5;
    double worst = 0.0;
    auto tables = {&PolicyParams::mode, &PolicyParams::reason, &PolicyParams::ans_think,
                   &PolicyParams::ans_nothink};
    for (auto member : tables) {
        const auto& an = analytic.*member;
        for (std::size_t j = 0; j < an.size(); ++j) {
            PolicyParams lo = p, hi = p;
            (lo.*member)[j] -= h;
            (hi.*member)[j] += h;
            const double fd =
                (sum_logprob_unforced(hi, task, traj) - sum_logprob_unforced(lo, task, traj)) /
                (2 * h);
            const double err = std::abs(fd - an[j]) / std::max(1.0, std::abs(fd));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("zero tables give the documented uniform logprobs") {
    const WorldDims dims{8, 4, 4};
    const auto p = PolicyParams::zeros(dims);
    Task task;
    task.coarse = 3;
    task.answer = 2;

    Trajectory forced;
    forced.tokens = {{TokenKind::ModeNoThink, 0}, {TokenKind::Answer, 2}};
    forced.logprobs = {0.0, 0.0};
    forced.forced_prefix_len = 1;
    const auto lp_forced = logprob(p, task, forced);
    REQUIRE(lp_forced.size() == 2);
    CHECK(lp_forced[0] == 0.0);
    CHECK(lp_forced[1] == doctest::Approx(-std::log(4.0)).epsilon(1e-12));

    Trajectory free = forced;
    free.forced_prefix_len = 0;
    const auto lp_free = logprob(p, task, free);
    CHECK(lp_free[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
    CHECK(lp_free[1] == doctest::Approx(-std::log(4.0)).epsilon(1e-12));

    // Rescoring a forced prefix prices the mode token at the model's own odds.
    const auto lp_rescored = logprob(p, task, forced, true);
    CHECK(lp_rescored[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("sampled trajectories are always well formed and logprobs replay exactly") {
    RngStream rng(11);
    const WorldDims dims{4, 3, 5};
    for (int i = 0; i < 1000; ++i) {
        const auto p = random_params(dims, rng);
        const Task task = some_task(dims, rng);
        std::optional<ModeForce> force;
        if (i % 3 == 1) force = ModeForce::Think;
        if (i % 3 == 2) force = ModeForce::NoThink;
        const auto traj = sample_trajectory(p, task, force, rng);
        validate_trajectory(traj, dims);
        CHECK(try_parse(traj).has_value());
        CHECK(traj.forced_prefix_len == (force ? 1 : 0));
        if (force) {
            CHECK(traj.tokens[0].kind ==
                  (*force == ModeForce::Think ? TokenKind::ModeThink : TokenKind::ModeNoThink));
            CHECK(traj.logprobs[0] == 0.0);
        }
        const auto lps = logprob(p, task, traj);
        REQUIRE(lps.size() == traj.logprobs.size());
        for (std::size_t t = 0; t < lps.size(); ++t) CHECK(lps[t] == traj.logprobs[t]);
        double total = 0.0;
        for (double v : lps) total += v;
        CHECK(total <= 0.0);
    }
}

TEST_CASE("a strong think logit dominates sampling") {
    const WorldDims dims{2, 2, 2};
    auto p = PolicyParams::zeros(dims);
    Task task;
    task.coarse = 1;
    p.mode[p.mode_index(1, 0)] = 10.0;
    p.mode[p.mode_index(1, 1)] = -10.0;
    RngStream rng(13);
    int think = 0;
    for (int i = 0; i < 10000; ++i)
        think += sample_trajectory(p, task, std::nullopt, rng).tokens[0].kind ==
                 TokenKind::ModeThink;
    CHECK(think >= 9900);
}

TEST_CASE("gradient at uniform parameters is one-hot minus a quarter") {
    const WorldDims dims{8, 4, 4};
    const auto p = PolicyParams::zeros(dims);
    Task task;
    task.coarse = 2;

    Trajectory traj;
    traj.tokens = {{TokenKind::ModeNoThink, 0}, {TokenKind::Answer, 3}};
    traj.logprobs = {-std::log(2.0), -std::log(4.0)};

    const auto g = grad_logprob(p, task, traj);
    for (int a = 0; a < 4; ++a) {
        const double want = a == 3 ? 0.75 : -0.25;
        CHECK(g.ans_nothink[g.ans_nothink_index(2, a)] ==
              doctest::Approx(want).epsilon(1e-12));
    }
    CHECK(g.mode[g.mode_index(2, 1)] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(g.mode[g.mode_index(2, 0)] == doctest::Approx(-0.5).epsilon(1e-12));

    // Forcing the mode zeroes its row in the gradient.
    Trajectory forced = traj;
    forced.logprobs[0] = 0.0;
    forced.forced_prefix_len = 1;
    const auto gf = grad_logprob(p, task, forced);
    CHECK(gf.mode[gf.mode_index(2, 0)] == 0.0);
    CHECK(gf.mode[gf.mode_index(2, 1)] == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
    RngStream rng(17);
    const WorldDims dims{3, 2, 3};
    for (int i = 0; i < 20; ++i) {
        const auto p = random_params(dims, rng);
        const Task task = some_task(dims, rng);
        std::optional<ModeForce> force;
        if (i % 2) force = ModeForce::Think;
        const auto traj = sample_trajectory(p, task, force, rng);
        CHECK(max_rel_grad_err(p, task, traj) < 1e-5);
    }
}

TEST_CASE("weighted gradient accumulation is linear in the weights") {
    RngStream rng(19);
    const WorldDims dims{2, 2, 2};
    const auto p = random_params(dims, rng);
    const Task task = some_task(dims, rng);
    const auto traj = sample_trajectory(p, task, std::nullopt, rng);

    const std::vector<double> ones(traj.tokens.size(), 1.0);
    auto g1 = PolicyParams::zeros(dims);
    add_weighted_logprob_grad(p, task, traj, ones, g1);

    const std::vector<double> threes(traj.tokens.size(), 3.0);
    auto g3 = PolicyParams::zeros(dims);
    add_weighted_logprob_grad(p, task, traj, threes, g3);

    auto scaled = PolicyParams::zeros(dims);
    scaled.add_scaled(g1, 3.0);
    for (std::size_t j = 0; j < scaled.mode.size(); ++j)
        CHECK(scaled.mode[j] == doctest::Approx(g3.mode[j]).epsilon(1e-12));
    for (std::size_t j = 0; j < scaled.ans_nothink.size(); ++j)
        CHECK(scaled.ans_nothink[j] == doctest::Approx(g3.ans_nothink[j]).epsilon(1e-12));
}

TEST_CASE("gradient ascent steps are exact and guarded") {
    const WorldDims dims{2, 2, 2};
    const auto p = PolicyParams::zeros(dims);

    OptState opt;
    opt.learning_rate = 0.1;
    auto zero = PolicyParams::zeros(dims);
    CHECK(apply_step(p, zero, opt) == p);
    CHECK(opt.step_count == 1);

    auto g = PolicyParams::zeros(dims);
    g.mode[0] = 1.0;
    const auto stepped = apply_step(p, g, opt);
    CHECK(stepped.mode[0] == 0.1);
    CHECK(opt.step_count == 2);

    OptState frozen;
    frozen.learning_rate = 0.0;
    CHECK(apply_step(p, g, frozen) == p);

    g.mode[0] = std::nan("");
    CHECK_THROWS_WITH_AS(apply_step(p, g, opt), doctest::Contains("mode"), NumericError);
}

TEST_CASE("trajectory validation rejects illegal shapes") {
    const WorldDims dims{2, 2, 2};
    Trajectory bad;
    bad.tokens = {{TokenKind::ModeThink, 0}, {TokenKind::Answer, 0}};  // missing reason
    bad.logprobs = {0.0, 0.0};
    CHECK_THROWS_AS(validate_trajectory(bad, dims), ShapeError);

    Trajectory range;
    range.tokens = {{TokenKind::ModeNoThink, 0}, {TokenKind::Answer, 5}};
    range.logprobs = {0.0, 0.0};
    CHECK_THROWS_AS(validate_trajectory(range, dims), ShapeError);

    Trajectory misaligned;
    misaligned.tokens = {{TokenKind::ModeNoThink, 0}, {TokenKind::Answer, 0}};
    misaligned.logprobs = {0.0};
    CHECK_THROWS_AS(validate_trajectory(misaligned, dims), ShapeError);

    Trajectory prefix;
    prefix.tokens = {{TokenKind::ModeNoThink, 0}, {TokenKind::Answer, 0}};
    prefix.logprobs = {0.0, 0.0};
    prefix.forced_prefix_len = 2;
    CHECK_THROWS_AS(validate_trajectory(prefix, dims), ShapeError);
}

TEST_CASE("checkpoints round-trip bit for bit") {
    RngStream rng(23);
    const WorldDims dims{5, 3, 4};
    auto p = random_params(dims, rng);
    p.mode[0] = 0.1 + 0.2;  // a value whose shortest decimal form matters
    const auto file = std::filesystem::temp_directory_path() / "thinkrl_test_params.json";
    save_params(p, file);
    CHECK(load_params(file) == p);
    std::filesystem::remove(file);
}
