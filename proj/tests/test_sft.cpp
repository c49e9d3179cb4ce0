#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "thinkrl/common.hpp"
#include "thinkrl/reward.hpp"
#include "thinkrl/sft.hpp"
#include "thinkrl/task_world.hpp"

using namespace thinkrl;

namespace {

std::vector<Task> default_world() { return generate_world(WorldConfig{}); }

int count_mode(const std::vector<SftExample>& corpus, TokenKind first) {
    int n = 0;
    for (const auto& e : corpus) n += e.target.tokens[0].kind == first;
    return n;
}

std::vector<Task> labeled_world() {
    auto tasks = default_world();
    // Deterministic labels: easy tasks split L1/L2, hard tasks L3/L4/L5.
    int i = 0;
    for (auto& t : tasks) {
        if (t.family == Family::Easy)
            t.level = (i++ % 2) ? Level::L1 : Level::L2;
        else
            t.level = (i % 3 == 0) ? Level::L3 : ((i % 3 == 1) ? Level::L4 : Level::L5), ++i;
    }
    return tasks;
}

}  // namespace

TEST_CASE("coarse corpus keeps a two-to-one mode ratio") {
    WorldConfig cfg;
    cfg.n_tasks = 300;
    const auto tasks = generate_world(cfg);
    auto rng = SeedSeq(7).mix("corpus-test").stream();
    const auto corpus = build_coarse_corpus(tasks, rng);
    REQUIRE(corpus.size() == 300);
    CHECK(count_mode(corpus, TokenKind::ModeNoThink) == 100);
    CHECK(count_mode(corpus, TokenKind::ModeThink) == 200);

    for (const auto& e : corpus) {
        const auto parsed = try_parse(e.target);
        REQUIRE(parsed.has_value());
    }
}

TEST_CASE("a single task rounds toward think") {
    auto tasks = default_world();
    tasks.resize(1);
    auto rng = SeedSeq(7).mix("corpus-test").stream();
    const auto corpus = build_coarse_corpus(tasks, rng);
    REQUIRE(corpus.size() == 1);
    CHECK(corpus[0].target.tokens[0].kind == TokenKind::ModeThink);
}

TEST_CASE("think targets carry the oracle trace and correct answer") {
    const auto tasks = default_world();
    auto rng = SeedSeq(9).mix("corpus-test").stream();
    const auto corpus = build_coarse_corpus(tasks, rng);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& t = corpus[i].target;
        CHECK(corpus[i].task_id == tasks[i].id);
        if (t.tokens[0].kind == TokenKind::ModeThink) {
            CHECK(t.tokens[1].value == tasks[i].fine);
            CHECK(t.tokens[2].value == tasks[i].answer);
        } else {
            CHECK(t.tokens[1].value == tasks[i].answer);
        }
    }
}

TEST_CASE("coarse mode assignment never consults the task family") {
    auto a = default_world();
    auto b = a;
    for (auto& t : b)  // flip every family; assignment must not notice
        t.family = t.family == Family::Easy ? Family::Hard : Family::Easy;
    auto rng_a = SeedSeq(21).mix("corpus-test").stream();
    auto rng_b = SeedSeq(21).mix("corpus-test").stream();
    const auto ca = build_coarse_corpus(a, rng_a);
    const auto cb = build_coarse_corpus(b, rng_b);
    REQUIRE(ca.size() == cb.size());
    for (std::size_t i = 0; i < ca.size(); ++i)
        CHECK(ca[i].target.tokens[0].kind == cb[i].target.tokens[0].kind);
}

TEST_CASE("precise corpus balances levels one-to-one") {
    const auto tasks = labeled_world();
    auto rng = SeedSeq(11).mix("precise-test").stream();
    const auto corpus = build_precise_corpus(tasks, rng);

    int nothink = 0, think = 0;
    for (const auto& e : corpus) {
        const Task* task = nullptr;
        for (const auto& t : tasks)
            if (t.id == e.task_id) { task = &t; break; }
        REQUIRE(task != nullptr);
        const bool is_think = e.target.tokens[0].kind == TokenKind::ModeThink;
        if (is_think) {
            ++think;
            CHECK((task->level == Level::L3 || task->level == Level::L4 ||
                   task->level == Level::L5));
        } else {
            ++nothink;
            CHECK((task->level == Level::L1 || task->level == Level::L2));
        }
    }
    CHECK(think == nothink);
    CHECK(think > 0);

    auto rng2 = SeedSeq(11).mix("precise-test").stream();
    const auto again = build_precise_corpus(tasks, rng2);
    REQUIRE(again.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(again[i].task_id == corpus[i].task_id);
}

TEST_CASE("unlabeled tasks are rejected by the precise builder") {
    auto tasks = default_world();  // no levels
    auto rng = SeedSeq(1).stream();
    CHECK_THROWS_WITH_AS(build_precise_corpus(tasks, rng),
                         doctest::Contains(tasks[0].id.c_str()), InputError);
}

TEST_CASE("supervised loss has the uniform-table closed form") {
    const WorldDims dims{8, 4, 4};
    const auto p = PolicyParams::zeros(dims);
    Task task;
    task.id = "t0";
    task.coarse = 1;
    task.answer = 3;

    SftExample nothink;
    nothink.task_id = "t0";
    nothink.target.tokens = {{TokenKind::ModeNoThink, 0}, {TokenKind::Answer, 3}};
    nothink.target.logprobs = {0.0, 0.0};
    CHECK(sft_loss(p, task, nothink) ==
          doctest::Approx(std::log(2.0) + std::log(4.0)).epsilon(1e-12));

    SftExample think;
    think.task_id = "t0";
    think.target.tokens = {{TokenKind::ModeThink, 0}, {TokenKind::Reason, 2},
                           {TokenKind::Answer, 3}};
    think.target.logprobs = {0.0, 0.0, 0.0};
    CHECK(sft_loss(p, task, think) ==
          doctest::Approx(std::log(2.0) + 2 * std::log(4.0)).epsilon(1e-12));

    // A table putting probability one on the target drives the loss to zero.
    auto sharp = PolicyParams::zeros(dims);
    sharp.mode[sharp.mode_index(1, 1)] = 1000.0;
    sharp.ans_nothink[sharp.ans_nothink_index(1, 3)] = 1000.0;
    CHECK(sft_loss(sharp, task, nothink) == 0.0);

    // Never negative, whatever the parameters.
    auto rng = SeedSeq(3).stream();
    for (int i = 0; i < 200; ++i) {
        auto q = PolicyParams::zeros(dims);
        for (double& v : q.mode) v = 4.0 * rng.uniform01() - 2.0;
        for (double& v : q.ans_nothink) v = 4.0 * rng.uniform01() - 2.0;
        CHECK(sft_loss(q, task, nothink) >= 0.0);
    }
}

TEST_CASE("one epoch per corpus lowers the mean loss and fixes the format") {
    const auto tasks = labeled_world();
    const WorldDims dims{8, 4, 4};
    auto corpus_rng = SeedSeq(7).mix("c").stream();
    const auto coarse = build_coarse_corpus(tasks, corpus_rng);
    auto precise_rng = SeedSeq(7).mix("p").stream();
    const auto precise = build_precise_corpus(tasks, precise_rng);

    SftConfig cfg;
    const auto result = train_sft(PolicyParams::zeros(dims), tasks, coarse, precise, cfg);
    REQUIRE(result.log.size() == 2);
    CHECK(result.log[0].phase == "coarse");
    CHECK(result.log[1].phase == "precise");
    for (const auto& phase : result.log) CHECK(phase.loss_after < phase.loss_before);

    auto rng = SeedSeq(99).stream();
    for (int i = 0; i < 500; ++i) {
        const auto& task = tasks[i % tasks.size()];
        const auto force = i % 2 ? ModeForce::Think : ModeForce::NoThink;
        const auto traj = sample_trajectory(result.params, task, force, rng);
        validate_trajectory(traj, dims);
        CHECK(try_parse(traj).has_value());
    }

    const auto again = train_sft(PolicyParams::zeros(dims), tasks, coarse, precise, cfg);
    CHECK(again.params == result.params);
}

TEST_CASE("corpus files round-trip with a null reason for no-think") {
    const auto tasks = default_world();
    auto rng = SeedSeq(5).stream();
    const auto corpus = build_coarse_corpus(tasks, rng);
    const auto file = std::filesystem::temp_directory_path() / "thinkrl_test_corpus.jsonl";
    save_corpus(corpus, file);

    const auto back = load_corpus(file);
    REQUIRE(back.size() == corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        CHECK(back[i].task_id == corpus[i].task_id);
        CHECK(back[i].tier == corpus[i].tier);
        CHECK(back[i].target.tokens == corpus[i].target.tokens);
    }

    std::ifstream in(file);
    std::string line;
    bool saw_null_reason = false;
    while (std::getline(in, line))
        if (line.find("\"reason\":null") != std::string::npos) saw_null_reason = true;
    CHECK(saw_null_reason);
    in.close();

    std::ofstream out(file);
    out << R"({"task_id":"t0","mode":"nothink","answer":1,"tier":"coarse"})" << '\n';
    out.close();
    CHECK_THROWS_AS(load_corpus(file), ParseError);
    std::filesystem::remove(file);
}
