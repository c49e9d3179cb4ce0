#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "thinkrl/common.hpp"
#include "thinkrl/eval.hpp"
#include "thinkrl/policy.hpp"
#include "thinkrl/task_world.hpp"

using namespace thinkrl;

namespace {

// Small labeled world: every easy task L1, every hard task L4.
std::vector<Task> labeled_world(WorldConfig wcfg) {
    auto tasks = generate_world(wcfg);
    for (auto& t : tasks)
        t.level = t.family == Family::Easy ? Level::L1 : Level::L4;
    return tasks;
}

PolicyParams always_think(const WorldDims& dims) {
    auto p = PolicyParams::zeros(dims);
    for (int c = 0; c < dims.n_coarse; ++c) {
        p.mode[p.mode_index(c, 0)] = 50.0;
        p.mode[p.mode_index(c, 1)] = -50.0;
    }
    return p;
}

const EvalRow& row_for(const std::vector<EvalRow>& rows, const std::string& level) {
    for (const auto& r : rows)
        if (r.level == level) return r;
    REQUIRE_MESSAGE(false, "missing row " << level);
    static EvalRow dummy;
    return dummy;
}

}  // namespace

TEST_CASE("evaluation rows cover populated levels in order plus a weighted ALL") {
    WorldConfig wcfg;
    wcfg.n_tasks = 60;
    wcfg.easy_fraction = 0.5;
    const auto tasks = labeled_world(wcfg);

    const auto rows = evaluate(always_think(wcfg.dims()), tasks, 2, 7);
    REQUIRE(rows.size() == 3);  // L1, L4, ALL
    CHECK(rows[0].level == "L1");
    CHECK(rows[1].level == "L4");
    CHECK(rows[2].level == "ALL");

    const auto& all = rows[2];
    CHECK(all.n == rows[0].n + rows[1].n);
    CHECK(all.n == 120);  // 60 tasks, 2 samples each
    const double wacc = (rows[0].acc * rows[0].n + rows[1].acc * rows[1].n) / all.n;
    CHECK(all.acc == doctest::Approx(wacc).epsilon(1e-12));
    const double wthink =
        (rows[0].think_rate * rows[0].n + rows[1].think_rate * rows[1].n) / all.n;
    CHECK(all.think_rate == doctest::Approx(wthink).epsilon(1e-12));

    // A mode table pinned to think yields think everywhere, and every think
    // response carries exactly one reasoning token.
    for (const auto& r : rows) {
        CHECK(r.think_rate == 1.0);
        CHECK(r.mean_trace_len == 1.0);
    }
}

TEST_CASE("an oracle-aligned no-think table is perfect on the easy world") {
    WorldConfig wcfg;
    wcfg.n_tasks = 40;
    wcfg.easy_fraction = 1.0;
    const auto tasks = labeled_world(wcfg);
    const WorldDims dims = wcfg.dims();

    auto p = PolicyParams::zeros(dims);
    for (int c = 0; c < dims.n_coarse; ++c) {
        p.mode[p.mode_index(c, 0)] = -50.0;
        p.mode[p.mode_index(c, 1)] = 50.0;
    }
    for (const auto& t : tasks)
        p.ans_nothink[p.ans_nothink_index(t.coarse, t.answer)] = 50.0;

    const auto rows = evaluate(p, tasks, 3, 11);
    const auto& all = row_for(rows, "ALL");
    CHECK(all.acc == 1.0);
    CHECK(all.think_rate == 0.0);
    CHECK(all.mean_trace_len == 0.0);
    CHECK(all.n == 120);
}

TEST_CASE("unlabeled tasks are refused with their ids") {
    WorldConfig wcfg;
    wcfg.n_tasks = 3;
    auto tasks = generate_world(wcfg);  // levels unset
    CHECK_THROWS_WITH_AS(evaluate(PolicyParams::zeros(wcfg.dims()), tasks, 1, 7),
                         doctest::Contains(tasks[0].id.c_str()), InputError);
}

TEST_CASE("mode comparison pins the forced tables and replays the unforced one") {
    WorldConfig wcfg;
    wcfg.n_tasks = 30;
    const auto tasks = labeled_world(wcfg);
    const WorldDims dims = wcfg.dims();

    RngStream rng(3);
    auto p = PolicyParams::zeros(dims);
    for (double& v : p.mode) v = 2.0 * rng.uniform01() - 1.0;
    for (double& v : p.ans_nothink) v = 2.0 * rng.uniform01() - 1.0;

    const auto cmp = compare_modes(p, tasks, 2, 7);
    CHECK(row_for(cmp.all_think, "ALL").think_rate == 1.0);
    CHECK(row_for(cmp.all_nothink, "ALL").think_rate == 0.0);
    CHECK(row_for(cmp.all_nothink, "ALL").mean_trace_len == 0.0);

    const auto unforced = evaluate(p, tasks, 2, 7);
    REQUIRE(cmp.adaptive.size() == unforced.size());
    for (std::size_t i = 0; i < unforced.size(); ++i) {
        CHECK(cmp.adaptive[i].level == unforced[i].level);
        CHECK(cmp.adaptive[i].acc == unforced[i].acc);
        CHECK(cmp.adaptive[i].think_rate == unforced[i].think_rate);
    }

    const auto forced = evaluate(p, tasks, 2, 7, ModeForce::Think);
    for (std::size_t i = 0; i < forced.size(); ++i)
        CHECK(cmp.all_think[i].acc == forced[i].acc);
}

TEST_CASE("family breakdown agrees with the level table in aggregate") {
    WorldConfig wcfg;
    wcfg.n_tasks = 50;
    wcfg.easy_fraction = 0.4;
    const auto tasks = labeled_world(wcfg);

    RngStream rng(5);
    auto p = PolicyParams::zeros(wcfg.dims());
    for (auto* table : {&p.mode, &p.reason, &p.ans_think, &p.ans_nothink})
        for (double& v : *table) v = 2.0 * rng.uniform01() - 1.0;

    const auto fam = evaluate_by_family(p, tasks, 2, 7);
    REQUIRE(fam.count(Family::Easy) == 1);
    REQUIRE(fam.count(Family::Hard) == 1);
    const auto& easy = fam.at(Family::Easy);
    const auto& hard = fam.at(Family::Hard);
    CHECK(easy.n == 40);
    CHECK(hard.n == 60);

    const auto rows = evaluate(p, tasks, 2, 7);
    const auto& all = row_for(rows, "ALL");
    const int n = easy.n + hard.n;
    CHECK(all.n == n);
    CHECK(all.acc ==
          doctest::Approx((easy.acc * easy.n + hard.acc * hard.n) / n).epsilon(1e-12));
    CHECK(all.think_rate ==
          doctest::Approx((easy.think_rate * easy.n + hard.think_rate * hard.n) / n)
              .epsilon(1e-12));

    // Levels were assigned per family, so the family view and the level view
    // describe the same partition.
    CHECK(easy.acc == doctest::Approx(row_for(rows, "L1").acc).epsilon(1e-12));
    CHECK(hard.acc == doctest::Approx(row_for(rows, "L4").acc).epsilon(1e-12));
}

TEST_CASE("evaluation is deterministic in the seed") {
    WorldConfig wcfg;
    wcfg.n_tasks = 20;
    const auto tasks = labeled_world(wcfg);
    RngStream rng(9);
    auto p = PolicyParams::zeros(wcfg.dims());
    for (double& v : p.mode) v = rng.uniform01();

    const auto a = evaluate(p, tasks, 4, 123);
    const auto b = evaluate(p, tasks, 4, 123);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].acc == b[i].acc);
        CHECK(a[i].think_rate == b[i].think_rate);
        CHECK(a[i].mean_trace_len == b[i].mean_trace_len);
    }
}

TEST_CASE("eval tables survive the CSV round trip byte for byte") {
    std::vector<EvalRow> rows;
    rows.push_back({"L1", 1.0, 0.0, 43, 0.0});
    rows.push_back({"L3", 0.8348623853211009, 0.8348623853211009, 109, 0.8348623853211009});
    rows.push_back({"ALL", 0.99, 0.5, 400, 0.5});

    const auto file = std::filesystem::temp_directory_path() / "thinkrl_test_eval.csv";
    write_eval_csv(rows, file);

    std::ifstream in(file);
    std::string header;
    std::getline(in, header);
    CHECK(header == "level,acc,think_rate,n,mean_trace_len");

    const auto back = read_eval_csv(file);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].level == rows[i].level);
        CHECK(back[i].acc == rows[i].acc);  // exact: shortest round-trip form
        CHECK(back[i].think_rate == rows[i].think_rate);
        CHECK(back[i].n == rows[i].n);
        CHECK(back[i].mean_trace_len == rows[i].mean_trace_len);
    }

    // Same rows, same bytes.
    const auto file2 = std::filesystem::temp_directory_path() / "thinkrl_test_eval2.csv";
    write_eval_csv(rows, file2);
    std::ifstream a(file, std::ios::binary), b(file2, std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    std::filesystem::remove(file);
    std::filesystem::remove(file2);
}

TEST_CASE("malformed CSV lines are rejected with their line number") {
    const auto file = std::filesystem::temp_directory_path() / "thinkrl_test_bad.csv";
    {
        std::ofstream out(file);
        out << "level,acc,think_rate,n,mean_trace_len\n";
        out << "L1,1,0,43,0\n";
        out << "L2,not_a_number,0,10,0\n";
    }
    CHECK_THROWS_WITH_AS(read_eval_csv(file), doctest::Contains("line 3"), ParseError);
    std::filesystem::remove(file);
}
