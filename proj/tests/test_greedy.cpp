#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "equalloc/greedy.hpp"

using namespace equalloc;

namespace {

AnalyticCurve table1_curve() {
    return AnalyticCurve({1, .3, .3, .3, .3, .5, .3, .3, .3, .3, 1, .3, .3, .3, .3, 1}, 4, CurveForm::sqrt);
}
const CostModel kCost({1, 1, 2, 1}, 1000);
const UtilitySpec kEqual({1, 1, 1, 1}, 0, Transform::identity, true);
const UtilitySpec kPriority({1, 1, 1, 1.5}, 0, Transform::identity, true);

GreedyConfig step(double s) {
    GreedyConfig cfg;
    cfg.step_cost = s;
    return cfg;
}

}  // namespace

TEST_CASE("run_greedy: Table 1 with true marginals") {
    const auto eq = run_greedy(table1_curve(), kEqual, kCost, step(1));
    CHECK(std::abs(eq.utility - 21.4) <= 0.05);
    const auto pri = run_greedy(table1_curve(), kPriority, kCost, step(1));
    CHECK(std::abs(pri.utility - 22.1) <= 0.05);
    CHECK(eq.trace.steps.size() == 1000);
    CHECK(eq.trace.residual_budget == doctest::Approx(0.0));
}

TEST_CASE("run_greedy: separable tie resolves to (1, 1) under either tie-break") {
    const AnalyticCurve curve({1, 0, 0, 1}, 2, CurveForm::sqrt);
    const CostModel cost({1, 1}, 2);
    for (TieBreak tb : {TieBreak::lowest_index, TieBreak::random}) {
        for (std::uint64_t seed = 0; seed < 8; ++seed) {
            GreedyConfig cfg = step(1);
            cfg.tie_break = tb;
            cfg.tie_seed = seed;
            const auto r = run_greedy(curve, UtilitySpec({1, 1}), cost, cfg);
            CHECK(r.alloc == Allocation({1, 1}));
        }
    }
}

TEST_CASE("run_greedy: argument guards") {
    CHECK_THROWS_AS(run_greedy(table1_curve(), kEqual, kCost, step(0)), PreconditionError);
    CHECK_THROWS_AS(run_greedy(table1_curve(), kEqual, kCost, step(2000)), PreconditionError);
    GreedyConfig bad_start = step(1);
    bad_start.start = Allocation({2000, 0, 0, 0});
    CHECK_THROWS_AS(run_greedy(table1_curve(), kEqual, kCost, bad_start), PreconditionError);
    CHECK_THROWS_AS(run_greedy(table1_curve(), UtilitySpec::equal(2), kCost, step(1)), DimensionError);
}

TEST_CASE("run_greedy: residual budget below one step is left unspent") {
    const AnalyticCurve curve({1, 0, 0, 1}, 2, CurveForm::sqrt);
    const auto r = run_greedy(curve, UtilitySpec({1, 1}), CostModel({1, 1}, 10.5), step(2));
    CHECK(r.trace.steps.size() == 5);
    CHECK(r.trace.residual_budget == doctest::Approx(0.5));
}

TEST_CASE("trace: fields, budget safety and monotone counts") {
    GreedyConfig cfg = step(7);
    cfg.start = Allocation({10, 0, 5, 0});
    const auto r = run_greedy(table1_curve(), kPriority, kCost, cfg);
    CHECK(r.trace.start_spend == doctest::Approx(20.0));
    std::vector<double> prev{10, 0, 5, 0};
    double prev_spend = r.trace.start_spend;
    for (const auto& s : r.trace.steps) {
        CHECK(s.spend <= kCost.budget + 1e-9);
        CHECK(s.spend == doctest::Approx(prev_spend + 7));
        REQUIRE(s.counts.size() == 4);
        REQUIRE(s.marginal_est.size() == 4);
        REQUIRE(s.marginal_true.size() == 4);
        for (int k = 0; k < 4; ++k) CHECK(s.counts[k] >= prev[k]);
        const auto best = std::max_element(s.marginal_true.begin(), s.marginal_true.end());
        CHECK(static_cast<std::size_t>(best - s.marginal_true.begin()) == s.group);
        prev = s.counts;
        prev_spend = s.spend;
    }
    CHECK(r.trace.steps.back().utility == doctest::Approx(r.utility));
}

TEST_CASE("batch_enum_optimum: examples") {
    const AnalyticCurve sep({1, 0, 0, 2}, 2, CurveForm::sqrt);
    const UtilitySpec u({1, 1});
    const CostModel cost({1, 1}, 4);
    const auto oracle = batch_enum_optimum(sep, u, cost, 1);
    const auto greedy = run_greedy(sep, u, cost, step(1));
    CHECK(oracle.utility == greedy.utility);
    CHECK(oracle.method == SolveMethod::batch_enum);
    // 5 * 6 / 2 compositions of at most 4 batches over 2 groups.
    CHECK(oracle.iterations == 15);

    const AnalyticCurve one({1}, 1, CurveForm::log1p);
    const auto single = batch_enum_optimum(one, UtilitySpec({1}), CostModel({2}, 6), 2);
    CHECK(single.alloc == Allocation({3}));

    const CostModel t1({1, 1, 2, 1}, 1000);
    const auto coarse = batch_enum_optimum(table1_curve(), kEqual, t1, 100);
    CHECK(coarse.utility >= run_greedy(table1_curve(), kEqual, t1, step(100)).utility - 1e-12);

    CHECK_THROWS_AS(batch_enum_optimum(table1_curve(), kEqual, t1, 10), CapacityError);
    CHECK_THROWS_AS(batch_enum_optimum(table1_curve(), kEqual, t1, 300), PreconditionError);
}

TEST_CASE("property: greedy matches batch enumeration on separable instances") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    std::uniform_int_distribution<int> groups(1, 4);
    std::uniform_int_distribution<int> steps(1, 12);
    for (int trial = 0; trial < 200; ++trial) {
        const auto k = static_cast<std::size_t>(groups(rng));
        std::vector<double> g(k * k, 0.0), a(k), c(k);
        for (std::size_t i = 0; i < k; ++i) {
            g[i * k + i] = u(rng);
            a[i] = u(rng);
            c[i] = u(rng);
        }
        const CurveForm form = trial % 2 ? CurveForm::sqrt : CurveForm::log1p;
        const AnalyticCurve curve(g, k, form);
        const double s = u(rng) * 10;
        const CostModel cost(c, s * steps(rng));
        const UtilitySpec util(a);
        const auto greedy = run_greedy(curve, util, cost, step(s));
        const auto oracle = batch_enum_optimum(curve, util, cost, s);
        CHECK(std::abs(greedy.utility - oracle.utility) <= 1e-9);
    }
}

TEST_CASE("baselines: Table 1 equal, representative and parity rows") {
    const auto eq = equal_policy(kCost);
    CHECK(eq == Allocation({200, 200, 200, 200}));
    const auto m_eq = eval_perf(table1_curve(), eq);
    const std::vector<double> want_eq{19.5, 16.7, 19.5, 19.5};
    for (int k = 0; k < 4; ++k) CHECK(std::abs(m_eq[k] - want_eq[k]) <= 0.05);

    const std::vector<double> shares{2, 2, 2, 1};
    const auto rep = representative_policy(kCost, shares);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(rep[k] - 222.2) <= 0.5);
    CHECK(std::abs(rep[3] - 111.1) <= 0.5);
    const auto m_rep = eval_perf(table1_curve(), rep);
    const std::vector<double> want_rep{19.7, 16.7, 19.7, 17.6};
    for (int k = 0; k < 4; ++k) CHECK(std::abs(m_rep[k] - want_rep[k]) <= 0.05);
    const auto rep_steps = representative_policy(kCost, shares, 1);
    CHECK(check_feasible(rep_steps, kCost));
    for (int k = 0; k < 4; ++k) CHECK(std::abs(rep_steps[k] * kCost.costs[k] - std::round(rep_steps[k] * kCost.costs[k])) < 1e-9);

    const auto parity = parity_policy(as_performance_fn(table1_curve()), kCost, 1);
    for (double m : eval_perf(table1_curve(), parity.alloc)) CHECK(std::abs(m - 18.8) <= 0.1);

    CHECK_THROWS_AS(representative_policy(kCost, std::vector<double>{0, 0, 0, 0}), PreconditionError);
    CHECK_THROWS_AS(representative_policy(kCost, std::vector<double>{1, 1}), DimensionError);
    BaselineRequest req;
    req.kind = BaselineKind::parity;
    CHECK_THROWS_AS(baseline_policy(req, kCost), PreconditionError);
}

TEST_CASE("property: parity spread is bounded by the largest single-step jump") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t k = 3;
        // Diagonally dominant: buying from a group lifts it more than any other.
        std::vector<double> g(k * k);
        for (std::size_t i = 0; i < k * k; ++i) g[i] = i % (k + 1) == 0 ? 1.0 + u(rng) : 0.3 * u(rng);
        const AnalyticCurve curve(g, k, CurveForm::sqrt);
        const CostModel cost({u(rng), u(rng), u(rng)}, 200);
        const auto r = parity_policy(as_performance_fn(curve), cost, 1);
        // Largest jump any group can cause in any performance over one step.
        double jump = 0.0;
        Allocation prev = Allocation::zeros(k);
        for (const auto& s : r.trace.steps) {
            const Allocation next{std::vector<double>(s.counts)};
            const auto a = eval_perf(curve, prev);
            const auto b = eval_perf(curve, next);
            for (std::size_t i = 0; i < k; ++i) jump = std::max(jump, b[i] - a[i]);
            prev = next;
        }
        const auto m = eval_perf(curve, r.alloc);
        const auto [lo, hi] = std::minmax_element(m.begin(), m.end());
        CHECK(*hi - *lo <= jump + 1e-12);
    }
}
