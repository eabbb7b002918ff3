#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "equalloc/errors.hpp"
#include "equalloc/optimizer.hpp"

using namespace equalloc;

namespace {

AnalyticCurve table1_curve() {
    return AnalyticCurve({1, .3, .3, .3, .3, .5, .3, .3, .3, .3, 1, .3, .3, .3, .3, 1}, 4, CurveForm::sqrt);
}
const CostModel kCost({1, 1, 2, 1}, 1000);
const UtilitySpec kEqual({1, 1, 1, 1}, 0, Transform::identity, true);
const UtilitySpec kPriority({1, 1, 1, 1.5}, 0, Transform::identity, true);

struct RandomInstance {
    AnalyticCurve curve;
    UtilitySpec utility;
    CostModel cost;
};

RandomInstance random_instance(std::mt19937_64& rng, std::size_t k, CurveForm form) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<double> g(k * k);
    for (double& x : g) x = u(rng);
    std::vector<double> a(k), c(k);
    for (auto& x : a) x = u(rng);
    for (auto& x : c) x = u(rng);
    return {AnalyticCurve(g, k, form), UtilitySpec(a, 0, Transform::identity, true), CostModel(c, 100)};
}

}  // namespace

TEST_CASE("solve_grid: Table 1 optima") {
    const auto eq = solve_grid(table1_curve(), kEqual, kCost, 1.0);
    CHECK(eq.alloc == Allocation({500, 0, 0, 500}));
    CHECK(std::abs(eq.utility - 21.4) <= 0.05);
    CHECK(eq.method == SolveMethod::grid);
    const auto pri = solve_grid(table1_curve(), kPriority, kCost, 1.0);
    CHECK(pri.alloc == Allocation({143, 0, 0, 857}));
    CHECK(std::abs(pri.utility - 22.1) <= 0.05);
}

TEST_CASE("solve_grid: single group spends everything") {
    const AnalyticCurve curve({2.0}, 1, CurveForm::log1p);
    const auto r = solve_grid(curve, UtilitySpec({1}), CostModel({4}, 100), 1.0);
    CHECK(r.alloc[0] == doctest::Approx(25.0));
}

TEST_CASE("solve_grid: capacity and argument guards") {
    const AnalyticCurve five(std::vector<double>(25, 1.0), 5, CurveForm::sqrt);
    CHECK_THROWS_AS(solve_grid(five, UtilitySpec::equal(5), CostModel(std::vector<double>(5, 1), 10), 1),
                    CapacityError);
    CHECK_THROWS_AS(solve_grid(table1_curve(), kEqual, kCost, 1e-4), CapacityError);
    CHECK_THROWS_AS(solve_grid(table1_curve(), kEqual, kCost, 0.0), PreconditionError);
    CHECK_THROWS_AS(solve_grid(table1_curve(), UtilitySpec::equal(3), kCost, 1.0), DimensionError);
}

TEST_CASE("solve_grid: result independent of worker count and never beaten by a coarse re-scan") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const auto inst = random_instance(rng, 3, trial % 2 ? CurveForm::sqrt : CurveForm::log1p);
        const auto one = solve_grid(inst.curve, inst.utility, inst.cost, 0.5, 1);
        const auto many = solve_grid(inst.curve, inst.utility, inst.cost, 0.5, 3);
        CHECK(one.alloc == many.alloc);
        CHECK(one.utility == many.utility);
        for (double coarse : {1.0, 2.5, 5.0}) {
            CHECK(solve_grid(inst.curve, inst.utility, inst.cost, coarse).utility <= one.utility + 1e-12);
        }
        CHECK(one.utility == doctest::Approx(utility_eval(inst.utility, eval_perf(inst.curve, one.alloc))).epsilon(1e-12));
        CHECK(check_feasible(one.alloc, inst.cost));
    }
}

TEST_CASE("solve_grid: parity-penalized utilities scan below the budget face") {
    // With a large penalty the best grid point may leave budget unspent.
    const AnalyticCurve curve({1, 0, 0, 0.2}, 2, CurveForm::sqrt);
    const UtilitySpec spec({1, 1}, 5.0);
    const auto r = solve_grid(curve, spec, CostModel({1, 1}, 20), 1.0);
    CHECK(check_feasible(r.alloc, CostModel({1, 1}, 20)));
    const auto m = eval_perf(curve, r.alloc);
    CHECK(std::abs(m[0] - m[1]) < 1.0);
}

TEST_CASE("solve_concave: Table 1 and small exact cases") {
    const auto eq = solve_concave(table1_curve(), kEqual, kCost, 1e-8);
    CHECK(std::abs(eq.utility - 21.4078) <= 1e-3);
    CHECK(eq.method == SolveMethod::concave_ascent);
    CHECK(eq.converged);

    const AnalyticCurve sep({1, 0, 0, 1}, 2, CurveForm::sqrt);
    const auto r = solve_concave(sep, UtilitySpec({1, 1}), CostModel({1, 1}, 2), 1e-10);
    CHECK(r.alloc[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.alloc[1] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(r.utility == doctest::Approx(2.0).epsilon(1e-8));

    const auto zero = solve_concave(sep, UtilitySpec({1, 1}), CostModel({1, 1}, 0), 1e-10);
    CHECK(zero.alloc == Allocation::zeros(2));
    CHECK(zero.utility == 0.0);
}

TEST_CASE("solve_concave: rejects parity penalties") {
    CHECK_THROWS_AS(solve_concave(table1_curve(), UtilitySpec({1, 1, 1, 1}, 0.5), kCost), UnsupportedSpecError);
}

TEST_CASE("property: concave ascent agrees with the grid on random K<=3 instances") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t k = 2 + trial % 2;
        const auto inst = random_instance(rng, k, trial % 4 < 2 ? CurveForm::sqrt : CurveForm::log1p);
        const auto grid = solve_grid(inst.curve, inst.utility, inst.cost, 0.1);
        const auto asc = solve_concave(inst.curve, inst.utility, inst.cost, 1e-10);
        CHECK(asc.converged);
        CHECK(check_feasible(asc.alloc, inst.cost));
        // The grid is a restriction of the continuous problem.
        CHECK(asc.utility >= grid.utility - 1e-9);
        CHECK(asc.utility - grid.utility < 1e-3);
    }
}

TEST_CASE("audit: Table 1 gaps") {
    const auto at_opt = audit(table1_curve(), kEqual, kCost, Allocation({500, 0, 0, 500}));
    CHECK(at_opt.gap <= 0.05);
    CHECK(at_opt.gap >= 0.0);
    const double eq_gap = audit_gap(table1_curve(), kEqual, kCost, Allocation({200, 200, 200, 200}));
    CHECK(std::abs(eq_gap - 2.6) <= 0.1);
    CHECK(eq_gap == doctest::Approx(21.40780282 - 18.80349165).epsilon(1e-6));
    // Priority auditor looking at the equal-utility optimum.
    const auto pri = audit(table1_curve(), kPriority, kCost, Allocation({500, 0, 0, 500}));
    CHECK(pri.gap == doctest::Approx(22.14244798 - 21.86194668).epsilon(1e-6));
    CHECK(pri.optimum.utility >= 22.14244798 - 1e-8);
}

TEST_CASE("audit: zero for a solver's own output and for single-group auditors") {
    const auto opt = solve_grid(table1_curve(), kPriority, kCost, 1.0);
    CHECK(audit_gap(table1_curve(), kPriority, kCost, opt.alloc) < 1e-6);
    const AnalyticCurve sep({1, 0, 0, 1}, 2, CurveForm::sqrt);
    const UtilitySpec only_first({1, 0});
    const CostModel cost({1, 1}, 50);
    CHECK(audit_gap(sep, only_first, cost, Allocation({50, 0})) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("audit: infeasible observations are rejected") {
    CHECK_THROWS_AS(audit(table1_curve(), kEqual, kCost, Allocation({600, 0, 0, 500})), PreconditionError);
}

TEST_CASE("audit: K > 4 uses concave ascent") {
    std::mt19937_64 rng(4);
    const auto inst = random_instance(rng, 6, CurveForm::sqrt);
    const auto r = audit(inst.curve, inst.utility, inst.cost, Allocation(std::vector<double>(6, 1.0)));
    CHECK(r.optimum.method == SolveMethod::concave_ascent);
    CHECK(r.gap > 0.0);
}
