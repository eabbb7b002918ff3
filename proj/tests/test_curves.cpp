#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "equalloc/curves.hpp"
#include "equalloc/errors.hpp"
#include "equalloc/io.hpp"

using namespace equalloc;

namespace {

AnalyticCurve table1_curve() {
    return AnalyticCurve({1, .3, .3, .3, .3, .5, .3, .3, .3, .3, 1, .3, .3, .3, .3, 1}, 4, CurveForm::sqrt);
}

AnalyticCurve random_curve(std::mt19937_64& rng, std::size_t k, CurveForm form) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    std::vector<double> g(k * k);
    for (double& x : g) x = u(rng);
    return AnalyticCurve(g, k, form, 0.3 + 0.4 * u(rng), u(rng));
}

}  // namespace

TEST_CASE("eval_perf: Table 1 rows") {
    const auto curve = table1_curve();
    const auto eq = eval_perf(curve, Allocation({200, 200, 200, 200}));
    const std::vector<double> eq_expected{19.49, 16.73, 19.49, 19.49};
    for (int k = 0; k < 4; ++k) CHECK(std::abs(eq[k] - eq_expected[k]) <= 0.01);
    const auto opt = eval_perf(curve, Allocation({500, 0, 0, 500}));
    const std::vector<double> opt_expected{25.50, 17.32, 17.32, 25.50};
    for (int k = 0; k < 4; ++k) CHECK(std::abs(opt[k] - opt_expected[k]) <= 0.01);
}

TEST_CASE("eval_perf: zero allocation and domain at zero") {
    const auto zero = eval_perf(table1_curve(), Allocation::zeros(4));
    for (double m : zero) CHECK(m == 0.0);
    const AnalyticCurve log_curve({1, 0, 0, 1}, 2, CurveForm::log1p);
    for (double m : eval_perf(log_curve, Allocation::zeros(2))) CHECK(m == 0.0);
    CHECK_THROWS_AS(eval_perf(table1_curve(), Allocation({1, 2})), DimensionError);
}

TEST_CASE("curve construction is validated") {
    CHECK_THROWS_AS(AnalyticCurve({1, 0, 0}, 2, CurveForm::sqrt), DimensionError);
    CHECK_THROWS_AS(AnalyticCurve({1, -0.1, 0, 1}, 2, CurveForm::sqrt), PreconditionError);
    CHECK_THROWS_AS(AnalyticCurve({1, 0, 0, 0}, 2, CurveForm::sqrt), PreconditionError);
    CHECK_THROWS_AS(AnalyticCurve({1}, 1, CurveForm::power, 1.5), PreconditionError);
    CHECK_THROWS_AS(AnalyticCurve({1}, 1, CurveForm::sqrt, 0.5, -1), PreconditionError);
}

TEST_CASE("marginal_batch: cost-aware gains") {
    const auto curve = table1_curve();
    const UtilitySpec eq = UtilitySpec::equal(4);
    const CostModel cost({1, 1, 2, 1}, 1000);
    const Allocation zero = Allocation::zeros(4);
    const double g3 = marginal_batch(curve, eq, zero, 2, 100, cost);
    const double g1 = marginal_batch(curve, eq, zero, 0, 100, cost);
    CHECK(g3 < g1);
    // Group 3 buys only s / c = 50 samples.
    const auto m = eval_perf(curve, Allocation({0, 0, 50, 0}));
    CHECK(g3 == doctest::Approx(utility_eval(eq, m)));
}

TEST_CASE("marginal_batch: separable sqrt arithmetic") {
    const AnalyticCurve curve({1, 0, 0, 1}, 2, CurveForm::sqrt);
    const UtilitySpec u({1, 1});
    const CostModel cost({1, 1}, 10);
    CHECK(marginal_batch(curve, u, Allocation({0, 0}), 0, 1, cost) == doctest::Approx(1.0));
    CHECK(marginal_batch(curve, u, Allocation({0, 0}), 1, 1, cost) == doctest::Approx(1.0));
    CHECK(marginal_batch(curve, u, Allocation({1, 0}), 0, 1, cost) == doctest::Approx(std::sqrt(2.0) - 1.0));
    CHECK_THROWS_AS(marginal_batch(curve, u, Allocation({0, 0}), 2, 1, cost), PreconditionError);
    CHECK_THROWS_AS(marginal_batch(curve, u, Allocation({0, 0}), 0, 0, cost), PreconditionError);
}

TEST_CASE("is_separable") {
    CHECK(is_separable(AnalyticCurve({1, 0, 0, 1}, 2, CurveForm::sqrt)));
    CHECK(is_separable(AnalyticCurve({0.5, 0, 0, 2.0}, 2, CurveForm::sqrt)));
    CHECK_FALSE(is_separable(table1_curve()));
}

TEST_CASE("property: monotone in every count") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (CurveForm form : {CurveForm::sqrt, CurveForm::log1p, CurveForm::power}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto curve = random_curve(rng, 3, form);
            const Allocation n({u(rng), u(rng), u(rng)});
            const Allocation bigger({n[0] + u(rng), n[1], n[2] + u(rng)});
            const auto m = eval_perf(curve, n);
            const auto mb = eval_perf(curve, bigger);
            for (int k = 0; k < 3; ++k) CHECK(mb[k] >= m[k]);
        }
    }
}

TEST_CASE("property: concave along non-negative rays") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::uniform_real_distribution<double> t01(0.0, 1.0);
    for (CurveForm form : {CurveForm::sqrt, CurveForm::log1p, CurveForm::power}) {
        for (int trial = 0; trial < 100; ++trial) {
            const auto curve = random_curve(rng, 3, form);
            const std::vector<double> n{u(rng), u(rng), u(rng)};
            const std::vector<double> d{u(rng), u(rng), u(rng)};
            const double t = t01(rng);
            std::vector<double> mid(3), end(3);
            for (int k = 0; k < 3; ++k) {
                mid[k] = n[k] + t * d[k];
                end[k] = n[k] + d[k];
            }
            const auto m0 = eval_perf(curve, Allocation(n));
            const auto mt = eval_perf(curve, Allocation(mid));
            const auto m1 = eval_perf(curve, Allocation(end));
            for (int k = 0; k < 3; ++k) CHECK(mt[k] >= (1 - t) * m0[k] + t * m1[k] - 1e-12);
        }
    }
}

TEST_CASE("property: batch ledger and marginals diminish on separable curves") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.1, 2.0);
    for (CurveForm form : {CurveForm::sqrt, CurveForm::log1p}) {
        for (int trial = 0; trial < 50; ++trial) {
            const AnalyticCurve curve({u(rng), 0, 0, 0, u(rng), 0, 0, 0, u(rng)}, 3, form);
            const UtilitySpec util({u(rng), u(rng), u(rng)});
            const CostModel cost({u(rng), u(rng), u(rng)}, 100);
            const double s = u(rng) * 5;
            const BatchLedger ledger = batch_ledger(curve, util, cost, s, 12);
            REQUIRE(ledger.marginals.size() == 3);
            for (const auto& row : ledger.marginals) {
                REQUIRE(row.size() == 12);
                for (std::size_t j = 1; j < row.size(); ++j) CHECK(row[j] <= row[j - 1] + 1e-12);
            }
            const Allocation a({u(rng), u(rng), u(rng)});
            const Allocation more = a.plus(1, u(rng) * 10);
            CHECK(marginal_batch(curve, util, more, 1, s, cost) <= marginal_batch(curve, util, a, 1, s, cost) + 1e-12);
        }
    }
}

TEST_CASE("curve documents: nested and flat gamma") {
    const auto curve = table1_curve();
    const Json doc = to_json(curve);
    CHECK(doc.at("gamma").size() == 4);
    CHECK(doc.at("form") == "sqrt");
    const auto back = curve_from_json(doc);
    for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) CHECK(back.gamma(r, c) == curve.gamma(r, c));
    }
    const Json flat{{"gamma", {1, 0, 0, 2}}, {"form", "power"}, {"power_exponent", 0.25}, {"offset", 1}};
    const auto f = curve_from_json(flat);
    CHECK(f.size() == 2);
    CHECK(f.form() == CurveForm::power);
    CHECK(f.power_exponent() == 0.25);
    CHECK(f.offset() == 1.0);
    CHECK_THROWS_AS(curve_from_json(Json{{"gamma", {1, 0, 0}}}), ConfigError);
    CHECK_THROWS_AS(curve_from_json(Json{{"gamma", {{1, 0}, {0}}}}), ConfigError);
    CHECK_THROWS_AS(curve_from_json(Json{{"gamma", {1}}, {"form", "cubic"}}), ConfigError);
}
