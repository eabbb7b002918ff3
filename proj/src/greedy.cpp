#include "equalloc/greedy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace equalloc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RunSetup {
    Allocation start;
    double start_spend = 0.0;
};

RunSetup prepare(const UtilitySpec& utility, const CostModel& cost, double step_cost,
                 const std::optional<Allocation>& start) {
    validate(cost);
    if (utility.size() != cost.size()) {
        throw DimensionError("utility weights do not match cost model", cost.size(), utility.size());
    }
    if (!(step_cost > 0.0) || !std::isfinite(step_cost)) {
        throw PreconditionError("step_cost must be positive");
    }
    if (step_cost > cost.budget + cost.tolerance()) {
        throw PreconditionError("step_cost exceeds the budget");
    }
    RunSetup setup{start.value_or(Allocation::zeros(cost.size())), 0.0};
    if (setup.start.size() != cost.size()) {
        throw DimensionError("start allocation does not match cost model", cost.size(), setup.start.size());
    }
    if (!check_feasible(setup.start, cost)) {
        throw PreconditionError("start allocation exceeds the budget");
    }
    setup.start_spend = cost.spend(setup.start);
    return setup;
}

bool can_afford(const CostModel& cost, double spent, double step_cost) {
    return cost.budget - spent >= step_cost - cost.tolerance();
}

// Index of the maximum; exact ties go to the lowest index or a seeded uniform pick.
std::size_t pick_max(std::span<const double> values, TieBreak tie_break, std::mt19937_64& rng) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best] || (std::isnan(values[best]) && !std::isnan(values[i]))) best = i;
    }
    if (tie_break == TieBreak::lowest_index) return best;
    std::vector<std::size_t> tied;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (values[i] == values[best]) tied.push_back(i);
    }
    if (tied.size() <= 1) return best;
    std::uniform_int_distribution<std::size_t> pick(0, tied.size() - 1);
    return tied[pick(rng)];
}

double checked_utility(const UtilitySpec& utility, const PerformanceVector& perf) {
    if (perf.size() != utility.size()) {
        throw DimensionError("performance vector does not match utility", utility.size(), perf.size());
    }
    return utility_eval_unchecked(utility, perf);
}

}  // namespace

PerformanceFn as_performance_fn(const AnalyticCurve& curve) {
    return [curve](const Allocation& alloc) { return eval_perf(curve, alloc); };
}

GreedyResult run_greedy(const PerformanceFn& truth, const UtilitySpec& utility, const CostModel& cost,
                        const GreedyConfig& config) {
    const RunSetup setup = prepare(utility, cost, config.step_cost, config.start);
    const std::size_t groups = cost.size();
    std::mt19937_64 tie_rng(config.tie_seed);

    GreedyResult result;
    Allocation alloc = setup.start;
    double spent = setup.start_spend;
    double current = checked_utility(utility, truth(alloc));
    result.trace.start_spend = spent;

    std::vector<double> candidate(groups);
    std::vector<double> marginal(groups);
    while (can_afford(cost, spent, config.step_cost)) {
        for (std::size_t i = 0; i < groups; ++i) {
            candidate[i] = checked_utility(utility, truth(alloc.plus(i, config.step_cost / cost.costs[i])));
            marginal[i] = candidate[i] - current;
        }
        const std::size_t chosen = pick_max(candidate, config.tie_break, tie_rng);
        alloc = alloc.plus(chosen, config.step_cost / cost.costs[chosen]);
        spent += config.step_cost;
        current = candidate[chosen];

        GreedyStep step;
        step.step = result.trace.steps.size();
        step.group = chosen;
        step.spend = spent;
        step.counts.assign(alloc.counts().begin(), alloc.counts().end());
        step.marginal_est = marginal;
        step.marginal_true = marginal;
        step.utility = current;
        result.trace.steps.push_back(std::move(step));
    }
    result.trace.residual_budget = cost.budget - spent;
    result.utility = current;
    result.alloc = std::move(alloc);
    return result;
}

GreedyResult run_greedy(const AnalyticCurve& curve, const UtilitySpec& utility, const CostModel& cost,
                        const GreedyConfig& config) {
    if (curve.size() != cost.size()) {
        throw DimensionError("cost model does not match curve", curve.size(), cost.size());
    }
    return run_greedy(as_performance_fn(curve), utility, cost, config);
}

GreedyResult run_greedy(Environment& env, const UtilitySpec& utility, const CostModel& cost,
                        const GreedyConfig& config, const EstimatorConfig& estimator,
                        std::uint64_t seed) {
    const RunSetup setup = prepare(utility, cost, config.step_cost, config.start);
    const std::size_t groups = cost.size();
    if (env.groups() != groups) {
        throw DimensionError("environment does not match cost model", groups, env.groups());
    }
    if (config.marginal_source == MarginalSource::true_curve) {
        if (!env.expected(setup.start)) {
            throw PreconditionError("true-curve marginals need an environment with known expectations");
        }
        PerformanceFn truth = [&env](const Allocation& a) { return *env.expected(a); };
        return run_greedy(truth, utility, cost, config);
    }

    std::mt19937_64 rng(seed);
    std::mt19937_64 tie_rng(config.tie_seed);
    const double weight_scale = utility.normalize ? 1.0 / utility.weight_sum() : 1.0;
    const std::size_t min_points = std::max<std::size_t>(estimator.min_points, 2);

    GreedyResult result;
    Allocation alloc = setup.start;
    double spent = setup.start_spend;
    result.trace.start_spend = spent;

    PerformanceHistory history(groups);
    PerformanceVector measured = env.observe(alloc);
    for (std::size_t k = 0; k < groups; ++k) history.record(k, alloc[k], measured[k]);

    auto true_utility = [&](const Allocation& a) -> std::optional<double> {
        if (auto perf = env.expected(a)) return checked_utility(utility, *perf);
        return std::nullopt;
    };

    std::vector<double> priority(groups);
    std::vector<double> marginal_true(groups);
    while (can_afford(cost, spent, config.step_cost)) {
        const std::size_t index = result.trace.steps.size();
        GreedyStep step;
        step.step = index;
        step.marginal_est.assign(groups, kNaN);

        const auto now_true = true_utility(alloc);
        for (std::size_t i = 0; i < groups; ++i) {
            const auto next_true = now_true ? true_utility(alloc.plus(i, config.step_cost / cost.costs[i]))
                                            : std::nullopt;
            marginal_true[i] = next_true ? *next_true - *now_true : kNaN;
        }

        // Bootstrap: every group needs min_points measurements before its slope
        // can be estimated; under-sampled groups are bought round-robin.
        std::optional<std::size_t> forced;
        std::size_t fewest = std::numeric_limits<std::size_t>::max();
        for (std::size_t k = 0; k < groups; ++k) {
            const std::size_t have = history.points(k).size();
            if (have < min_points && have < fewest) {
                fewest = have;
                forced = k;
            }
        }

        std::size_t chosen = 0;
        if (forced) {
            chosen = *forced;
            step.forced = true;
        } else {
            for (std::size_t k = 0; k < groups; ++k) {
                try {
                    const auto est = estimate_marginal(history, k, config.step_cost, cost, estimator, rng);
                    priority[k] = utility.weights[k] * weight_scale * est->priority;
                } catch (const Error& e) {
                    throw GreedyStepError(index, e.what());
                }
                step.marginal_est[k] = priority[k];
            }
            chosen = pick_max(priority, config.tie_break, tie_rng);
        }

        alloc = alloc.plus(chosen, config.step_cost / cost.costs[chosen]);
        spent += config.step_cost;
        measured = env.observe(alloc);
        if (measured.size() != groups) {
            throw DimensionError("environment returned wrong number of groups", groups, measured.size());
        }
        history.record(chosen, alloc[chosen], measured[chosen]);

        step.group = chosen;
        step.spend = spent;
        step.counts.assign(alloc.counts().begin(), alloc.counts().end());
        step.marginal_true = marginal_true;
        step.utility = true_utility(alloc).value_or(checked_utility(utility, measured));
        result.trace.steps.push_back(std::move(step));
    }
    result.trace.residual_budget = cost.budget - spent;
    result.utility = true_utility(alloc).value_or(checked_utility(utility, measured));
    result.alloc = std::move(alloc);
    return result;
}

SolveResult batch_enum_optimum(const PerformanceFn& truth, const UtilitySpec& utility,
                               const CostModel& cost, double step_cost,
                               const std::optional<Allocation>& start) {
    const RunSetup setup = prepare(utility, cost, step_cost, start);
    const std::size_t groups = cost.size();
    const double batches_d = (cost.budget - setup.start_spend) / step_cost;
    const double rounded = std::round(batches_d);
    if (std::abs(batches_d - rounded) > 1e-9 * std::max(1.0, batches_d) || rounded < 1.0) {
        throw PreconditionError("remaining budget must be a positive integer number of steps");
    }
    const auto batches = static_cast<long>(rounded);
    if (batches > 24 || groups > 5) {
        throw CapacityError("batch enumeration is limited to 24 batches and 5 groups");
    }

    std::vector<long> units(groups, 0);
    std::vector<long> best_units;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t evaluated = 0;

    auto evaluate = [&]() {
        std::vector<double> counts(setup.start.counts().begin(), setup.start.counts().end());
        for (std::size_t k = 0; k < groups; ++k) {
            counts[k] += static_cast<double>(units[k]) * step_cost / cost.costs[k];
        }
        const double u = checked_utility(utility, truth(Allocation(std::move(counts))));
        ++evaluated;
        if (best_units.empty() || u > best) {
            best = u;
            best_units = units;
        }
    };
    // Lexicographic enumeration of all (j_1..j_K) with sum <= d.
    auto recurse = [&](auto&& self, std::size_t level, long remaining) -> void {
        if (level == groups) {
            evaluate();
            return;
        }
        for (long j = 0; j <= remaining; ++j) {
            units[level] = j;
            self(self, level + 1, remaining - j);
        }
        units[level] = 0;
    };
    recurse(recurse, 0, batches);

    std::vector<double> counts(setup.start.counts().begin(), setup.start.counts().end());
    for (std::size_t k = 0; k < groups; ++k) {
        counts[k] += static_cast<double>(best_units[k]) * step_cost / cost.costs[k];
    }
    SolveResult result;
    result.alloc = Allocation(std::move(counts));
    result.utility = best;
    result.method = SolveMethod::batch_enum;
    result.iterations = evaluated;
    result.converged = true;
    return result;
}

SolveResult batch_enum_optimum(const AnalyticCurve& curve, const UtilitySpec& utility,
                               const CostModel& cost, double step_cost,
                               const std::optional<Allocation>& start) {
    if (curve.size() != cost.size()) {
        throw DimensionError("cost model does not match curve", curve.size(), cost.size());
    }
    return batch_enum_optimum(as_performance_fn(curve), utility, cost, step_cost, start);
}

namespace {

// Rounds per-group spend to multiples of step_cost, then trims the groups that
// were rounded up the most until the budget holds.
Allocation round_to_steps(const CostModel& cost, std::vector<double> counts, double step_cost) {
    if (step_cost <= 0.0) return Allocation(std::move(counts));
    const std::size_t groups = counts.size();
    std::vector<long> units(groups);
    std::vector<double> excess(groups);
    double total = 0.0;
    for (std::size_t k = 0; k < groups; ++k) {
        const double exact = counts[k] * cost.costs[k] / step_cost;
        units[k] = std::lround(exact);
        excess[k] = static_cast<double>(units[k]) - exact;
        total += static_cast<double>(units[k]) * step_cost;
    }
    while (total > cost.budget + cost.tolerance()) {
        std::size_t worst = groups;
        for (std::size_t k = 0; k < groups; ++k) {
            if (units[k] > 0 && (worst == groups || excess[k] > excess[worst])) worst = k;
        }
        if (worst == groups) break;
        --units[worst];
        excess[worst] -= 1.0;
        total -= step_cost;
    }
    for (std::size_t k = 0; k < groups; ++k) {
        counts[k] = static_cast<double>(units[k]) * step_cost / cost.costs[k];
    }
    return Allocation(std::move(counts));
}

}  // namespace

Allocation equal_policy(const CostModel& cost, double step_cost) {
    validate(cost);
    double cost_sum = 0.0;
    for (double c : cost.costs) cost_sum += c;
    return round_to_steps(cost, std::vector<double>(cost.size(), cost.budget / cost_sum), step_cost);
}

Allocation representative_policy(const CostModel& cost, std::span<const double> shares,
                                 double step_cost) {
    validate(cost);
    if (shares.size() != cost.size()) {
        throw DimensionError("population shares do not match cost model", cost.size(), shares.size());
    }
    double weighted = 0.0;
    for (std::size_t k = 0; k < shares.size(); ++k) {
        if (!(shares[k] >= 0.0) || !std::isfinite(shares[k])) {
            throw PreconditionError("population shares must be finite and non-negative");
        }
        weighted += shares[k] * cost.costs[k];
    }
    if (!(weighted > 0.0)) throw PreconditionError("population shares are all zero");
    const double scale = cost.budget / weighted;
    std::vector<double> counts(shares.size());
    for (std::size_t k = 0; k < shares.size(); ++k) counts[k] = shares[k] * scale;
    return round_to_steps(cost, std::move(counts), step_cost);
}

namespace {

template <class Measure>
GreedyResult run_parity(Measure&& measure, const CostModel& cost, double step_cost,
                        const std::optional<Allocation>& start) {
    const UtilitySpec equal = UtilitySpec::equal(cost.size());
    const RunSetup setup = prepare(equal, cost, step_cost, start);
    GreedyResult result;
    Allocation alloc = setup.start;
    double spent = setup.start_spend;
    result.trace.start_spend = spent;
    PerformanceVector perf = measure(alloc);
    while (can_afford(cost, spent, step_cost)) {
        const auto worst = static_cast<std::size_t>(
            std::distance(perf.begin(), std::min_element(perf.begin(), perf.end())));
        alloc = alloc.plus(worst, step_cost / cost.costs[worst]);
        spent += step_cost;
        perf = measure(alloc);

        GreedyStep step;
        step.step = result.trace.steps.size();
        step.group = worst;
        step.spend = spent;
        step.counts.assign(alloc.counts().begin(), alloc.counts().end());
        step.marginal_est.assign(cost.size(), kNaN);
        step.marginal_true.assign(cost.size(), kNaN);
        step.utility = checked_utility(equal, perf);
        result.trace.steps.push_back(std::move(step));
    }
    result.trace.residual_budget = cost.budget - spent;
    result.utility = checked_utility(equal, perf);
    result.alloc = std::move(alloc);
    return result;
}

}  // namespace

GreedyResult parity_policy(const PerformanceFn& perf, const CostModel& cost, double step_cost,
                           const std::optional<Allocation>& start) {
    return run_parity([&](const Allocation& a) { return perf(a); }, cost, step_cost, start);
}

GreedyResult parity_policy(Environment& env, const CostModel& cost, double step_cost,
                           const std::optional<Allocation>& start) {
    return run_parity([&](const Allocation& a) { return env.observe(a); }, cost, step_cost, start);
}

Allocation baseline_policy(const BaselineRequest& request, const CostModel& cost) {
    switch (request.kind) {
        case BaselineKind::equal:
            return equal_policy(cost, request.step_cost);
        case BaselineKind::representative:
            return representative_policy(cost, request.shares, request.step_cost);
        case BaselineKind::parity:
            if (request.perf == nullptr) {
                throw PreconditionError("parity policy needs a performance source");
            }
            return parity_policy(*request.perf, cost, request.step_cost, request.start).alloc;
    }
    throw PreconditionError("unknown baseline kind");
}

}  // namespace equalloc
