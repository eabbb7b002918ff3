#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "equalloc/alloc_core.hpp"
#include "equalloc/curves.hpp"
#include "equalloc/environment.hpp"
#include "equalloc/errors.hpp"
#include "equalloc/estimator.hpp"
#include "equalloc/optimizer.hpp"

namespace equalloc {

// Ground-truth (or model-builder's believed) map from allocation to performance.
using PerformanceFn = std::function<PerformanceVector(const Allocation&)>;

PerformanceFn as_performance_fn(const AnalyticCurve& curve);

enum class MarginalSource { true_curve, estimator };
enum class TieBreak { lowest_index, random };

struct GreedyConfig {
    double step_cost = 1.0;            // spend per step
    std::optional<Allocation> start;   // zero allocation when empty
    MarginalSource marginal_source = MarginalSource::true_curve;
    TieBreak tie_break = TieBreak::lowest_index;
    std::uint64_t tie_seed = 0;
};

struct GreedyStep {
    std::size_t step = 0;
    std::size_t group = 0;
    double spend = 0.0;  // cumulative spend after the step
    std::vector<double> counts;
    std::vector<double> marginal_est;   // NaN when not estimated (forced exploration)
    std::vector<double> marginal_true;  // NaN when the truth is unknown
    double utility = 0.0;
    bool forced = false;
};

struct GreedyTrace {
    std::vector<GreedyStep> steps;
    double start_spend = 0.0;
    double residual_budget = 0.0;  // left unspent because it is below one step
};

struct GreedyResult {
    Allocation alloc;
    GreedyTrace trace;
    double utility = 0.0;  // true utility when known, measured otherwise
};

// Raised when an estimator failure interrupts a run; carries the step index.
class GreedyStepError : public Error {
public:
    GreedyStepError(std::size_t step, const std::string& what)
        : Error("greedy step " + std::to_string(step) + ": " + what), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

// Greedy allocation with exact marginals: each step buys step_cost worth of
// samples from the group maximizing U(n + (s / c_i) e_i). Stops when the
// remaining budget is below one step.
GreedyResult run_greedy(const PerformanceFn& truth, const UtilitySpec& utility, const CostModel& cost,
                        const GreedyConfig& config);
GreedyResult run_greedy(const AnalyticCurve& curve, const UtilitySpec& utility, const CostModel& cost,
                        const GreedyConfig& config);

// Greedy allocation driven by an environment. With MarginalSource::estimator
// the marginal gain of each group is the locally regressed slope of its
// measured performance, perturbed by a truncated-normal draw and scaled by
// a_k * s / c_k. With MarginalSource::true_curve the environment's expected
// performance is used instead.
GreedyResult run_greedy(Environment& env, const UtilitySpec& utility, const CostModel& cost,
                        const GreedyConfig& config, const EstimatorConfig& estimator,
                        std::uint64_t seed);

// Best allocation among start + (j_k s / c_k) with sum_k j_k <= d, d = remaining
// budget / s. Guarded to d <= 24 and K <= 5.
SolveResult batch_enum_optimum(const PerformanceFn& truth, const UtilitySpec& utility,
                               const CostModel& cost, double step_cost,
                               const std::optional<Allocation>& start = std::nullopt);
SolveResult batch_enum_optimum(const AnalyticCurve& curve, const UtilitySpec& utility,
                               const CostModel& cost, double step_cost,
                               const std::optional<Allocation>& start = std::nullopt);

enum class BaselineKind { equal, representative, parity };

// Static policies. When step_cost > 0 the per-group spend is rounded to the
// nearest multiple of step_cost without exceeding the budget.
Allocation equal_policy(const CostModel& cost, double step_cost = 0.0);
Allocation representative_policy(const CostModel& cost, std::span<const double> shares,
                                 double step_cost = 0.0);

// Repeatedly buys one step from the currently worst-performing group.
GreedyResult parity_policy(const PerformanceFn& perf, const CostModel& cost, double step_cost,
                           const std::optional<Allocation>& start = std::nullopt);
GreedyResult parity_policy(Environment& env, const CostModel& cost, double step_cost,
                           const std::optional<Allocation>& start = std::nullopt);

struct BaselineRequest {
    BaselineKind kind = BaselineKind::equal;
    double step_cost = 0.0;
    std::vector<double> shares;              // representative only
    const PerformanceFn* perf = nullptr;     // parity only
    std::optional<Allocation> start;         // parity only
};

Allocation baseline_policy(const BaselineRequest& request, const CostModel& cost);

}  // namespace equalloc
