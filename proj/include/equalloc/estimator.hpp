#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "equalloc/alloc_core.hpp"
#include "equalloc/errors.hpp"

namespace equalloc {

struct PerformancePoint {
    double n = 0.0;     // samples from the group when the model was measured
    double perf = 0.0;  // measured group performance
};

// Per-group measurement history; n strictly increases within a group.
class PerformanceHistory {
public:
    explicit PerformanceHistory(std::size_t groups = 0) : records_(groups) {}

    std::size_t groups() const noexcept { return records_.size(); }
    void record(std::size_t group, double n, double perf);
    std::span<const PerformancePoint> points(std::size_t group) const { return records_.at(group); }

private:
    std::vector<std::vector<PerformancePoint>> records_;
};

// Fewer than two points in the regression window.
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// All points in the window share the same n.
class DegenerateDesignError : public Error {
public:
    using Error::Error;
};

struct SlopeFit {
    double slope = 0.0;
    double se = 0.0;
};

struct EstimatorConfig {
    std::size_t window = 5;
    double se_floor = 1e-6;
    std::size_t min_points = 2;
};

struct MarginalEstimate {
    double slope_hat = 0.0;  // performance per sample
    double slope_se = 0.0;
    double draw = 0.0;       // truncated-normal draw, >= 0
    double priority = 0.0;   // draw * step_cost / cost_k
};

// OLS slope of perf on n over the last min(window, size) points. The standard
// error is raised to at least `se_floor` (two-point fits have zero residual df).
SlopeFit fit_local_slope(std::span<const PerformancePoint> points, std::size_t window,
                         double se_floor = 0.0);

// Normal(mean, sd^2) conditioned on [0, inf). sd = 0 yields max(mean, 0).
double draw_truncated_normal(double mean, double sd, std::mt19937_64& rng);
double draw_truncated_normal(double mean, double sd, std::uint64_t seed);

// nullopt when the group has fewer than config.min_points records: the caller
// must sample that group next (forced exploration).
std::optional<MarginalEstimate> estimate_marginal(const PerformanceHistory& history, std::size_t group,
                                                  double step_cost, const CostModel& cost,
                                                  const EstimatorConfig& config, std::mt19937_64& rng);

}  // namespace equalloc
