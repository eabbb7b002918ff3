#include "equalloc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace equalloc {

void PerformanceHistory::record(std::size_t group, double n, double perf) {
    auto& seq = records_.at(group);
    if (!seq.empty() && !(n > seq.back().n)) {
        throw PreconditionError("history for group " + std::to_string(group) +
                                " must have strictly increasing sample counts");
    }
    seq.push_back({n, perf});
}

SlopeFit fit_local_slope(std::span<const PerformancePoint> points, std::size_t window,
                         double se_floor) {
    if (window < 2) throw PreconditionError("regression window must be at least 2");
    const std::size_t used = std::min(window, points.size());
    if (used < 2) {
        throw InsufficientDataError("need at least 2 measurements, have " + std::to_string(used));
    }
    const auto recent = points.subspan(points.size() - used);
    double mean_n = 0.0;
    double mean_p = 0.0;
    for (const auto& pt : recent) {
        mean_n += pt.n;
        mean_p += pt.perf;
    }
    mean_n /= static_cast<double>(used);
    mean_p /= static_cast<double>(used);
    double sxx = 0.0;
    double sxy = 0.0;
    for (const auto& pt : recent) {
        sxx += (pt.n - mean_n) * (pt.n - mean_n);
        sxy += (pt.n - mean_n) * (pt.perf - mean_p);
    }
    if (!(sxx > 0.0)) throw DegenerateDesignError("sample counts in the window have zero variance");

    SlopeFit fit;
    fit.slope = sxy / sxx;
    double se = 0.0;
    if (used > 2) {
        const double intercept = mean_p - fit.slope * mean_n;
        double ssr = 0.0;
        for (const auto& pt : recent) {
            const double r = pt.perf - (intercept + fit.slope * pt.n);
            ssr += r * r;
        }
        se = std::sqrt(ssr / static_cast<double>(used - 2) / sxx);
    }
    fit.se = std::max(se, se_floor);
    return fit;
}

double draw_truncated_normal(double mean, double sd, std::mt19937_64& rng) {
    if (!(sd >= 0.0)) throw PreconditionError("standard deviation must be non-negative");
    if (sd == 0.0) return std::max(mean, 0.0);

    // Standardized lower bound of the support.
    const double alpha = -mean / sd;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double z = 0.0;
    if (alpha < 0.45) {
        std::normal_distribution<double> normal(0.0, 1.0);
        do {
            z = normal(rng);
        } while (z < alpha);
    } else {
        // Exponential proposal for the far tail (Robert, 1995).
        const double lambda = 0.5 * (alpha + std::sqrt(alpha * alpha + 4.0));
        while (true) {
            z = alpha - std::log1p(-unit(rng)) / lambda;
            const double d = z - lambda;
            if (unit(rng) <= std::exp(-0.5 * d * d)) break;
        }
    }
    return std::max(mean + sd * z, 0.0);
}

double draw_truncated_normal(double mean, double sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return draw_truncated_normal(mean, sd, rng);
}

std::optional<MarginalEstimate> estimate_marginal(const PerformanceHistory& history, std::size_t group,
                                                  double step_cost, const CostModel& cost,
                                                  const EstimatorConfig& config, std::mt19937_64& rng) {
    if (group >= cost.size()) {
        throw PreconditionError("group index " + std::to_string(group) + " out of range");
    }
    if (!(step_cost > 0.0)) throw PreconditionError("step_cost must be positive");
    const auto points = history.points(group);
    if (points.size() < std::max<std::size_t>(config.min_points, 2)) return std::nullopt;

    const SlopeFit fit = fit_local_slope(points, config.window, config.se_floor);
    MarginalEstimate est;
    est.slope_hat = fit.slope;
    est.slope_se = fit.se;
    est.draw = draw_truncated_normal(fit.slope, fit.se, rng);
    est.priority = est.draw * step_cost / cost.costs[group];
    return est;
}

}  // namespace equalloc
