#include "equalloc/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "equalloc/errors.hpp"

namespace equalloc {

std::string_view to_string(SolveMethod method) noexcept {
    switch (method) {
        case SolveMethod::grid:
            return "grid";
        case SolveMethod::concave_ascent:
            return "concave_ascent";
        case SolveMethod::batch_enum:
            return "batch_enum";
    }
    return "unknown";
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_dimensions(const AnalyticCurve& curve, const UtilitySpec& utility, const CostModel& cost) {
    validate(utility);
    validate(cost);
    if (utility.size() != curve.size()) {
        throw DimensionError("utility weights do not match curve", curve.size(), utility.size());
    }
    if (cost.size() != curve.size()) {
        throw DimensionError("cost model does not match curve", curve.size(), cost.size());
    }
}

// Number of non-negative integer vectors of length `parts` summing to `total`
// (or to at most `total` when `face` is false), as a double to avoid overflow.
double count_points(std::size_t parts, double total, bool face) {
    // C(total + parts - 1, parts - 1) on the face, C(total + parts, parts) overall.
    const double n = face ? total + static_cast<double>(parts) - 1.0 : total + static_cast<double>(parts);
    const std::size_t r = face ? parts - 1 : parts;
    double c = 1.0;
    for (std::size_t i = 1; i <= r; ++i) c = c * (n - static_cast<double>(r - i)) / static_cast<double>(i);
    return c;
}

using Units = std::array<long, kMaxGridGroups>;

struct GridBest {
    double utility = kNegInf;
    Units units{};
    bool found = false;
    std::size_t evaluated = 0;
};

class GridScanner {
public:
    GridScanner(const AnalyticCurve& curve, const UtilitySpec& utility, const CostModel& cost,
                double resolution, bool face)
        : curve_(curve),
          utility_(utility),
          groups_(curve.size()),
          face_(face),
          linear_sqrt_(curve.form() == CurveForm::sqrt && utility.transform == Transform::identity &&
                       utility.parity_penalty == 0.0),
          weight_sum_(utility.weight_sum()) {
        spend_step_.resize(groups_ * groups_);
        for (std::size_t k = 0; k < groups_; ++k) {
            for (std::size_t g = 0; g < groups_; ++g) {
                spend_step_[k * groups_ + g] = curve.gamma(k, g) * resolution / cost.costs[g];
            }
        }
    }

    void scan_first(long first, long total, GridBest& best) const {
        Units units{};
        std::array<double, kMaxGridGroups> partial{};
        units[0] = first;
        for (std::size_t k = 0; k < groups_; ++k) {
            partial[k] = curve_.offset() + spend_step_[k * groups_] * static_cast<double>(first);
        }
        if (groups_ == 1) {
            evaluate(partial, units, best);
            return;
        }
        scan(1, total - first, partial, units, best);
    }

private:
    void scan(std::size_t level, long remaining, const std::array<double, kMaxGridGroups>& partial,
              Units& units, GridBest& best) const {
        const bool last = level + 1 == groups_;
        const long lo = (last && face_) ? remaining : 0;
        for (long j = lo; j <= remaining; ++j) {
            units[level] = j;
            std::array<double, kMaxGridGroups> next{};
            for (std::size_t k = 0; k < groups_; ++k) {
                next[k] = partial[k] + spend_step_[k * groups_ + level] * static_cast<double>(j);
            }
            if (last) {
                evaluate(next, units, best);
            } else {
                scan(level + 1, remaining - j, next, units, best);
            }
        }
    }

    void evaluate(const std::array<double, kMaxGridGroups>& effective, const Units& units,
                  GridBest& best) const {
        if (linear_sqrt_) {
            // Same arithmetic as utility_eval_unchecked, inlined for the common case.
            double u = 0.0;
            for (std::size_t k = 0; k < groups_; ++k) u += utility_.weights[k] * std::sqrt(effective[k]);
            if (utility_.normalize) u /= weight_sum_;
            ++best.evaluated;
            if (!best.found || u > best.utility) {
                best.utility = u;
                best.units = units;
                best.found = true;
            }
            return;
        }
        std::array<double, kMaxGridGroups> perf{};
        for (std::size_t k = 0; k < groups_; ++k) perf[k] = curve_.transform(effective[k]);
        const double u = utility_eval_unchecked(utility_, std::span<const double>(perf.data(), groups_));
        ++best.evaluated;
        if (!best.found || u > best.utility) {
            best.utility = u;
            best.units = units;
            best.found = true;
        }
    }

    const AnalyticCurve& curve_;
    const UtilitySpec& utility_;
    std::size_t groups_;
    bool face_;
    bool linear_sqrt_;
    double weight_sum_;
    std::vector<double> spend_step_;
};

}  // namespace

SolveResult solve_grid(const AnalyticCurve& curve, const UtilitySpec& utility, const CostModel& cost,
                       double resolution, unsigned workers) {
    check_dimensions(curve, utility, cost);
    const std::size_t groups = curve.size();
    if (groups > kMaxGridGroups) {
        throw CapacityError("grid search supports at most " + std::to_string(kMaxGridGroups) +
                            " groups (got " + std::to_string(groups) + "); use concave ascent");
    }
    if (!(resolution > 0.0) || !std::isfinite(resolution)) {
        throw PreconditionError("grid resolution must be positive");
    }
    const double units_d = std::floor(cost.budget / resolution + 1e-9);
    const bool face = utility.is_monotone_concave();
    if (count_points(groups, units_d, face) > kMaxGridPoints) {
        throw CapacityError("grid of " + std::to_string(count_points(groups, units_d, face)) +
                            " points exceeds the limit; coarsen the resolution or use concave ascent");
    }
    const long total = static_cast<long>(units_d);
    const GridScanner scanner(curve, utility, cost, resolution, face);

    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<long>(workers, total + 1));
    std::vector<GridBest> partial(workers);
    auto run_chunk = [&](unsigned w) {
        // Contiguous ranges of the first coordinate keep the merge order lexicographic.
        const long begin = (total + 1) * static_cast<long>(w) / static_cast<long>(workers);
        const long end = (total + 1) * static_cast<long>(w + 1) / static_cast<long>(workers);
        for (long first = begin; first < end; ++first) {
            if (groups == 1 && face && first != total) continue;
            scanner.scan_first(first, total, partial[w]);
        }
    };
    if (workers == 1) {
        run_chunk(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run_chunk, w);
        for (auto& t : pool) t.join();
    }

    GridBest best;
    for (const auto& p : partial) {
        best.evaluated += p.evaluated;
        if (p.found && (!best.found || p.utility > best.utility)) {
            best.utility = p.utility;
            best.units = p.units;
            best.found = true;
        }
    }
    if (!best.found || !std::isfinite(best.utility)) {
        throw NumericalError("grid search found no allocation with finite utility");
    }

    std::vector<double> counts(groups);
    for (std::size_t k = 0; k < groups; ++k) {
        counts[k] = static_cast<double>(best.units[k]) * resolution / cost.costs[k];
    }
    SolveResult result;
    result.alloc = Allocation(std::move(counts));
    result.utility = utility_eval(utility, eval_perf(curve, result.alloc));
    result.method = SolveMethod::grid;
    result.iterations = best.evaluated;
    result.converged = true;
    return result;
}

namespace {

// Objective and gradient over spend shares w on the simplex, n_k = w_k B / c_k.
class ShareObjective {
public:
    ShareObjective(const AnalyticCurve& curve, const UtilitySpec& utility, const CostModel& cost)
        : curve_(curve), utility_(utility), cost_(cost), groups_(curve.size()),
          counts_(groups_), effective_(groups_), perf_(groups_), coef_(groups_) {}

    void set_counts(std::span<const double> shares) {
        for (std::size_t k = 0; k < groups_; ++k) counts_[k] = shares[k] * cost_.budget / cost_.costs[k];
        for (std::size_t k = 0; k < groups_; ++k) {
            double x = curve_.offset();
            for (std::size_t j = 0; j < groups_; ++j) x += curve_.gamma(k, j) * counts_[j];
            effective_[k] = x;
            perf_[k] = curve_.transform(x);
        }
    }

    double value(std::span<const double> shares) {
        set_counts(shares);
        return utility_eval_unchecked(utility_, perf_);
    }

    // d U / d w_j for every j.
    void gradient(std::span<const double> shares, std::span<double> out) {
        set_counts(shares);
        const double scale = utility_.normalize ? 1.0 / utility_.weight_sum() : 1.0;
        for (std::size_t k = 0; k < groups_; ++k) {
            double dt = 1.0;
            if (utility_.transform == Transform::log) {
                dt = perf_[k] > 0.0 ? 1.0 / perf_[k] : std::numeric_limits<double>::infinity();
            }
            const double a = utility_.weights[k];
            coef_[k] = a == 0.0 ? 0.0 : a * scale * dt * curve_.derivative(effective_[k]);
        }
        for (std::size_t j = 0; j < groups_; ++j) {
            double g = 0.0;
            for (std::size_t k = 0; k < groups_; ++k) {
                const double gk = curve_.gamma(k, j);
                if (gk != 0.0 && coef_[k] != 0.0) g += coef_[k] * gk;
            }
            out[j] = g * cost_.budget / cost_.costs[j];
        }
    }

private:
    const AnalyticCurve& curve_;
    const UtilitySpec& utility_;
    const CostModel& cost_;
    std::size_t groups_;
    std::vector<double> counts_;
    std::vector<double> effective_;
    std::vector<double> perf_;
    std::vector<double> coef_;
};

}  // namespace

SolveResult solve_concave(const AnalyticCurve& curve, const UtilitySpec& utility,
                          const CostModel& cost, double tol, std::size_t max_iter) {
    check_dimensions(curve, utility, cost);
    if (!utility.is_monotone_concave()) {
        throw UnsupportedSpecError(
            "concave ascent requires parity_penalty = 0; the parity-penalized utility is not "
            "concave, use grid search");
    }
    if (!(tol > 0.0)) throw PreconditionError("tolerance must be positive");
    const std::size_t groups = curve.size();

    SolveResult result;
    result.method = SolveMethod::concave_ascent;
    if (cost.budget == 0.0) {
        result.alloc = Allocation::zeros(groups);
        result.utility = utility_eval(utility, eval_perf(curve, result.alloc));
        result.converged = true;
        return result;
    }

    ShareObjective objective(curve, utility, cost);
    std::vector<double> shares(groups, 1.0 / static_cast<double>(groups));
    std::vector<double> grad(groups);
    std::vector<double> probe(groups);
    double current = objective.value(shares);

    std::size_t iter = 0;
    bool converged = false;
    for (; iter < max_iter; ++iter) {
        objective.gradient(shares, grad);
        std::size_t toward = 0;
        for (std::size_t j = 1; j < groups; ++j) {
            if (grad[j] > grad[toward]) toward = j;
        }
        std::size_t away = groups;
        double inner = 0.0;
        for (std::size_t j = 0; j < groups; ++j) {
            if (shares[j] <= 0.0) continue;
            inner += shares[j] * grad[j];
            if (away == groups || grad[j] < grad[away]) away = j;
        }
        const double duality_gap = grad[toward] - inner;
        if (!(duality_gap > tol) || toward == away) {
            converged = !std::isnan(duality_gap);
            break;
        }

        // Move mass from the away vertex to the toward vertex; exact line search
        // by bisection on the directional derivative (concave in the step).
        const double t_max = shares[away];
        auto slope_at = [&](double t) {
            probe = shares;
            probe[toward] += t;
            probe[away] = t >= t_max ? 0.0 : std::max(0.0, probe[away] - t);
            objective.gradient(probe, grad);
            return grad[toward] - grad[away];
        };
        double step = t_max;
        if (!(slope_at(t_max) >= 0.0)) {
            double lo = 0.0;
            double hi = t_max;
            for (int b = 0; b < 100 && hi - lo > 1e-17; ++b) {
                const double mid = 0.5 * (lo + hi);
                if (slope_at(mid) > 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            step = lo;
        }
        if (step <= 0.0) {
            converged = duality_gap <= tol;
            break;
        }
        probe = shares;
        probe[toward] += step;
        probe[away] = step == t_max ? 0.0 : probe[away] - step;
        const double next = objective.value(probe);
        if (!(next >= current)) {
            // Line search made no progress at floating-point resolution.
            converged = duality_gap <= tol;
            break;
        }
        shares.swap(probe);
        current = next;
    }

    std::vector<double> counts(groups);
    for (std::size_t k = 0; k < groups; ++k) counts[k] = shares[k] * cost.budget / cost.costs[k];
    result.alloc = Allocation(std::move(counts));
    result.utility = utility_eval(utility, eval_perf(curve, result.alloc));
    result.iterations = iter;
    result.converged = converged;
    return result;
}

AuditResult audit(const AnalyticCurve& curve, const UtilitySpec& auditor, const CostModel& cost,
                  const Allocation& observed, const AuditOptions& options) {
    check_dimensions(curve, auditor, cost);
    if (observed.size() != curve.size()) {
        throw DimensionError("observed allocation does not match curve", curve.size(), observed.size());
    }
    if (!check_feasible(observed, cost)) {
        throw PreconditionError("observed allocation spends " + std::to_string(cost.spend(observed)) +
                                " which exceeds the budget " + std::to_string(cost.budget));
    }
    AuditResult out;
    out.observed_utility = utility_eval(auditor, eval_perf(curve, observed));

    bool have = false;
    if (curve.size() <= kMaxGridGroups) {
        const double resolution =
            options.grid_resolution > 0.0 ? options.grid_resolution : std::max(cost.budget, 1.0) / 1000.0;
        out.optimum = solve_grid(curve, auditor, cost, resolution);
        have = true;
    }
    if (auditor.is_monotone_concave()) {
        SolveResult ascent = solve_concave(curve, auditor, cost, options.tol, options.max_iter);
        if (!have || ascent.utility > out.optimum.utility) out.optimum = std::move(ascent);
        have = true;
    }
    if (!have) {
        throw UnsupportedSpecError("no solver available: more than " + std::to_string(kMaxGridGroups) +
                                   " groups with a non-concave auditor utility");
    }
    // The observed allocation is itself feasible, so the maximum is at least its utility.
    if (out.observed_utility > out.optimum.utility) {
        out.optimum.alloc = observed;
        out.optimum.utility = out.observed_utility;
    }
    out.gap = out.optimum.utility - out.observed_utility;
    return out;
}

double audit_gap(const AnalyticCurve& curve, const UtilitySpec& auditor, const CostModel& cost,
                 const Allocation& observed, const AuditOptions& options) {
    return audit(curve, auditor, cost, observed, options).gap;
}

}  // namespace equalloc
