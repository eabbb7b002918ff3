#include "equalloc/alloc_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "equalloc/errors.hpp"

namespace equalloc {

Allocation::Allocation(std::vector<double> counts) : counts_(std::move(counts)) {
    validate(*this);
}

Allocation Allocation::zeros(std::size_t groups) {
    return Allocation(std::vector<double>(groups, 0.0));
}

Allocation Allocation::plus(std::size_t k, double amount) const {
    if (k >= counts_.size()) {
        throw PreconditionError("group index " + std::to_string(k) + " out of range");
    }
    Allocation next = *this;
    next.counts_[k] += amount;
    return next;
}

CostModel::CostModel(std::vector<double> c, double b) : costs(std::move(c)), budget(b) {
    validate(*this);
}

double CostModel::spend(const Allocation& alloc) const {
    if (alloc.size() != costs.size()) {
        throw DimensionError("allocation does not match cost model", costs.size(), alloc.size());
    }
    double total = 0.0;
    for (std::size_t k = 0; k < costs.size(); ++k) total += costs[k] * alloc[k];
    return total;
}

double CostModel::tolerance() const noexcept { return 1e-9 * std::max(1.0, budget); }

UtilitySpec::UtilitySpec(std::vector<double> w, double b, Transform t, bool norm)
    : weights(std::move(w)), parity_penalty(b), transform(t), normalize(norm) {
    validate(*this);
}

double UtilitySpec::weight_sum() const noexcept {
    return std::accumulate(weights.begin(), weights.end(), 0.0);
}

UtilitySpec UtilitySpec::equal(std::size_t groups, bool normalize) {
    return UtilitySpec(std::vector<double>(groups, 1.0), 0.0, Transform::identity, normalize);
}

void validate(const Allocation& alloc) {
    if (alloc.size() == 0) throw PreconditionError("allocation must have at least one group");
    for (std::size_t k = 0; k < alloc.size(); ++k) {
        if (!(alloc[k] >= 0.0) || !std::isfinite(alloc[k])) {
            throw PreconditionError("allocation entry " + std::to_string(k) +
                                    " must be a finite non-negative count");
        }
    }
}

void validate(const CostModel& cost) {
    if (cost.costs.empty()) throw PreconditionError("cost model must have at least one group");
    for (std::size_t k = 0; k < cost.costs.size(); ++k) {
        if (!(cost.costs[k] > 0.0) || !std::isfinite(cost.costs[k])) {
            throw PreconditionError("cost " + std::to_string(k) + " must be positive");
        }
    }
    if (!(cost.budget >= 0.0) || !std::isfinite(cost.budget)) {
        throw PreconditionError("budget must be a finite non-negative number");
    }
}

void validate(const UtilitySpec& spec) {
    if (spec.weights.empty()) throw PreconditionError("utility needs at least one weight");
    bool any_positive = false;
    for (double w : spec.weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw PreconditionError("utility weights must be finite and non-negative");
        }
        any_positive = any_positive || w > 0.0;
    }
    if (!any_positive) throw PreconditionError("at least one utility weight must be positive");
    if (!(spec.parity_penalty >= 0.0) || !std::isfinite(spec.parity_penalty)) {
        throw PreconditionError("parity_penalty must be finite and non-negative");
    }
}

bool check_feasible(const Allocation& alloc, const CostModel& cost) {
    return cost.spend(alloc) <= cost.budget + cost.tolerance();
}

namespace {

inline double apply(Transform t, double m) noexcept {
    if (t == Transform::identity) return m;
    return m > 0.0 ? std::log(m) : -std::numeric_limits<double>::infinity();
}

}  // namespace

double utility_eval_unchecked(const UtilitySpec& spec, std::span<const double> perf) noexcept {
    const std::size_t k_groups = perf.size();
    double weighted = 0.0;
    double mean = 0.0;
    for (std::size_t k = 0; k < k_groups; ++k) {
        const double t = apply(spec.transform, perf[k]);
        if (!std::isfinite(t)) return -std::numeric_limits<double>::infinity();
        weighted += spec.weights[k] * t;
        mean += t;
    }
    double value = weighted;
    if (spec.parity_penalty > 0.0) {
        mean /= static_cast<double>(k_groups);
        double spread = 0.0;
        for (std::size_t k = 0; k < k_groups; ++k) {
            spread += std::abs(apply(spec.transform, perf[k]) - mean);
        }
        value -= spec.parity_penalty * spread;
    }
    if (spec.normalize) value /= spec.weight_sum();
    return value;
}

double utility_eval(const UtilitySpec& spec, std::span<const double> perf) {
    if (perf.size() != spec.weights.size()) {
        throw DimensionError("performance vector does not match utility weights",
                             spec.weights.size(), perf.size());
    }
    if (spec.transform == Transform::log) {
        for (std::size_t k = 0; k < perf.size(); ++k) {
            if (!(perf[k] > 0.0)) {
                throw DomainError("log utility requires positive performance, group " +
                                  std::to_string(k) + " has " + std::to_string(perf[k]));
            }
        }
    }
    return utility_eval_unchecked(spec, perf);
}

std::vector<std::int64_t> realize_allocation(const Allocation& alloc, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::int64_t> out(alloc.size());
    for (std::size_t k = 0; k < alloc.size(); ++k) {
        const double whole = std::floor(alloc[k]);
        const double frac = alloc[k] - whole;
        // One draw per group keeps the stream aligned regardless of which entries are fractional.
        const double u = unit(rng);
        out[k] = static_cast<std::int64_t>(whole) + (u < frac ? 1 : 0);
    }
    return out;
}

}  // namespace equalloc
