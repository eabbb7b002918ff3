#include "equalloc/curves.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "equalloc/errors.hpp"

namespace equalloc {

AnalyticCurve::AnalyticCurve(std::vector<double> gamma, std::size_t groups, CurveForm form,
                             double power_exponent, double offset)
    : gamma_(std::move(gamma)), groups_(groups), form_(form), power_(power_exponent), offset_(offset) {
    if (groups_ == 0) throw PreconditionError("curve needs at least one group");
    if (gamma_.size() != groups_ * groups_) {
        throw DimensionError("gamma must be K x K", groups_ * groups_, gamma_.size());
    }
    for (std::size_t k = 0; k < groups_; ++k) {
        bool any_positive = false;
        for (std::size_t j = 0; j < groups_; ++j) {
            const double g = gamma_[k * groups_ + j];
            if (!(g >= 0.0) || !std::isfinite(g)) {
                throw PreconditionError("gamma entries must be finite and non-negative");
            }
            any_positive = any_positive || g > 0.0;
        }
        if (!any_positive) {
            throw PreconditionError("gamma row " + std::to_string(k) + " has no positive entry");
        }
    }
    if (form_ == CurveForm::power && !(power_ > 0.0 && power_ < 1.0)) {
        throw PreconditionError("power exponent must lie in (0, 1)");
    }
    if (!(offset_ >= 0.0) || !std::isfinite(offset_)) {
        throw PreconditionError("curve offset must be finite and non-negative");
    }
}

double AnalyticCurve::transform(double x) const noexcept {
    switch (form_) {
        case CurveForm::sqrt:
            return std::sqrt(x);
        case CurveForm::log1p:
            return std::log1p(x);
        case CurveForm::power:
            return std::pow(x, power_);
    }
    return 0.0;
}

double AnalyticCurve::derivative(double x) const noexcept {
    switch (form_) {
        case CurveForm::sqrt:
            return x > 0.0 ? 0.5 / std::sqrt(x) : std::numeric_limits<double>::infinity();
        case CurveForm::log1p:
            return 1.0 / (1.0 + x);
        case CurveForm::power:
            return x > 0.0 ? power_ * std::pow(x, power_ - 1.0)
                           : std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

void AnalyticCurve::eval_into(std::span<const double> counts, std::span<double> out) const noexcept {
    for (std::size_t k = 0; k < groups_; ++k) {
        const double* row = gamma_.data() + k * groups_;
        double x = offset_;
        for (std::size_t j = 0; j < groups_; ++j) x += row[j] * counts[j];
        out[k] = transform(x);
    }
}

PerformanceVector eval_perf(const AnalyticCurve& curve, const Allocation& alloc) {
    if (alloc.size() != curve.size()) {
        throw DimensionError("allocation does not match curve", curve.size(), alloc.size());
    }
    validate(alloc);
    PerformanceVector out(curve.size());
    curve.eval_into(alloc.counts(), out);
    return out;
}

double marginal_batch(const AnalyticCurve& curve, const UtilitySpec& utility,
                      const Allocation& alloc, std::size_t group, double step_cost,
                      const CostModel& cost) {
    if (!(step_cost > 0.0)) throw PreconditionError("step_cost must be positive");
    if (group >= curve.size()) {
        throw PreconditionError("group index " + std::to_string(group) + " out of range for K=" +
                                std::to_string(curve.size()));
    }
    if (cost.size() != curve.size()) {
        throw DimensionError("cost model does not match curve", curve.size(), cost.size());
    }
    const double before = utility_eval(utility, eval_perf(curve, alloc));
    const double after =
        utility_eval(utility, eval_perf(curve, alloc.plus(group, step_cost / cost.costs[group])));
    return after - before;
}

bool is_separable(const AnalyticCurve& curve) {
    const std::size_t k_groups = curve.size();
    for (std::size_t k = 0; k < k_groups; ++k) {
        for (std::size_t j = 0; j < k_groups; ++j) {
            const double g = curve.gamma(k, j);
            if (k == j ? !(g > 0.0) : g != 0.0) return false;
        }
    }
    return true;
}

BatchLedger batch_ledger(const AnalyticCurve& curve, const UtilitySpec& utility,
                         const CostModel& cost, double step_cost, std::size_t batches_per_group) {
    BatchLedger ledger;
    ledger.step_cost = step_cost;
    ledger.marginals.resize(curve.size());
    for (std::size_t i = 0; i < curve.size(); ++i) {
        Allocation alloc = Allocation::zeros(curve.size());
        for (std::size_t j = 0; j < batches_per_group; ++j) {
            ledger.marginals[i].push_back(marginal_batch(curve, utility, alloc, i, step_cost, cost));
            alloc = alloc.plus(i, step_cost / cost.costs[i]);
        }
    }
    return ledger;
}

}  // namespace equalloc
