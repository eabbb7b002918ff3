#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "equalloc/alloc_core.hpp"

namespace equalloc {

enum class CurveForm { sqrt, log1p, power };

// M_k(n) = f(offset + sum_j gamma[k][j] * n_j) with a concave nondecreasing f.
class AnalyticCurve {
public:
    AnalyticCurve() = default;
    // `gamma` is row-major K x K.
    AnalyticCurve(std::vector<double> gamma, std::size_t groups, CurveForm form,
                  double power_exponent = 0.5, double offset = 0.0);

    std::size_t size() const noexcept { return groups_; }
    CurveForm form() const noexcept { return form_; }
    double power_exponent() const noexcept { return power_; }
    double offset() const noexcept { return offset_; }
    double gamma(std::size_t row, std::size_t col) const { return gamma_[row * groups_ + col]; }
    std::span<const double> gamma_row_major() const noexcept { return gamma_; }

    // f and f' on the effective sample count.
    double transform(double x) const noexcept;
    double derivative(double x) const noexcept;

    // Writes M(n) into `out` without validation; both spans have length K.
    void eval_into(std::span<const double> counts, std::span<double> out) const noexcept;

private:
    std::vector<double> gamma_;
    std::size_t groups_ = 0;
    CurveForm form_ = CurveForm::sqrt;
    double power_ = 0.5;
    double offset_ = 0.0;
};

PerformanceVector eval_perf(const AnalyticCurve& curve, const Allocation& alloc);

// U(alloc + (s / c_i) e_i) - U(alloc).
double marginal_batch(const AnalyticCurve& curve, const UtilitySpec& utility,
                      const Allocation& alloc, std::size_t group, double step_cost,
                      const CostModel& cost);

// gamma is diagonal with a positive diagonal: no cross-group learning.
bool is_separable(const AnalyticCurve& curve);

// m_{i,j}: marginal utility of the j-th batch of spend s bought from group i,
// all other groups held at zero.
struct BatchLedger {
    double step_cost = 0.0;
    std::vector<std::vector<double>> marginals;  // [group][batch]
};

BatchLedger batch_ledger(const AnalyticCurve& curve, const UtilitySpec& utility,
                         const CostModel& cost, double step_cost, std::size_t batches_per_group);

}  // namespace equalloc
