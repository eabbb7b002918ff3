#pragma once

#include <cstddef>
#include <string_view>

#include "equalloc/alloc_core.hpp"
#include "equalloc/curves.hpp"

namespace equalloc {

enum class SolveMethod { grid, concave_ascent, batch_enum };

std::string_view to_string(SolveMethod method) noexcept;

struct SolveResult {
    Allocation alloc;
    double utility = 0.0;
    SolveMethod method = SolveMethod::grid;
    std::size_t iterations = 0;
    bool converged = false;
};

inline constexpr std::size_t kMaxGridGroups = 4;
inline constexpr double kMaxGridPoints = 4.0e8;

// Exhaustive search over allocations whose per-group spend is a multiple of
// `resolution`. For monotone utilities only the full-spend face is scanned.
// Ties resolve to the lexicographically smallest counts. `workers` = 0 picks
// the hardware concurrency; the result does not depend on it.
SolveResult solve_grid(const AnalyticCurve& curve, const UtilitySpec& utility, const CostModel& cost,
                       double resolution, unsigned workers = 0);

// Pairwise conditional-gradient ascent over spend shares on the full-budget
// face {n >= 0, c.n = B}. Stops once the Frank-Wolfe duality gap, an upper
// bound on the remaining utility improvement, falls below `tol`.
SolveResult solve_concave(const AnalyticCurve& curve, const UtilitySpec& utility,
                          const CostModel& cost, double tol = 1e-8, std::size_t max_iter = 200000);

struct AuditOptions {
    double grid_resolution = 0.0;  // 0: budget / 1000
    double tol = 1e-10;
    std::size_t max_iter = 200000;
};

struct AuditResult {
    double gap = 0.0;
    double observed_utility = 0.0;
    SolveResult optimum;  // auditor-optimal allocation
};

// max_n U~(n) - U~(observed) over allocations feasible under `cost`.
AuditResult audit(const AnalyticCurve& curve, const UtilitySpec& auditor, const CostModel& cost,
                  const Allocation& observed, const AuditOptions& options = {});

double audit_gap(const AnalyticCurve& curve, const UtilitySpec& auditor, const CostModel& cost,
                 const Allocation& observed, const AuditOptions& options = {});

}  // namespace equalloc
