#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace equalloc {

// Per-group sample counts. Fractional entries are allowed and are realized
// probabilistically (see realize_allocation).
class Allocation {
public:
    Allocation() = default;
    explicit Allocation(std::vector<double> counts);

    static Allocation zeros(std::size_t groups);

    std::size_t size() const noexcept { return counts_.size(); }
    double operator[](std::size_t k) const { return counts_[k]; }
    std::span<const double> counts() const noexcept { return counts_; }

    // Returns a copy with `amount` samples added to group k.
    Allocation plus(std::size_t k, double amount) const;

    bool operator==(const Allocation&) const = default;

private:
    std::vector<double> counts_;
};

struct CostModel {
    std::vector<double> costs;  // per-sample cost c_k, all > 0
    double budget = 0.0;        // B >= 0

    CostModel() = default;
    CostModel(std::vector<double> costs, double budget);

    std::size_t size() const noexcept { return costs.size(); }
    double spend(const Allocation& alloc) const;
    // Budget slack accepted by check_feasible.
    double tolerance() const noexcept;
};

using PerformanceVector = std::vector<double>;

enum class Transform { identity, log };

struct UtilitySpec {
    std::vector<double> weights;
    double parity_penalty = 0.0;
    Transform transform = Transform::identity;
    bool normalize = false;

    UtilitySpec() = default;
    UtilitySpec(std::vector<double> weights, double parity_penalty = 0.0,
                Transform transform = Transform::identity, bool normalize = false);

    std::size_t size() const noexcept { return weights.size(); }
    double weight_sum() const noexcept;

    // Concave and nondecreasing in every M_k.
    bool is_monotone_concave() const noexcept { return parity_penalty == 0.0; }

    static UtilitySpec equal(std::size_t groups, bool normalize = true);
};

void validate(const Allocation& alloc);
void validate(const CostModel& cost);
void validate(const UtilitySpec& spec);

// dot(costs, counts) <= budget, with a 1e-9 relative slack.
bool check_feasible(const Allocation& alloc, const CostModel& cost);

// sum_k a_k t(M_k) - b * sum_k |t(M_k) - mean(t(M))|, optionally divided by
// sum_k a_k. Throws DomainError for log of a non-positive performance.
double utility_eval(const UtilitySpec& spec, std::span<const double> perf);

// Same as utility_eval without dimension checks; returns -inf instead of
// throwing when the log transform sees a non-positive value. Used in hot loops.
double utility_eval_unchecked(const UtilitySpec& spec, std::span<const double> perf) noexcept;

// floor(n_k) + Bernoulli(frac(n_k)) per entry, deterministic in the seed.
std::vector<std::int64_t> realize_allocation(const Allocation& alloc, std::uint64_t seed);

}  // namespace equalloc
