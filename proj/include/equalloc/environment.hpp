#pragma once

#include <cstdint>
#include <optional>

#include "equalloc/alloc_core.hpp"
#include "equalloc/curves.hpp"

namespace equalloc {

// A data-collection world: given the allocation purchased so far, it trains
// (or simulates training) and reports measured group performances.
class Environment {
public:
    virtual ~Environment() = default;

    virtual std::size_t groups() const = 0;

    // Measured performance after training on `alloc`. May be noisy; repeated
    // calls advance the environment's random stream.
    virtual PerformanceVector observe(const Allocation& alloc) = 0;

    // Noise-free expected performance when the environment knows it.
    virtual std::optional<PerformanceVector> expected(const Allocation&) const { return std::nullopt; }
};

// Analytic learning curve plus independent Gaussian measurement noise.
class AnalyticEnvironment final : public Environment {
public:
    AnalyticEnvironment(AnalyticCurve curve, double noise_sd, std::uint64_t seed);

    std::size_t groups() const override { return curve_.size(); }
    PerformanceVector observe(const Allocation& alloc) override;
    std::optional<PerformanceVector> expected(const Allocation& alloc) const override;

    const AnalyticCurve& curve() const noexcept { return curve_; }
    double noise_sd() const noexcept { return noise_sd_; }
    std::uint64_t calls() const noexcept { return calls_; }

private:
    AnalyticCurve curve_;
    double noise_sd_;
    std::uint64_t seed_;
    std::uint64_t calls_ = 0;
};

}  // namespace equalloc
