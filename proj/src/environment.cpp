#include "equalloc/environment.hpp"

#include <cmath>
#include <random>

#include "equalloc/errors.hpp"

namespace equalloc {

AnalyticEnvironment::AnalyticEnvironment(AnalyticCurve curve, double noise_sd, std::uint64_t seed)
    : curve_(std::move(curve)), noise_sd_(noise_sd), seed_(seed) {
    if (!(noise_sd_ >= 0.0) || !std::isfinite(noise_sd_)) {
        throw PreconditionError("noise_sd must be finite and non-negative");
    }
}

PerformanceVector AnalyticEnvironment::observe(const Allocation& alloc) {
    PerformanceVector perf = eval_perf(curve_, alloc);
    // Each call gets its own stream keyed by (seed, call index).
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(calls_), static_cast<std::uint32_t>(calls_ >> 32)};
    ++calls_;
    if (noise_sd_ == 0.0) return perf;
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> noise(0.0, noise_sd_);
    for (double& m : perf) m += noise(rng);
    return perf;
}

std::optional<PerformanceVector> AnalyticEnvironment::expected(const Allocation& alloc) const {
    return eval_perf(curve_, alloc);
}

}  // namespace equalloc
