#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "equalloc/alloc_core.hpp"
#include "equalloc/environment.hpp"

namespace equalloc {

// Desk-scale synthetic genomic world with two ancestry groups. Group 0 is the
// CEU-like population, group 1 the YRI-like population; causal variants are the
// ones whose allele frequency is most elevated in group 1.
struct GenomicConfig {
    std::size_t variants = 2000;
    std::size_t causal_count = 100;
    double heritability = 0.5;
    double prevalence = 0.05;
    std::size_t population = 20000;  // per group
    double benefit = 100.0;
    double cost = 5.0;
    std::size_t clump_window = 50;  // in variant positions
    double pvalue_threshold = 0.01;
    double maf_floor = 0.01;
    double r2_threshold = 0.2;      // applied to |r| between neighbouring variants
    double ld_rho = 0.6;            // latent correlation between adjacent variants
    double fst = 0.1;               // Balding-Nichols divergence between groups
    double holdout_fraction = 0.5;  // share of cases reserved for the test split
    double calibration_fraction = 0.5;  // share of training pairs used only for calibration
    std::uint64_t seed = 1;
};

void validate(const GenomicConfig& config);

inline constexpr std::size_t kGenomicGroups = 2;
inline constexpr std::array<const char*, kGenomicGroups> kGenomicLabels{"CEU", "YRI"};

// Person-major bit matrix of carrier indicators.
class GenotypeMatrix {
public:
    GenotypeMatrix() = default;
    GenotypeMatrix(std::size_t persons, std::size_t variants);

    std::size_t persons() const noexcept { return persons_; }
    std::size_t variants() const noexcept { return variants_; }
    bool get(std::size_t person, std::size_t variant) const noexcept {
        return (bits_[person * stride_ + variant / 64] >> (variant % 64)) & 1u;
    }
    void set(std::size_t person, std::size_t variant) noexcept {
        bits_[person * stride_ + variant / 64] |= std::uint64_t{1} << (variant % 64);
    }
    std::span<const std::uint64_t> row(std::size_t person) const noexcept {
        return {bits_.data() + person * stride_, stride_};
    }

private:
    std::size_t persons_ = 0;
    std::size_t variants_ = 0;
    std::size_t stride_ = 0;
    std::vector<std::uint64_t> bits_;
};

struct GroupPopulation {
    std::string label;
    std::vector<double> allele_freq;
    GenotypeMatrix genotypes;
    std::vector<double> genetic_liability;  // standardized genetic term
    std::vector<double> liability;          // total liability
    std::vector<std::uint8_t> disease;
    std::vector<std::uint32_t> train_cases;
    std::vector<std::uint32_t> train_controls;
    std::vector<std::uint32_t> test;  // held out; prevalence matches the population

    std::size_t case_count() const;
    std::size_t available_pairs() const { return std::min(train_cases.size(), train_controls.size()); }
};

struct GenomicWorld {
    GenomicConfig config;
    std::vector<std::size_t> causal;  // variant indices
    std::vector<double> effects;      // per causal variant
    std::array<GroupPopulation, kGenomicGroups> groups;
};

GenomicWorld generate_world(const GenomicConfig& config);

// A training sample of matched case-control pairs drawn from one group's
// training pool. Samples with the same seed are nested in n.
struct CaseControlSample {
    std::size_t group = 0;
    std::vector<std::uint32_t> cases;
    std::vector<std::uint32_t> controls;
};

CaseControlSample draw_pairs(const GenomicWorld& world, std::size_t group, std::size_t pairs,
                             std::uint64_t seed);

struct AssociationResult {
    double log_odds_ratio = 0.0;
    double chi_squared = 0.0;
    double p_value = 1.0;
};

// 2x2 carrier table: cases with/without the variant, controls with/without.
// Adds 0.5 to every cell when any cell is empty.
AssociationResult association_test(double case_carriers, double case_noncarriers,
                                   double control_carriers, double control_noncarriers);

struct RiskModel {
    std::vector<std::size_t> variants;
    std::vector<double> log_odds_ratios;
    double intercept = 0.0;  // includes the prevalence offset
    double slope = 0.0;
    double prevalence = 0.05;

    bool empty() const noexcept { return variants.empty(); }
    double score(const GenotypeMatrix& genotypes, std::size_t person) const;
    double probability_from_score(double score) const;
    double probability(const GenotypeMatrix& genotypes, std::size_t person) const;
};

// GWAS screen, clumping, log-odds score and prevalence-corrected Platt calibration.
RiskModel train_risk_model(const GenomicWorld& world, const CaseControlSample& sample);

// Mean over the group's test split of 1{p > prevalence} * (y * benefit - cost).
double evaluate_group_value(const GenomicWorld& world, const RiskModel& model, std::size_t group);
double evaluate_group_value(const GenomicWorld& world, std::size_t group,
                            const std::function<double(std::uint32_t person)>& risk);

// Area under the ROC curve of `score` against disease status over a group.
double liability_auc(const GenomicWorld& world, std::size_t group, std::span<const double> score);

struct CurvePoint {
    std::size_t group = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    double value = 0.0;
};

struct CurveSummary {
    std::size_t group = 0;
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
};

struct AllocationCurve {
    std::vector<CurvePoint> points;     // sorted by (group, n, seed)
    std::vector<CurveSummary> summary;  // sorted by (group, n)
};

AllocationCurve run_allocation_curve(const GenomicWorld& world, std::span<const std::size_t> grid,
                                     std::span<const std::uint64_t> seeds);

// Measured value of separately trained per-group models. Training sets are
// nested prefixes of one seeded draw per group, so growing an allocation only
// adds pairs.
class GenomicEnvironment final : public Environment {
public:
    GenomicEnvironment(const GenomicWorld& world, std::uint64_t seed);

    std::size_t groups() const override { return kGenomicGroups; }
    PerformanceVector observe(const Allocation& alloc) override;

    std::size_t trainings() const noexcept { return trainings_; }

private:
    double group_value(std::size_t group, std::size_t pairs);

    const GenomicWorld& world_;
    std::uint64_t seed_;
    std::uint64_t calls_ = 0;
    std::size_t trainings_ = 0;
    std::map<std::pair<std::size_t, std::size_t>, double> cache_;
};

}  // namespace equalloc
