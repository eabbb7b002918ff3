#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "equalloc/alloc_core.hpp"
#include "equalloc/curves.hpp"
#include "equalloc/estimator.hpp"
#include "equalloc/genomic.hpp"
#include "equalloc/greedy.hpp"
#include "equalloc/io.hpp"
#include "equalloc/optimizer.hpp"

namespace equalloc {

enum class ExperimentKind { solve, greedy, audit, table1, convergence, frontier, adaptive_prs };

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);  // accepts "prs-sim"

// An analytic instance: curve, cost model and (optionally) a utility.
struct Instance {
    AnalyticCurve curve;
    CostModel cost;
    std::optional<UtilitySpec> utility;
};

// Reads {"curve": {...}, "cost": {"costs", "budget"}, "utility": {...}} and checks K.
Instance instance_from_json(const Json& doc);

// ---- Table 1 --------------------------------------------------------------

struct Table1Config {
    AnalyticCurve curve;
    CostModel cost;
    UtilitySpec equal_utility;
    UtilitySpec priority_utility;
    std::vector<double> representative_shares;
    double step = 1.0;             // greedy / parity / static rounding step
    double grid_resolution = 1.0;  // spend resolution of the optimal rows
    unsigned workers = 0;
};

Table1Config table1_defaults();
Table1Config table1_from_json(const Json& doc);  // missing blocks fall back to the defaults

struct Table1Row {
    std::string policy;
    Allocation alloc;
    PerformanceVector perf;
    double u_equal = 0.0;
    double u_priority = 0.0;
};

struct Table1Result {
    std::vector<Table1Row> rows;  // Equal, Representative, Performance Parity, Optimal (U_equal),
                                  // Optimal (U_priority), Greedy (U_equal), Greedy (U_priority)
    const Table1Row& row(const std::string& policy) const;
};

Table1Result run_table1(const Table1Config& config);
Table table1_table(const Table1Result& result);

// ---- Convergence ----------------------------------------------------------

struct ConvergenceConfig {
    std::size_t instances = 100;  // per form
    std::size_t k_min = 2;
    std::size_t k_max = 10;
    double budget = 1000.0;
    std::vector<CurveForm> forms{CurveForm::sqrt, CurveForm::log1p};
    std::vector<double> step_divisors{10.0, 100.0, 1000.0};  // s = budget / divisor
    std::uint64_t seed = 0;
    double solver_tol = 1e-10;
    std::size_t grid_check_max_k = 3;
    double grid_check_divisor = 1000.0;  // grid resolution = budget / divisor
    unsigned workers = 0;
};

ConvergenceConfig convergence_from_json(const Json& doc);

struct ConvergenceRecord {
    CurveForm form = CurveForm::sqrt;
    std::size_t instance = 0;
    std::size_t groups = 0;
    double step = 0.0;
    double u_opt = 0.0;
    double u_greedy = 0.0;
    double gap = 0.0;  // |u_opt - u_greedy|
};

struct ConvergenceSummary {
    CurveForm form = CurveForm::sqrt;
    double step = 0.0;
    std::size_t instances = 0;
    double mean_gap = 0.0;
    double mean_relative_gap = 0.0;  // mean of gap / |u_opt|
    double max_gap = 0.0;
};

struct ConvergenceResult {
    std::vector<ConvergenceRecord> records;    // sorted by (form, instance, step descending)
    std::vector<ConvergenceSummary> summary;   // sorted by (form, step descending)
    double max_oracle_disagreement = 0.0;      // |grid - concave| over K <= grid_check_max_k
};

// Random instance i of a form: K ~ U{k_min..k_max}, a_k, c_k, gamma_kj ~ U(0, 1).
Instance convergence_instance(const ConvergenceConfig& config, CurveForm form, std::size_t index);
ConvergenceResult run_convergence(const ConvergenceConfig& config);
Table convergence_records_table(const ConvergenceResult& result);
Table convergence_summary_table(const ConvergenceResult& result);

// ---- Audit ----------------------------------------------------------------

struct AuditConfig {
    AnalyticCurve curve;
    CostModel cost;
    UtilitySpec auditor;
    Allocation observed;
    AuditOptions options;
};

AuditConfig audit_from_json(const Json& doc);
AuditResult run_audit(const AuditConfig& config);
Table audit_table(const AuditConfig& config, const AuditResult& result);

// ---- Genomic experiments --------------------------------------------------

struct WeightSetting {
    std::string label;
    std::vector<double> weights;  // (a_CEU, a_YRI)
};

struct FrontierConfig {
    GenomicConfig world;
    double budget = 5000.0;
    double min_per_group = 500.0;
    double step = 100.0;
    std::vector<std::uint64_t> seeds;
    std::vector<double> representative_alloc{3300.0, 700.0};
    std::vector<double> population_shares{0.825, 0.175};
    std::vector<double> weight_ratios;  // a_CEU / a_YRI; log-spaced 1e-3..1e3 when empty
    EstimatorConfig estimator;
    unsigned workers = 0;
};

FrontierConfig frontier_from_json(const Json& doc);
std::vector<WeightSetting> frontier_weight_settings(const FrontierConfig& config);

struct FrontierPoint {
    double n_ceu = 0.0;
    double n_yri = 0.0;
    double m_ceu = 0.0;  // mean over seeds
    double m_yri = 0.0;
    double sd_ceu = 0.0;
    double sd_yri = 0.0;
};

struct FrontierSeedPoint {
    std::uint64_t seed = 0;
    double n_ceu = 0.0;
    double n_yri = 0.0;
    double m_ceu = 0.0;
    double m_yri = 0.0;
};

struct FrontierMarker {
    std::string marker;  // equal, representative, parity, greedy:<label>
    std::vector<double> weights;
    std::uint64_t seed = 0;
    double n_ceu = 0.0;
    double n_yri = 0.0;
    double m_ceu = 0.0;
    double m_yri = 0.0;
};

struct GreedyFrontierSummary {
    WeightSetting setting;
    double mean_n_ceu = 0.0;
    double mean_utility = 0.0;       // normalized weighted value of the greedy endpoints
    double best_grid_utility = 0.0;  // max over the mean frontier
    double best_grid_n_ceu = 0.0;
    double shortfall = 0.0;          // (best - mean) / |best|
};

struct FrontierResult {
    std::vector<FrontierPoint> frontier;        // ascending n_CEU
    std::vector<FrontierSeedPoint> seed_points; // sorted by (seed, n_CEU)
    std::vector<FrontierMarker> markers;        // sorted by (marker order, seed)
    std::vector<GreedyFrontierSummary> greedy;  // in weight-setting order
};

FrontierResult run_frontier(const GenomicWorld& world, const FrontierConfig& config);
Table frontier_table(const FrontierResult& result);
Table frontier_points_table(const FrontierResult& result);
Table frontier_markers_table(const FrontierResult& result);
Table frontier_greedy_table(const FrontierResult& result);

struct PrsSimConfig {
    GenomicConfig world;
    std::vector<std::size_t> grid{500, 1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500};
    std::vector<std::uint64_t> seeds;
};

PrsSimConfig prs_sim_from_json(const Json& doc);
Table allocation_curve_table(const AllocationCurve& curve);
Table allocation_summary_table(const AllocationCurve& curve);

// ---- Dispatch -------------------------------------------------------------

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::table1;
    Json document;
    std::vector<std::uint64_t> seeds;
    std::filesystem::path out_dir;
    std::string digest;  // SHA-256 of the document after the seed offset is applied
};

// Validates the document for `kind`, applies the seed offset to every seed
// list and computes the digest.
ExperimentConfig load_experiment(ExperimentKind kind, Json document, std::filesystem::path out_dir,
                                 std::uint64_t seed_offset = 0);

struct RunRecord {
    std::string config_digest;
    std::uint64_t seed = 0;
    std::string policy;
    std::vector<double> alloc;
    std::vector<double> perf;
    double utility = 0.0;
    double wall_seconds = 0.0;
    std::string trace_path;
};

struct ExperimentOutput {
    std::vector<std::filesystem::path> files;
    std::vector<RunRecord> runs;
    double wall_seconds = 0.0;
};

// Runs the experiment, writes its CSV tables and manifest.json under out_dir.
ExperimentOutput run_experiment(const ExperimentConfig& config);

}  // namespace equalloc
