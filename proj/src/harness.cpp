#include "equalloc/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "equalloc/environment.hpp"
#include "equalloc/errors.hpp"

namespace equalloc {

namespace {

constexpr const char* kVersion = "1.0.0";

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

unsigned resolve_workers(unsigned workers, std::size_t tasks) {
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(tasks, 1)));
}

// Runs fn(i) for i in [0, n). The exception of the lowest failing index wins,
// so failures are reported the same way regardless of scheduling.
template <class F>
void parallel_for(std::size_t n, unsigned workers, F&& fn) {
    workers = resolve_workers(workers, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mu;
    std::size_t failed_index = n;
    std::exception_ptr failure;
    auto body = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mu);
                if (i < failed_index) {
                    failed_index = i;
                    failure = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

template <class T>
T field_or(const Json& doc, const char* key, T fallback) {
    if (!doc.is_object() || !doc.contains(key)) return fallback;
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

const Json& block(const Json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) throw ConfigError(std::string("missing block '") + key + "'");
    return doc.at(key);
}

// "seeds": [..] or a count n meaning 0..n-1.
std::vector<std::uint64_t> seeds_from_json(const Json& doc, std::size_t default_count) {
    std::vector<std::uint64_t> seeds;
    if (!doc.is_object() || !doc.contains("seeds")) {
        seeds.resize(default_count);
        std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
        return seeds;
    }
    const Json& s = doc.at("seeds");
    if (s.is_number_unsigned() || s.is_number_integer()) {
        const auto count = s.get<long long>();
        if (count <= 0) throw ConfigError("field 'seeds' must be a positive count or a list");
        seeds.resize(static_cast<std::size_t>(count));
        std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
    } else {
        seeds = field_or<std::vector<std::uint64_t>>(doc, "seeds", {});
        if (seeds.empty()) throw ConfigError("field 'seeds' must not be empty");
    }
    return seeds;
}

std::vector<std::string> numbers(std::span<const double> xs) {
    std::vector<std::string> out;
    for (double x : xs) out.push_back(format_number(x));
    return out;
}

void append(std::vector<std::string>& row, const std::vector<std::string>& more) {
    row.insert(row.end(), more.begin(), more.end());
}

std::vector<double> as_vector(const Allocation& a) { return {a.counts().begin(), a.counts().end()}; }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::solve: return "solve";
        case ExperimentKind::greedy: return "greedy";
        case ExperimentKind::audit: return "audit";
        case ExperimentKind::table1: return "table1";
        case ExperimentKind::convergence: return "convergence";
        case ExperimentKind::frontier: return "frontier";
        case ExperimentKind::adaptive_prs: return "adaptive_prs";
    }
    return "table1";
}

ExperimentKind experiment_kind_from_string(const std::string& name) {
    if (name == "solve") return ExperimentKind::solve;
    if (name == "greedy") return ExperimentKind::greedy;
    if (name == "audit") return ExperimentKind::audit;
    if (name == "table1") return ExperimentKind::table1;
    if (name == "convergence") return ExperimentKind::convergence;
    if (name == "frontier") return ExperimentKind::frontier;
    if (name == "adaptive_prs" || name == "prs-sim") return ExperimentKind::adaptive_prs;
    throw ConfigError("unknown experiment kind '" + name + "'");
}

Instance instance_from_json(const Json& doc) {
    Instance inst{curve_from_json(block(doc, "curve")), cost_from_json(block(doc, "cost")), std::nullopt};
    if (inst.curve.size() != inst.cost.size()) {
        throw ConfigError("cost block has K=" + std::to_string(inst.cost.size()) + " but curve has K=" +
                          std::to_string(inst.curve.size()));
    }
    if (doc.contains("utility")) {
        inst.utility = utility_from_json(doc.at("utility"));
        if (inst.utility->size() != inst.curve.size()) {
            throw ConfigError("utility block has K=" + std::to_string(inst.utility->size()) +
                              " but curve has K=" + std::to_string(inst.curve.size()));
        }
    }
    return inst;
}

// ---- Table 1 --------------------------------------------------------------

Table1Config table1_defaults() {
    Table1Config c;
    c.curve = AnalyticCurve({1.0, 0.3, 0.3, 0.3,
                             0.3, 0.5, 0.3, 0.3,
                             0.3, 0.3, 1.0, 0.3,
                             0.3, 0.3, 0.3, 1.0},
                            4, CurveForm::sqrt);
    c.cost = CostModel({1.0, 1.0, 2.0, 1.0}, 1000.0);
    c.equal_utility = UtilitySpec({1.0, 1.0, 1.0, 1.0}, 0.0, Transform::identity, true);
    c.priority_utility = UtilitySpec({1.0, 1.0, 1.0, 1.5}, 0.0, Transform::identity, true);
    c.representative_shares = {2.0, 2.0, 2.0, 1.0};
    return c;
}

Table1Config table1_from_json(const Json& doc) {
    Table1Config c = table1_defaults();
    if (doc.contains("curve")) c.curve = curve_from_json(doc.at("curve"));
    if (doc.contains("cost")) c.cost = cost_from_json(doc.at("cost"));
    if (doc.contains("utilities")) {
        const Json& u = doc.at("utilities");
        if (u.contains("equal")) c.equal_utility = utility_from_json(u.at("equal"));
        if (u.contains("priority")) c.priority_utility = utility_from_json(u.at("priority"));
    }
    c.representative_shares = field_or(doc, "representative_shares", c.representative_shares);
    c.step = field_or(doc, "step", c.step);
    c.grid_resolution = field_or(doc, "grid_resolution", c.grid_resolution);
    c.workers = field_or(doc, "workers", c.workers);
    const std::size_t k = c.curve.size();
    if (c.cost.size() != k || c.equal_utility.size() != k || c.priority_utility.size() != k ||
        c.representative_shares.size() != k) {
        throw ConfigError("table1 blocks disagree on the number of groups (curve has K=" + std::to_string(k) + ")");
    }
    if (!(c.step > 0.0)) throw ConfigError("field 'step' must be positive");
    if (!(c.grid_resolution > 0.0)) throw ConfigError("field 'grid_resolution' must be positive");
    return c;
}

const Table1Row& Table1Result::row(const std::string& policy) const {
    for (const auto& r : rows) {
        if (r.policy == policy) return r;
    }
    throw PreconditionError("no table row named '" + policy + "'");
}

Table1Result run_table1(const Table1Config& c) {
    Table1Result result;
    auto add = [&](std::string name, Allocation alloc) {
        Table1Row row;
        row.policy = std::move(name);
        row.perf = eval_perf(c.curve, alloc);
        row.u_equal = utility_eval(c.equal_utility, row.perf);
        row.u_priority = utility_eval(c.priority_utility, row.perf);
        row.alloc = std::move(alloc);
        result.rows.push_back(std::move(row));
    };
    add("Equal", equal_policy(c.cost, c.step));
    add("Representative", representative_policy(c.cost, c.representative_shares, c.step));
    add("Performance Parity", parity_policy(as_performance_fn(c.curve), c.cost, c.step).alloc);
    add("Optimal (U_equal)", solve_grid(c.curve, c.equal_utility, c.cost, c.grid_resolution, c.workers).alloc);
    add("Optimal (U_priority)",
        solve_grid(c.curve, c.priority_utility, c.cost, c.grid_resolution, c.workers).alloc);
    GreedyConfig g;
    g.step_cost = c.step;
    add("Greedy (U_equal)", run_greedy(c.curve, c.equal_utility, c.cost, g).alloc);
    add("Greedy (U_priority)", run_greedy(c.curve, c.priority_utility, c.cost, g).alloc);
    return result;
}

Table table1_table(const Table1Result& result) {
    Table t;
    t.columns = {"policy"};
    const std::size_t k = result.rows.empty() ? 0 : result.rows.front().alloc.size();
    for (std::size_t i = 1; i <= k; ++i) t.columns.push_back("n_" + std::to_string(i));
    for (std::size_t i = 1; i <= k; ++i) t.columns.push_back("M_" + std::to_string(i));
    t.columns.push_back("U_equal");
    t.columns.push_back("U_priority");
    for (const auto& r : result.rows) {
        std::vector<std::string> row{r.policy};
        append(row, numbers(r.alloc.counts()));
        append(row, numbers(r.perf));
        row.push_back(format_number(r.u_equal));
        row.push_back(format_number(r.u_priority));
        t.add_row(std::move(row));
    }
    return t;
}

// ---- Convergence ----------------------------------------------------------

ConvergenceConfig convergence_from_json(const Json& doc) {
    ConvergenceConfig c;
    c.instances = field_or(doc, "instances", c.instances);
    c.k_min = field_or(doc, "k_min", c.k_min);
    c.k_max = field_or(doc, "k_max", c.k_max);
    c.budget = field_or(doc, "budget", c.budget);
    if (doc.contains("forms")) {
        c.forms.clear();
        for (const auto& name : field_or<std::vector<std::string>>(doc, "forms", {})) {
            c.forms.push_back(curve_form_from_string(name));
        }
    }
    c.step_divisors = field_or(doc, "step_divisors", c.step_divisors);
    c.seed = field_or(doc, "seed", c.seed);
    c.solver_tol = field_or(doc, "solver_tol", c.solver_tol);
    c.grid_check_max_k = field_or(doc, "grid_check_max_k", c.grid_check_max_k);
    c.grid_check_divisor = field_or(doc, "grid_check_divisor", c.grid_check_divisor);
    c.workers = field_or(doc, "workers", c.workers);
    if (c.instances == 0) throw ConfigError("field 'instances' must be positive");
    if (c.k_min < 1 || c.k_max < c.k_min) throw ConfigError("need 1 <= k_min <= k_max");
    if (!(c.budget > 0.0)) throw ConfigError("field 'budget' must be positive");
    if (c.forms.empty() || c.step_divisors.empty()) throw ConfigError("forms and step_divisors must be non-empty");
    for (double d : c.step_divisors) {
        if (!(d >= 1.0)) throw ConfigError("step divisors must be >= 1");
    }
    return c;
}

Instance convergence_instance(const ConvergenceConfig& config, CurveForm form, std::size_t index) {
    std::mt19937_64 rng(mix_seed(mix_seed(config.seed, static_cast<std::uint64_t>(form)), index));
    std::uniform_int_distribution<std::size_t> pick_k(config.k_min, config.k_max);
    // Open interval (0, 1): costs and gammas must be positive.
    std::uniform_real_distribution<double> unit(std::nextafter(0.0, 1.0), 1.0);
    const std::size_t k = pick_k(rng);
    std::vector<double> gamma(k * k);
    for (double& g : gamma) g = unit(rng);
    std::vector<double> costs(k);
    for (double& c : costs) c = unit(rng);
    std::vector<double> weights(k);
    for (double& a : weights) a = unit(rng);
    return Instance{AnalyticCurve(std::move(gamma), k, form), CostModel(std::move(costs), config.budget),
                    UtilitySpec(std::move(weights), 0.0, Transform::identity, true)};
}

ConvergenceResult run_convergence(const ConvergenceConfig& c) {
    std::vector<double> divisors = c.step_divisors;
    std::sort(divisors.begin(), divisors.end());  // steps descending
    const std::size_t per_form = c.instances;
    const std::size_t tasks = c.forms.size() * per_form;
    std::vector<std::vector<ConvergenceRecord>> records(tasks);
    std::vector<double> disagreement(tasks, 0.0);

    parallel_for(tasks, c.workers, [&](std::size_t task) {
        const CurveForm form = c.forms[task / per_form];
        const std::size_t index = task % per_form;
        const Instance inst = convergence_instance(c, form, index);
        const UtilitySpec& util = *inst.utility;
        double u_opt = solve_concave(inst.curve, util, inst.cost, c.solver_tol).utility;
        if (inst.curve.size() <= c.grid_check_max_k) {
            const double grid = solve_grid(inst.curve, util, inst.cost, c.budget / c.grid_check_divisor, 1).utility;
            disagreement[task] = std::abs(grid - u_opt);
            u_opt = std::max(u_opt, grid);
        }
        for (double d : divisors) {
            GreedyConfig g;
            g.step_cost = c.budget / d;
            const double u_greedy = run_greedy(inst.curve, util, inst.cost, g).utility;
            records[task].push_back({form, index, inst.curve.size(), g.step_cost, u_opt, u_greedy,
                                     std::abs(u_opt - u_greedy)});
        }
    });

    ConvergenceResult out;
    for (auto& r : records) out.records.insert(out.records.end(), r.begin(), r.end());
    out.max_oracle_disagreement = disagreement.empty() ? 0.0 : *std::max_element(disagreement.begin(), disagreement.end());
    for (CurveForm form : c.forms) {
        for (double d : divisors) {
            ConvergenceSummary s{form, c.budget / d, 0, 0.0, 0.0, 0.0};
            for (const auto& r : out.records) {
                if (r.form != form || r.step != s.step) continue;
                ++s.instances;
                s.mean_gap += r.gap;
                s.mean_relative_gap += r.gap / std::abs(r.u_opt);
                s.max_gap = std::max(s.max_gap, r.gap);
            }
            s.mean_gap /= static_cast<double>(s.instances);
            s.mean_relative_gap /= static_cast<double>(s.instances);
            out.summary.push_back(s);
        }
    }
    return out;
}

Table convergence_records_table(const ConvergenceResult& result) {
    Table t;
    t.columns = {"form", "instance", "K", "step", "u_opt", "u_greedy", "gap"};
    for (const auto& r : result.records) {
        t.add_row({to_string(r.form), std::to_string(r.instance), std::to_string(r.groups), format_number(r.step),
                   format_number(r.u_opt), format_number(r.u_greedy), format_number(r.gap)});
    }
    return t;
}

Table convergence_summary_table(const ConvergenceResult& result) {
    Table t;
    t.columns = {"form", "step", "instances", "mean_gap", "mean_relative_gap", "max_gap"};
    for (const auto& s : result.summary) {
        t.add_row({to_string(s.form), format_number(s.step), std::to_string(s.instances), format_number(s.mean_gap),
                   format_number(s.mean_relative_gap), format_number(s.max_gap)});
    }
    return t;
}

// ---- Audit ----------------------------------------------------------------

AuditConfig audit_from_json(const Json& doc) {
    const Instance inst = instance_from_json(doc);
    AuditConfig c{inst.curve, inst.cost, utility_from_json(block(doc, "auditor")),
                  allocation_from_json(block(doc, "observed")), AuditOptions{}};
    c.options.grid_resolution = field_or(doc, "grid_resolution", c.options.grid_resolution);
    c.options.tol = field_or(doc, "tol", c.options.tol);
    c.options.max_iter = field_or(doc, "max_iter", c.options.max_iter);
    if (c.auditor.size() != c.curve.size()) {
        throw ConfigError("auditor utility has K=" + std::to_string(c.auditor.size()) + " but curve has K=" +
                          std::to_string(c.curve.size()));
    }
    if (c.observed.size() != c.curve.size()) {
        throw ConfigError("observed allocation has K=" + std::to_string(c.observed.size()) +
                          " but curve has K=" + std::to_string(c.curve.size()));
    }
    return c;
}

AuditResult run_audit(const AuditConfig& c) { return audit(c.curve, c.auditor, c.cost, c.observed, c.options); }

Table audit_table(const AuditConfig& c, const AuditResult& r) {
    Table t;
    t.columns = {"row", "utility", "method"};
    for (std::size_t i = 1; i <= c.curve.size(); ++i) t.columns.push_back("n_" + std::to_string(i));
    std::vector<std::string> observed{"observed", format_number(r.observed_utility), "-"};
    append(observed, numbers(c.observed.counts()));
    t.add_row(std::move(observed));
    std::vector<std::string> best{"optimum", format_number(r.optimum.utility), std::string(to_string(r.optimum.method))};
    append(best, numbers(r.optimum.alloc.counts()));
    t.add_row(std::move(best));
    std::vector<std::string> gap{"gap", format_number(r.gap), "-"};
    append(gap, std::vector<std::string>(c.curve.size(), ""));
    t.add_row(std::move(gap));
    return t;
}

// ---- Genomic experiments --------------------------------------------------

FrontierConfig frontier_from_json(const Json& doc) {
    FrontierConfig c;
    if (doc.contains("world")) c.world = genomic_from_json(doc.at("world"));
    c.budget = field_or(doc, "budget", c.budget);
    c.min_per_group = field_or(doc, "min_per_group", c.min_per_group);
    c.step = field_or(doc, "step", c.step);
    c.seeds = seeds_from_json(doc, 20);
    c.representative_alloc = field_or(doc, "representative_alloc", c.representative_alloc);
    c.population_shares = field_or(doc, "population_shares", c.population_shares);
    c.weight_ratios = field_or(doc, "weight_ratios", c.weight_ratios);
    if (doc.contains("estimator")) c.estimator = estimator_from_json(doc.at("estimator"));
    c.workers = field_or(doc, "workers", c.workers);
    if (!(c.step > 0.0) || !(c.min_per_group >= 0.0)) throw ConfigError("step must be positive, min_per_group non-negative");
    if (2.0 * c.min_per_group > c.budget) throw ConfigError("budget cannot cover min_per_group in both groups");
    const double units = (c.budget - 2.0 * c.min_per_group) / c.step;
    if (std::abs(units - std::round(units)) > 1e-9) {
        throw ConfigError("budget - 2 * min_per_group must be a multiple of step");
    }
    if (c.representative_alloc.size() != kGenomicGroups || c.population_shares.size() != kGenomicGroups) {
        throw ConfigError("representative_alloc and population_shares need two entries (CEU, YRI)");
    }
    for (double r : c.weight_ratios) {
        if (!(r > 0.0)) throw ConfigError("weight ratios must be positive");
    }
    return c;
}

std::vector<WeightSetting> frontier_weight_settings(const FrontierConfig& c) {
    std::vector<double> ratios = c.weight_ratios;
    if (ratios.empty()) {
        for (int i = 0; i <= 12; ++i) ratios.push_back(std::pow(10.0, -3.0 + 0.5 * i));
    }
    std::vector<WeightSetting> out;
    for (double r : ratios) out.push_back({"ratio=" + format_number(r), {r, 1.0}});
    out.push_back({"equal", {1.0, 1.0}});
    out.push_back({"population", c.population_shares});
    out.push_back({"priority", {1.0, 1.5}});
    return out;
}

namespace {

double weighted_value(std::span<const double> w, double m_ceu, double m_yri) {
    return (w[0] * m_ceu + w[1] * m_yri) / (w[0] + w[1]);
}

void check_frontier_capacity(const GenomicWorld& world, const FrontierConfig& c) {
    const double top = c.budget - c.min_per_group;
    for (std::size_t g = 0; g < kGenomicGroups; ++g) {
        if (top > static_cast<double>(world.groups[g].available_pairs())) {
            throw PreconditionError("frontier needs up to " + format_number(top) + " training pairs but group " +
                                    world.groups[g].label + " has " +
                                    std::to_string(world.groups[g].available_pairs()));
        }
    }
    for (double n : c.representative_alloc) {
        if (n < 1.0 || n > static_cast<double>(world.groups[0].available_pairs()) ||
            n > static_cast<double>(world.groups[1].available_pairs())) {
            throw PreconditionError("representative allocation is outside the available training pairs");
        }
    }
}

}  // namespace

FrontierResult run_frontier(const GenomicWorld& world, const FrontierConfig& c) {
    check_frontier_capacity(world, c);
    if (c.seeds.empty()) throw PreconditionError("frontier needs at least one seed");
    std::vector<double> grid;
    const auto units = static_cast<long>(std::llround((c.budget - 2.0 * c.min_per_group) / c.step));
    for (long i = 0; i <= units; ++i) grid.push_back(c.min_per_group + static_cast<double>(i) * c.step);
    const auto settings = frontier_weight_settings(c);
    const CostModel cost({1.0, 1.0}, c.budget);
    const Allocation start({c.min_per_group, c.min_per_group});
    const double half = std::round(c.budget / 2.0 / c.step) * c.step;

    struct SeedOutput {
        std::vector<FrontierSeedPoint> points;
        std::vector<FrontierMarker> markers;
    };
    std::vector<SeedOutput> per_seed(c.seeds.size());

    parallel_for(c.seeds.size(), c.workers, [&](std::size_t si) {
        const std::uint64_t seed = c.seeds[si];
        GenomicEnvironment env(world, seed);
        SeedOutput& out = per_seed[si];
        for (double n_ceu : grid) {
            const auto m = env.observe(Allocation({n_ceu, c.budget - n_ceu}));
            out.points.push_back({seed, n_ceu, c.budget - n_ceu, m[0], m[1]});
        }
        auto marker = [&](std::string name, std::vector<double> weights, const Allocation& a) {
            const auto m = env.observe(a);
            out.markers.push_back({std::move(name), std::move(weights), seed, a[0], a[1], m[0], m[1]});
        };
        marker("equal", {}, Allocation({half, c.budget - half}));
        marker("representative", {}, Allocation(c.representative_alloc));
        marker("parity", {}, parity_policy(env, cost, c.step, start).alloc);
        for (std::size_t w = 0; w < settings.size(); ++w) {
            GreedyConfig g;
            g.step_cost = c.step;
            g.start = start;
            g.marginal_source = MarginalSource::estimator;
            const UtilitySpec util(settings[w].weights, 0.0, Transform::identity, true);
            const auto run = run_greedy(env, util, cost, g, c.estimator, mix_seed(seed, w));
            marker("greedy:" + settings[w].label, settings[w].weights, run.alloc);
        }
    });

    FrontierResult result;
    for (const auto& s : per_seed) {
        result.seed_points.insert(result.seed_points.end(), s.points.begin(), s.points.end());
    }
    const double seeds = static_cast<double>(c.seeds.size());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        FrontierPoint p;
        p.n_ceu = grid[gi];
        p.n_yri = c.budget - grid[gi];
        for (const auto& s : per_seed) {
            p.m_ceu += s.points[gi].m_ceu / seeds;
            p.m_yri += s.points[gi].m_yri / seeds;
        }
        for (const auto& s : per_seed) {
            p.sd_ceu += std::pow(s.points[gi].m_ceu - p.m_ceu, 2);
            p.sd_yri += std::pow(s.points[gi].m_yri - p.m_yri, 2);
        }
        p.sd_ceu = seeds > 1 ? std::sqrt(p.sd_ceu / (seeds - 1)) : 0.0;
        p.sd_yri = seeds > 1 ? std::sqrt(p.sd_yri / (seeds - 1)) : 0.0;
        result.frontier.push_back(p);
    }
    // Markers grouped by marker, then seed.
    const std::size_t per = per_seed.front().markers.size();
    for (std::size_t m = 0; m < per; ++m) {
        for (const auto& s : per_seed) result.markers.push_back(s.markers[m]);
    }
    for (std::size_t w = 0; w < settings.size(); ++w) {
        GreedyFrontierSummary g;
        g.setting = settings[w];
        const std::string name = "greedy:" + settings[w].label;
        for (const auto& mk : result.markers) {
            if (mk.marker != name) continue;
            g.mean_n_ceu += mk.n_ceu / seeds;
            g.mean_utility += weighted_value(mk.weights, mk.m_ceu, mk.m_yri) / seeds;
        }
        g.best_grid_utility = -std::numeric_limits<double>::infinity();
        for (const auto& p : result.frontier) {
            const double u = weighted_value(settings[w].weights, p.m_ceu, p.m_yri);
            if (u > g.best_grid_utility) {
                g.best_grid_utility = u;
                g.best_grid_n_ceu = p.n_ceu;
            }
        }
        g.shortfall = (g.best_grid_utility - g.mean_utility) / std::abs(g.best_grid_utility);
        result.greedy.push_back(g);
    }
    return result;
}

Table frontier_table(const FrontierResult& r) {
    Table t;
    t.columns = {"n_CEU", "n_YRI", "M_CEU", "M_YRI", "sd_CEU", "sd_YRI"};
    for (const auto& p : r.frontier) {
        t.add_row({format_number(p.n_ceu), format_number(p.n_yri), format_number(p.m_ceu), format_number(p.m_yri),
                   format_number(p.sd_ceu), format_number(p.sd_yri)});
    }
    return t;
}

Table frontier_points_table(const FrontierResult& r) {
    Table t;
    t.columns = {"seed", "n_CEU", "n_YRI", "M_CEU", "M_YRI"};
    for (const auto& p : r.seed_points) {
        t.add_row({std::to_string(p.seed), format_number(p.n_ceu), format_number(p.n_yri), format_number(p.m_ceu),
                   format_number(p.m_yri)});
    }
    return t;
}

Table frontier_markers_table(const FrontierResult& r) {
    Table t;
    t.columns = {"marker", "a_CEU", "a_YRI", "seed", "n_CEU", "n_YRI", "M_CEU", "M_YRI"};
    for (const auto& m : r.markers) {
        const std::string a0 = m.weights.empty() ? "" : format_number(m.weights[0]);
        const std::string a1 = m.weights.empty() ? "" : format_number(m.weights[1]);
        t.add_row({m.marker, a0, a1, std::to_string(m.seed), format_number(m.n_ceu), format_number(m.n_yri),
                   format_number(m.m_ceu), format_number(m.m_yri)});
    }
    return t;
}

Table frontier_greedy_table(const FrontierResult& r) {
    Table t;
    t.columns = {"setting", "a_CEU", "a_YRI", "mean_n_CEU", "mean_utility", "best_grid_utility", "best_grid_n_CEU",
                 "shortfall"};
    for (const auto& g : r.greedy) {
        t.add_row({g.setting.label, format_number(g.setting.weights[0]), format_number(g.setting.weights[1]),
                   format_number(g.mean_n_ceu), format_number(g.mean_utility), format_number(g.best_grid_utility),
                   format_number(g.best_grid_n_ceu), format_number(g.shortfall)});
    }
    return t;
}

PrsSimConfig prs_sim_from_json(const Json& doc) {
    PrsSimConfig c;
    if (doc.contains("world")) c.world = genomic_from_json(doc.at("world"));
    c.grid = field_or(doc, "grid", c.grid);
    c.seeds = seeds_from_json(doc, 20);
    if (c.grid.empty()) throw ConfigError("field 'grid' must not be empty");
    return c;
}

Table allocation_curve_table(const AllocationCurve& curve) {
    Table t;
    t.columns = {"group", "n", "seed", "value"};
    for (const auto& p : curve.points) {
        t.add_row({kGenomicLabels[p.group], std::to_string(p.n), std::to_string(p.seed), format_number(p.value)});
    }
    return t;
}

Table allocation_summary_table(const AllocationCurve& curve) {
    Table t;
    t.columns = {"group", "n", "mean", "sd"};
    for (const auto& s : curve.summary) {
        t.add_row({kGenomicLabels[s.group], std::to_string(s.n), format_number(s.mean), format_number(s.sd)});
    }
    return t;
}

// ---- Dispatch -------------------------------------------------------------

namespace {

void shift_seeds(Json& doc, std::uint64_t offset) {
    if (offset == 0 || !doc.is_object()) return;
    if (doc.contains("seed")) doc["seed"] = field_or<std::uint64_t>(doc, "seed", 0) + offset;
    if (doc.contains("seeds")) {
        auto seeds = seeds_from_json(doc, 0);
        for (auto& s : seeds) s += offset;
        doc["seeds"] = seeds;
    }
}

struct GreedyJob {
    Instance instance;
    UtilitySpec utility;
    GreedyConfig greedy;
    EstimatorConfig estimator;
    double noise_sd = 0.0;
    std::uint64_t seed = 0;
    std::string trace_out;
};

GreedyJob greedy_from_json(const Json& doc) {
    const Json& inst_doc = doc.contains("instance") ? doc.at("instance") : doc;
    GreedyJob job{instance_from_json(inst_doc), UtilitySpec{}, GreedyConfig{}, EstimatorConfig{}, 0.0, 0, ""};
    job.utility = job.instance.utility ? *job.instance.utility : UtilitySpec::equal(job.instance.curve.size());
    job.greedy.step_cost = field_or(doc, "step", 1.0);
    if (doc.contains("start")) {
        const Json& s = doc.at("start");
        if (!(s.is_string() && s.get<std::string>() == "zero")) {
            job.greedy.start = s.is_string() ? allocation_from_json(read_json_file(s.get<std::string>()))
                                             : allocation_from_json(s);
            if (job.greedy.start->size() != job.instance.curve.size()) {
                throw ConfigError("start allocation does not match the instance's K");
            }
        }
    }
    const auto marginals = field_or<std::string>(doc, "marginals", "true");
    if (marginals == "estimated") {
        job.greedy.marginal_source = MarginalSource::estimator;
    } else if (marginals != "true") {
        throw ConfigError("field 'marginals': expected \"true\" or \"estimated\", got \"" + marginals + "\"");
    }
    if (doc.contains("estimator")) job.estimator = estimator_from_json(doc.at("estimator"));
    job.noise_sd = field_or(doc, "noise_sd", 0.0);
    job.seed = field_or<std::uint64_t>(doc, "seed", 0);
    job.trace_out = field_or<std::string>(doc, "trace_out", "");
    if (!(job.greedy.step_cost > 0.0)) throw ConfigError("field 'step' must be positive");
    return job;
}

Table trace_table(const GreedyResult& r, std::size_t groups) {
    Table t;
    t.columns = {"step", "group", "spend"};
    for (std::size_t k = 1; k <= groups; ++k) t.columns.push_back("n_" + std::to_string(k));
    for (std::size_t k = 1; k <= groups; ++k) t.columns.push_back("marginal_est_" + std::to_string(k));
    for (std::size_t k = 1; k <= groups; ++k) t.columns.push_back("marginal_true_" + std::to_string(k));
    t.columns.push_back("utility");
    for (const auto& s : r.trace.steps) {
        std::vector<std::string> row{std::to_string(s.step), std::to_string(s.group), format_number(s.spend)};
        append(row, numbers(s.counts));
        append(row, numbers(s.marginal_est));
        append(row, numbers(s.marginal_true));
        row.push_back(format_number(s.utility));
        t.add_row(std::move(row));
    }
    return t;
}

Json validate_document(ExperimentKind kind, const Json& doc) {
    switch (kind) {
        case ExperimentKind::solve: {
            const Instance inst = instance_from_json(doc);
            if (!inst.utility) throw ConfigError("missing block 'utility'");
            break;
        }
        case ExperimentKind::greedy: greedy_from_json(doc); break;
        case ExperimentKind::audit: audit_from_json(doc); break;
        case ExperimentKind::table1: table1_from_json(doc); break;
        case ExperimentKind::convergence: convergence_from_json(doc); break;
        case ExperimentKind::frontier: frontier_from_json(doc); break;
        case ExperimentKind::adaptive_prs: prs_sim_from_json(doc); break;
    }
    return doc;
}

}  // namespace

ExperimentConfig load_experiment(ExperimentKind kind, Json document, std::filesystem::path out_dir,
                                 std::uint64_t seed_offset) {
    if (!document.is_object()) throw ConfigError("config must be an object");
    if (document.contains("experiment")) {
        const auto named = experiment_kind_from_string(field_or<std::string>(document, "experiment", ""));
        if (named != kind) {
            throw ConfigError("config is for experiment '" + to_string(named) + "' but '" + to_string(kind) +
                              "' was requested");
        }
    }
    shift_seeds(document, seed_offset);
    validate_document(kind, document);
    ExperimentConfig c;
    c.kind = kind;
    if (document.contains("seeds")) {
        c.seeds = seeds_from_json(document, 0);
    } else {
        c.seeds = {field_or<std::uint64_t>(document, "seed", 0)};
    }
    c.digest = config_digest(document);
    c.document = std::move(document);
    c.out_dir = std::move(out_dir);
    return c;
}

ExperimentOutput run_experiment(const ExperimentConfig& config) {
    const auto t0 = Clock::now();
    const Json& doc = config.document;
    const auto& dir = config.out_dir;
    std::filesystem::create_directories(dir);
    ExperimentOutput out;
    Json timings = Json::object();
    auto emit = [&](const std::string& name, const Table& table) {
        const auto path = dir / name;
        write_csv(path, table, config.digest);
        out.files.push_back(path);
    };
    auto emit_json = [&](const std::string& name, const Json& j) {
        const auto path = dir / name;
        write_text_file(path, j.dump(2) + "\n");
        out.files.push_back(path);
    };

    switch (config.kind) {
        case ExperimentKind::solve: {
            const Instance inst = instance_from_json(doc);
            const auto method = field_or<std::string>(doc, "method", "auto");
            const double resolution = field_or(doc, "grid_resolution", inst.cost.budget / 1000.0);
            const double tol = field_or(doc, "tol", 1e-8);
            SolveResult r;
            if (method == "grid") {
                r = solve_grid(inst.curve, *inst.utility, inst.cost, resolution);
            } else if (method == "concave") {
                r = solve_concave(inst.curve, *inst.utility, inst.cost, tol);
            } else if (method == "batch_enum") {
                r = batch_enum_optimum(inst.curve, *inst.utility, inst.cost, field_or(doc, "step", 1.0));
            } else if (method == "auto") {
                r = audit(inst.curve, *inst.utility, inst.cost, Allocation::zeros(inst.curve.size()),
                          AuditOptions{resolution, tol, 200000})
                        .optimum;
            } else {
                throw ConfigError("field 'method': expected auto, grid, concave or batch_enum");
            }
            emit_json("solve_result.json", to_json(r));
            out.runs.push_back({config.digest, 0, "optimum:" + std::string(to_string(r.method)), as_vector(r.alloc),
                                eval_perf(inst.curve, r.alloc), r.utility, seconds_since(t0), ""});
            break;
        }
        case ExperimentKind::greedy: {
            const GreedyJob job = greedy_from_json(doc);
            GreedyResult r;
            if (job.greedy.marginal_source == MarginalSource::true_curve && job.noise_sd == 0.0) {
                r = run_greedy(job.instance.curve, job.utility, job.instance.cost, job.greedy);
            } else {
                AnalyticEnvironment env(job.instance.curve, job.noise_sd, job.seed);
                r = run_greedy(env, job.utility, job.instance.cost, job.greedy, job.estimator, job.seed);
            }
            const std::filesystem::path trace = job.trace_out.empty() ? dir / "trace.csv" : std::filesystem::path(job.trace_out);
            write_csv(trace, trace_table(r, job.instance.curve.size()), config.digest);
            out.files.push_back(trace);
            emit_json("greedy_result.json",
                      Json{{"counts", as_vector(r.alloc)},
                           {"utility", r.utility},
                           {"steps", r.trace.steps.size()},
                           {"residual_budget", r.trace.residual_budget}});
            out.runs.push_back({config.digest, job.seed, "greedy", as_vector(r.alloc),
                                eval_perf(job.instance.curve, r.alloc), r.utility, seconds_since(t0), trace.string()});
            break;
        }
        case ExperimentKind::audit: {
            const AuditConfig c = audit_from_json(doc);
            const AuditResult r = run_audit(c);
            emit("audit.csv", audit_table(c, r));
            out.runs.push_back({config.digest, 0, "auditor-optimal", as_vector(r.optimum.alloc),
                                eval_perf(c.curve, r.optimum.alloc), r.optimum.utility, seconds_since(t0), ""});
            break;
        }
        case ExperimentKind::table1: {
            const Table1Result r = run_table1(table1_from_json(doc));
            emit("table1.csv", table1_table(r));
            for (const auto& row : r.rows) {
                out.runs.push_back({config.digest, 0, row.policy, as_vector(row.alloc), row.perf, row.u_equal,
                                    seconds_since(t0), ""});
            }
            break;
        }
        case ExperimentKind::convergence: {
            const ConvergenceResult r = run_convergence(convergence_from_json(doc));
            emit("convergence_records.csv", convergence_records_table(r));
            emit("convergence_summary.csv", convergence_summary_table(r));
            break;
        }
        case ExperimentKind::frontier: {
            const FrontierConfig c = frontier_from_json(doc);
            const auto tw = Clock::now();
            const GenomicWorld world = generate_world(c.world);
            timings["world_seconds"] = seconds_since(tw);
            const FrontierResult r = run_frontier(world, c);
            emit("frontier.csv", frontier_table(r));
            emit("frontier_points.csv", frontier_points_table(r));
            emit("frontier_markers.csv", frontier_markers_table(r));
            emit("frontier_greedy.csv", frontier_greedy_table(r));
            for (const auto& m : r.markers) {
                out.runs.push_back({config.digest, m.seed, m.marker, {m.n_ceu, m.n_yri}, {m.m_ceu, m.m_yri},
                                    m.weights.empty() ? 0.0 : weighted_value(m.weights, m.m_ceu, m.m_yri),
                                    0.0, ""});
            }
            break;
        }
        case ExperimentKind::adaptive_prs: {
            const PrsSimConfig c = prs_sim_from_json(doc);
            const GenomicWorld world = generate_world(c.world);
            const AllocationCurve curve = run_allocation_curve(world, c.grid, c.seeds);
            emit("allocation_curve.csv", allocation_curve_table(curve));
            emit("allocation_summary.csv", allocation_summary_table(curve));
            break;
        }
    }
    out.wall_seconds = seconds_since(t0);
    timings["total_seconds"] = out.wall_seconds;

    Json runs = Json::array();
    for (const auto& r : out.runs) {
        runs.push_back(Json{{"config_digest", r.config_digest},
                            {"seed", r.seed},
                            {"policy", r.policy},
                            {"alloc", r.alloc},
                            {"perf", r.perf},
                            {"utility", r.utility},
                            {"wall_seconds", r.wall_seconds},
                            {"trace_path", r.trace_path}});
    }
    Json files = Json::array();
    for (const auto& f : out.files) files.push_back(f.filename().string());
    const Json manifest{{"tool", "equalloc"},
                        {"version", kVersion},
                        {"experiment", to_string(config.kind)},
                        {"config_digest", config.digest},
                        {"config", doc},
                        {"seeds", config.seeds},
                        {"outputs", files},
                        {"runs", runs},
                        {"timings", timings}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
    return out;
}

}  // namespace equalloc
