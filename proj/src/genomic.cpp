#include "equalloc/genomic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "equalloc/errors.hpp"

namespace equalloc {

namespace {

std::mt19937_64 make_rng(std::initializer_list<std::uint64_t> keys) {
    std::vector<std::uint32_t> words;
    for (std::uint64_t k : keys) {
        words.push_back(static_cast<std::uint32_t>(k));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

double draw_beta(double a, double b, std::mt19937_64& rng) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    return x / (x + y);
}

void standardize(std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

}  // namespace

void validate(const GenomicConfig& c) {
    if (c.variants == 0 || c.causal_count == 0) throw PreconditionError("need at least one causal variant");
    if (c.causal_count > c.variants) {
        throw PreconditionError("causal_count (" + std::to_string(c.causal_count) + ") exceeds variants (" +
                                std::to_string(c.variants) + ")");
    }
    if (c.population < 1000) throw PreconditionError("population must be at least 1000 per group");
    if (!(c.heritability >= 0.0 && c.heritability <= 1.0)) {
        throw PreconditionError("heritability must lie in [0, 1]");
    }
    if (!(c.prevalence > 0.0 && c.prevalence < 1.0)) throw PreconditionError("prevalence must lie in (0, 1)");
    if (!(c.benefit > 0.0) || !(c.cost >= 0.0)) throw PreconditionError("benefit must be positive, cost non-negative");
    if (!(c.pvalue_threshold > 0.0 && c.pvalue_threshold <= 1.0)) {
        throw PreconditionError("pvalue_threshold must lie in (0, 1]");
    }
    if (!(c.maf_floor >= 0.0 && c.maf_floor < 0.5)) throw PreconditionError("maf_floor must lie in [0, 0.5)");
    if (!(c.r2_threshold >= 0.0 && c.r2_threshold <= 1.0)) {
        throw PreconditionError("r2_threshold must lie in [0, 1]");
    }
    if (!(c.ld_rho >= 0.0 && c.ld_rho < 1.0)) throw PreconditionError("ld_rho must lie in [0, 1)");
    if (!(c.fst > 0.0 && c.fst < 1.0)) throw PreconditionError("fst must lie in (0, 1)");
    if (!(c.holdout_fraction > 0.0 && c.holdout_fraction < 1.0)) {
        throw PreconditionError("holdout_fraction must lie in (0, 1)");
    }
    if (!(c.calibration_fraction >= 0.0 && c.calibration_fraction < 1.0)) {
        throw PreconditionError("calibration_fraction must lie in [0, 1)");
    }
}

GenotypeMatrix::GenotypeMatrix(std::size_t persons, std::size_t variants)
    : persons_(persons), variants_(variants), stride_((variants + 63) / 64), bits_(persons * stride_, 0) {}

std::size_t GroupPopulation::case_count() const {
    return static_cast<std::size_t>(std::count(disease.begin(), disease.end(), std::uint8_t{1}));
}

GenomicWorld generate_world(const GenomicConfig& config) {
    validate(config);
    GenomicWorld world;
    world.config = config;
    const std::size_t variants = config.variants;
    const std::size_t persons = config.population;

    // Ancestral minor-allele frequencies, then Balding-Nichols drift per group.
    auto freq_rng = make_rng({config.seed, 0x66726571});
    std::uniform_real_distribution<double> ancestral(0.05, 0.5);
    const double drift = (1.0 - config.fst) / config.fst;
    for (auto& g : world.groups) g.allele_freq.resize(variants);
    for (std::size_t v = 0; v < variants; ++v) {
        const double p = ancestral(freq_rng);
        for (auto& g : world.groups) {
            g.allele_freq[v] = std::clamp(draw_beta(p * drift, (1.0 - p) * drift, freq_rng), 0.001, 0.999);
        }
    }

    // Causal variants: largest frequency excess in group 1 over group 0.
    std::vector<std::size_t> order(variants);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return world.groups[1].allele_freq[a] - world.groups[0].allele_freq[a] >
               world.groups[1].allele_freq[b] - world.groups[0].allele_freq[b];
    });
    world.causal.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.causal_count));
    std::sort(world.causal.begin(), world.causal.end());
    auto effect_rng = make_rng({config.seed, 0x65666673});
    std::normal_distribution<double> effect(0.0, std::sqrt(config.heritability / static_cast<double>(config.causal_count)));
    world.effects.resize(config.causal_count);
    for (double& b : world.effects) b = effect(effect_rng);

    const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
    const double rho = config.ld_rho;
    const double innovation = std::sqrt(1.0 - rho * rho);
    const auto case_total = static_cast<std::size_t>(std::floor(config.prevalence * static_cast<double>(persons)));

    for (std::size_t gi = 0; gi < kGenomicGroups; ++gi) {
        GroupPopulation& group = world.groups[gi];
        group.label = kGenomicLabels[gi];
        std::vector<double> threshold(variants);
        for (std::size_t v = 0; v < variants; ++v) {
            threshold[v] = boost::math::quantile(std_normal, group.allele_freq[v]);
        }

        // Carriers from a latent AR(1) Gaussian along the variant index: marginal
        // frequencies are exact and neighbouring variants are correlated.
        group.genotypes = GenotypeMatrix(persons, variants);
        auto geno_rng = make_rng({config.seed, 0x67656e6f, gi});
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::size_t p = 0; p < persons; ++p) {
            double z = normal(geno_rng);
            for (std::size_t v = 0; v < variants; ++v) {
                if (v > 0) z = rho * z + innovation * normal(geno_rng);
                if (z < threshold[v]) group.genotypes.set(p, v);
            }
        }

        group.genetic_liability.assign(persons, 0.0);
        for (std::size_t p = 0; p < persons; ++p) {
            double x = 0.0;
            for (std::size_t c = 0; c < world.causal.size(); ++c) {
                if (group.genotypes.get(p, world.causal[c])) x += world.effects[c];
            }
            group.genetic_liability[p] = x;
        }
    }

    // The genetic term is standardized over both groups together, so a group
    // carrying more causal variance has the more heritable liability.
    {
        std::vector<double> pooled;
        pooled.reserve(persons * kGenomicGroups);
        for (const auto& g : world.groups) pooled.insert(pooled.end(), g.genetic_liability.begin(), g.genetic_liability.end());
        const double n = static_cast<double>(pooled.size());
        const double mean = std::accumulate(pooled.begin(), pooled.end(), 0.0) / n;
        double var = 0.0;
        for (double x : pooled) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / n);
        for (auto& g : world.groups) {
            for (double& x : g.genetic_liability) x = sd > 0.0 ? (x - mean) / sd : 0.0;
        }
    }

    for (std::size_t gi = 0; gi < kGenomicGroups; ++gi) {
        GroupPopulation& group = world.groups[gi];
        std::normal_distribution<double> normal(0.0, 1.0);

        auto env_rng = make_rng({config.seed, 0x656e7672, gi});
        std::vector<double> environment(persons);
        for (double& e : environment) e = normal(env_rng);
        standardize(environment);

        const double gw = std::sqrt(config.heritability);
        const double ew = std::sqrt(1.0 - config.heritability);
        group.liability.resize(persons);
        for (std::size_t p = 0; p < persons; ++p) {
            group.liability[p] = group.genetic_liability[p] * gw + environment[p] * ew;
        }

        // Liability threshold: exactly floor(q P) cases.
        std::vector<std::uint32_t> ranked(persons);
        std::iota(ranked.begin(), ranked.end(), 0u);
        std::stable_sort(ranked.begin(), ranked.end(), [&](std::uint32_t a, std::uint32_t b) {
            return group.liability[a] > group.liability[b];
        });
        group.disease.assign(persons, 0);
        for (std::size_t i = 0; i < case_total; ++i) group.disease[ranked[i]] = 1;

        // Held-out test split with population prevalence; the rest is the training pool.
        std::vector<std::uint32_t> cases;
        std::vector<std::uint32_t> controls;
        for (std::uint32_t p = 0; p < persons; ++p) (group.disease[p] ? cases : controls).push_back(p);
        auto split_rng = make_rng({config.seed, 0x73706c74, gi});
        std::shuffle(cases.begin(), cases.end(), split_rng);
        std::shuffle(controls.begin(), controls.end(), split_rng);
        const auto test_cases = static_cast<std::size_t>(std::floor(config.holdout_fraction * static_cast<double>(cases.size())));
        const auto test_controls = std::min<std::size_t>(
            controls.size(),
            static_cast<std::size_t>(std::llround(static_cast<double>(test_cases) * (1.0 - config.prevalence) /
                                                  config.prevalence)));
        group.test.assign(cases.begin(), cases.begin() + static_cast<std::ptrdiff_t>(test_cases));
        group.test.insert(group.test.end(), controls.begin(),
                          controls.begin() + static_cast<std::ptrdiff_t>(test_controls));
        std::sort(group.test.begin(), group.test.end());
        group.train_cases.assign(cases.begin() + static_cast<std::ptrdiff_t>(test_cases), cases.end());
        group.train_controls.assign(controls.begin() + static_cast<std::ptrdiff_t>(test_controls), controls.end());
    }
    return world;
}

CaseControlSample draw_pairs(const GenomicWorld& world, std::size_t group, std::size_t pairs,
                             std::uint64_t seed) {
    if (group >= kGenomicGroups) throw PreconditionError("group index out of range");
    const GroupPopulation& pop = world.groups[group];
    if (pairs > pop.available_pairs()) {
        throw PreconditionError("requested " + std::to_string(pairs) + " case-control pairs but group " +
                                pop.label + " has only " + std::to_string(pop.available_pairs()) +
                                " training pairs available");
    }
    auto rng = make_rng({world.config.seed, 0x70616972, group, seed});
    std::vector<std::uint32_t> cases = pop.train_cases;
    std::vector<std::uint32_t> controls = pop.train_controls;
    std::shuffle(cases.begin(), cases.end(), rng);
    std::shuffle(controls.begin(), controls.end(), rng);
    CaseControlSample sample;
    sample.group = group;
    sample.cases.assign(cases.begin(), cases.begin() + static_cast<std::ptrdiff_t>(pairs));
    sample.controls.assign(controls.begin(), controls.begin() + static_cast<std::ptrdiff_t>(pairs));
    return sample;
}

AssociationResult association_test(double a, double b, double c, double d) {
    AssociationResult out;
    const double n = a + b + c + d;
    const double denom = (a + b) * (c + d) * (a + c) * (b + d);
    if (denom > 0.0) {
        const double diff = a * d - b * c;
        out.chi_squared = n * diff * diff / denom;
        out.p_value = std::erfc(std::sqrt(0.5 * out.chi_squared));
    }
    if (a == 0.0 || b == 0.0 || c == 0.0 || d == 0.0) {
        a += 0.5;
        b += 0.5;
        c += 0.5;
        d += 0.5;
    }
    out.log_odds_ratio = std::log(a) + std::log(d) - std::log(b) - std::log(c);
    return out;
}

double RiskModel::score(const GenotypeMatrix& genotypes, std::size_t person) const {
    double s = 0.0;
    for (std::size_t i = 0; i < variants.size(); ++i) {
        if (genotypes.get(person, variants[i])) s += log_odds_ratios[i];
    }
    return s;
}

double RiskModel::probability_from_score(double s) const {
    if (empty()) return prevalence;
    return 1.0 / (1.0 + std::exp(-(intercept + slope * s)));
}

double RiskModel::probability(const GenotypeMatrix& genotypes, std::size_t person) const {
    if (empty()) return prevalence;
    return probability_from_score(score(genotypes, person));
}

namespace {

// Column bitsets of the sample for the given variants; persons in sample order.
std::vector<std::vector<std::uint64_t>> sample_columns(const GenotypeMatrix& genotypes,
                                                       std::span<const std::uint32_t> persons,
                                                       std::span<const std::size_t> variants) {
    const std::size_t words = (persons.size() + 63) / 64;
    std::vector<std::vector<std::uint64_t>> cols(variants.size(), std::vector<std::uint64_t>(words, 0));
    for (std::size_t i = 0; i < persons.size(); ++i) {
        for (std::size_t v = 0; v < variants.size(); ++v) {
            if (genotypes.get(persons[i], variants[v])) cols[v][i / 64] |= std::uint64_t{1} << (i % 64);
        }
    }
    return cols;
}

double binary_correlation(const std::vector<std::uint64_t>& x, const std::vector<std::uint64_t>& y,
                          double n, double sx, double sy) {
    double sxy = 0.0;
    for (std::size_t w = 0; w < x.size(); ++w) sxy += std::popcount(x[w] & y[w]);
    const double vx = n * sx - sx * sx;
    const double vy = n * sy - sy * sy;
    if (!(vx > 0.0) || !(vy > 0.0)) return 0.0;
    return (n * sxy - sx * sy) / std::sqrt(vx * vy);
}

// Platt scaling with smoothed targets; Newton iterations on (intercept, slope).
void fit_platt(std::span<const double> scores, std::span<const std::uint8_t> labels, double& intercept,
               double& slope) {
    double positives = 0.0;
    for (auto y : labels) positives += y;
    const double negatives = static_cast<double>(labels.size()) - positives;
    const double hi = (positives + 1.0) / (positives + 2.0);
    const double lo = 1.0 / (negatives + 2.0);
    intercept = std::log((positives + 1.0) / (negatives + 1.0));
    slope = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const double t = labels[i] ? hi : lo;
            const double p = 1.0 / (1.0 + std::exp(-(intercept + slope * scores[i])));
            const double w = std::max(p * (1.0 - p), 1e-12);
            g0 += p - t;
            g1 += (p - t) * scores[i];
            h00 += w;
            h01 += w * scores[i];
            h11 += w * scores[i] * scores[i];
        }
        const double det = h00 * h11 - h01 * h01;
        if (!(std::abs(det) > 1e-300)) break;
        const double d0 = (h11 * g0 - h01 * g1) / det;
        const double d1 = (h00 * g1 - h01 * g0) / det;
        intercept -= d0;
        slope -= d1;
        if (std::abs(d0) + std::abs(d1) < 1e-10) break;
    }
}

}  // namespace

namespace {

struct Selection {
    std::vector<std::size_t> variants;
    std::vector<double> log_odds_ratios;
};

Selection screen_and_clump(const GenomicConfig& cfg, const GenotypeMatrix& geno,
                           std::span<const std::uint32_t> cases, std::span<const std::uint32_t> controls) {
    const std::size_t variants = cfg.variants;
    std::vector<double> case_carriers(variants, 0.0);
    std::vector<double> control_carriers(variants, 0.0);
    auto tally = [&](std::span<const std::uint32_t> persons, std::vector<double>& counts) {
        for (std::uint32_t p : persons) {
            const auto row = geno.row(p);
            for (std::size_t w = 0; w < row.size(); ++w) {
                std::uint64_t bits = row[w];
                while (bits != 0) {
                    counts[w * 64 + static_cast<std::size_t>(std::countr_zero(bits))] += 1.0;
                    bits &= bits - 1;
                }
            }
        }
    };
    tally(cases, case_carriers);
    tally(controls, control_carriers);

    const double n_cases = static_cast<double>(cases.size());
    const double n_controls = static_cast<double>(controls.size());
    const double total = n_cases + n_controls;

    struct Hit {
        std::size_t variant;
        double p_value;
        double log_or;
    };
    std::vector<Hit> hits;
    for (std::size_t v = 0; v < variants; ++v) {
        const double freq = (case_carriers[v] + control_carriers[v]) / total;
        if (!(std::min(freq, 1.0 - freq) > cfg.maf_floor)) continue;
        const AssociationResult r = association_test(case_carriers[v], n_cases - case_carriers[v],
                                                     control_carriers[v], n_controls - control_carriers[v]);
        if (r.p_value < cfg.pvalue_threshold) hits.push_back({v, r.p_value, r.log_odds_ratio});
    }
    Selection out;
    if (hits.empty()) return out;

    // Clumping: visit hits by significance, keep each survivor and drop the
    // correlated hits within the window.
    std::vector<std::uint32_t> persons(cases.begin(), cases.end());
    persons.insert(persons.end(), controls.begin(), controls.end());
    std::vector<std::size_t> hit_variants;
    for (const auto& h : hits) hit_variants.push_back(h.variant);
    const auto columns = sample_columns(geno, persons, hit_variants);
    std::vector<double> carriers(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        carriers[i] = case_carriers[hits[i].variant] + control_carriers[hits[i].variant];
    }

    std::vector<std::size_t> by_significance(hits.size());
    std::iota(by_significance.begin(), by_significance.end(), 0);
    std::stable_sort(by_significance.begin(), by_significance.end(),
                     [&](std::size_t a, std::size_t b) { return hits[a].p_value < hits[b].p_value; });
    std::vector<std::uint8_t> removed(hits.size(), 0);
    std::vector<std::uint8_t> kept(hits.size(), 0);
    const auto window = static_cast<long>(cfg.clump_window);
    for (std::size_t idx : by_significance) {
        if (removed[idx]) continue;
        kept[idx] = 1;
        for (std::size_t j = 0; j < hits.size(); ++j) {
            if (j == idx || removed[j] || kept[j]) continue;
            const long dist = static_cast<long>(hits[j].variant) - static_cast<long>(hits[idx].variant);
            if (std::abs(dist) > window) continue;
            const double r = binary_correlation(columns[idx], columns[j], total, carriers[idx], carriers[j]);
            if (std::abs(r) > cfg.r2_threshold) removed[j] = 1;
        }
    }
    for (std::size_t i = 0; i < hits.size(); ++i) {
        if (!kept[i]) continue;
        out.variants.push_back(hits[i].variant);
        out.log_odds_ratios.push_back(hits[i].log_or);
    }
    return out;
}

}  // namespace

RiskModel train_risk_model(const GenomicWorld& world, const CaseControlSample& sample) {
    if (sample.group >= kGenomicGroups) throw PreconditionError("group index out of range");
    if (sample.cases.empty() || sample.controls.empty()) {
        throw PreconditionError("training sample needs at least one case and one control");
    }
    const GenomicConfig& cfg = world.config;
    const GenotypeMatrix& geno = world.groups[sample.group].genotypes;

    // Discovery on the leading part of the sample, calibration on the rest.
    // Calibrating on the discovery pairs would inherit the winner's-curse
    // inflation of the selected odds ratios.
    auto discovery_size = [&](std::size_t n) {
        return n - static_cast<std::size_t>(std::floor(cfg.calibration_fraction * static_cast<double>(n)));
    };
    std::span<const std::uint32_t> cases(sample.cases);
    std::span<const std::uint32_t> controls(sample.controls);
    const std::size_t dc = discovery_size(cases.size());
    const std::size_t dn = discovery_size(controls.size());
    const bool split = dc > 0 && dn > 0 && dc < cases.size() && dn < controls.size();
    const auto disc_cases = split ? cases.first(dc) : cases;
    const auto disc_controls = split ? controls.first(dn) : controls;
    const auto cal_cases = split ? cases.subspan(dc) : cases;
    const auto cal_controls = split ? controls.subspan(dn) : controls;

    RiskModel model;
    model.prevalence = cfg.prevalence;
    Selection sel = screen_and_clump(cfg, geno, disc_cases, disc_controls);
    if (sel.variants.empty()) return model;
    model.variants = std::move(sel.variants);
    model.log_odds_ratios = std::move(sel.log_odds_ratios);

    std::vector<double> scores;
    std::vector<std::uint8_t> labels;
    for (std::uint32_t p : cal_cases) {
        scores.push_back(model.score(geno, p));
        labels.push_back(1);
    }
    for (std::uint32_t p : cal_controls) {
        scores.push_back(model.score(geno, p));
        labels.push_back(0);
    }
    double intercept = 0.0;
    double slope = 0.0;
    fit_platt(scores, labels, intercept, slope);
    // Training pairs over-represent cases; shift the intercept to the population prevalence.
    const double q = cfg.prevalence;
    const double q_sample = static_cast<double>(cal_cases.size()) / static_cast<double>(scores.size());
    model.intercept = intercept + std::log(q / (1.0 - q)) - std::log(q_sample / (1.0 - q_sample));
    model.slope = slope;
    return model;
}

double evaluate_group_value(const GenomicWorld& world, std::size_t group,
                            const std::function<double(std::uint32_t person)>& risk) {
    if (group >= kGenomicGroups) throw PreconditionError("group index out of range");
    const GroupPopulation& pop = world.groups[group];
    if (pop.test.empty()) throw PreconditionError("test split is empty");
    const GenomicConfig& cfg = world.config;
    double total = 0.0;
    for (std::uint32_t p : pop.test) {
        if (risk(p) > cfg.prevalence) total += pop.disease[p] ? cfg.benefit - cfg.cost : -cfg.cost;
    }
    return total / static_cast<double>(pop.test.size());
}

double evaluate_group_value(const GenomicWorld& world, const RiskModel& model, std::size_t group) {
    if (model.empty()) return evaluate_group_value(world, group, [&](std::uint32_t) { return model.prevalence; });
    const GenotypeMatrix& geno = world.groups.at(group).genotypes;
    return evaluate_group_value(world, group,
                                [&](std::uint32_t p) { return model.probability(geno, p); });
}

double liability_auc(const GenomicWorld& world, std::size_t group, std::span<const double> score) {
    const GroupPopulation& pop = world.groups.at(group);
    if (score.size() != pop.disease.size()) {
        throw DimensionError("score length does not match population", pop.disease.size(), score.size());
    }
    std::vector<std::size_t> order(score.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
    // Mann-Whitney U with average ranks for ties.
    double rank_sum = 0.0;
    double positives = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && score[order[j + 1]] == score[order[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (pop.disease[order[k]]) {
                rank_sum += avg_rank;
                positives += 1.0;
            }
        }
        i = j + 1;
    }
    const double negatives = static_cast<double>(order.size()) - positives;
    return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

AllocationCurve run_allocation_curve(const GenomicWorld& world, std::span<const std::size_t> grid,
                                     std::span<const std::uint64_t> seeds) {
    for (std::size_t g = 0; g < kGenomicGroups; ++g) {
        for (std::size_t n : grid) {
            if (n == 0 || n > world.groups[g].available_pairs()) {
                throw PreconditionError("grid point " + std::to_string(n) + " is outside the " +
                                        std::to_string(world.groups[g].available_pairs()) +
                                        " training pairs available in group " + world.groups[g].label);
            }
        }
    }
    AllocationCurve out;
    std::vector<std::size_t> sorted_grid(grid.begin(), grid.end());
    std::sort(sorted_grid.begin(), sorted_grid.end());
    std::vector<std::uint64_t> sorted_seeds(seeds.begin(), seeds.end());
    std::sort(sorted_seeds.begin(), sorted_seeds.end());
    for (std::size_t g = 0; g < kGenomicGroups; ++g) {
        for (std::size_t n : sorted_grid) {
            CurveSummary s{g, n, 0.0, 0.0};
            std::vector<double> values;
            for (std::uint64_t seed : sorted_seeds) {
                const RiskModel model = train_risk_model(world, draw_pairs(world, g, n, seed));
                const double v = evaluate_group_value(world, model, g);
                out.points.push_back({g, n, seed, v});
                values.push_back(v);
            }
            s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) var += (v - s.mean) * (v - s.mean);
            s.sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
            out.summary.push_back(s);
        }
    }
    return out;
}

GenomicEnvironment::GenomicEnvironment(const GenomicWorld& world, std::uint64_t seed)
    : world_(world), seed_(seed) {}

double GenomicEnvironment::group_value(std::size_t group, std::size_t pairs) {
    const auto key = std::make_pair(group, pairs);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const RiskModel model = train_risk_model(world_, draw_pairs(world_, group, pairs, seed_));
    ++trainings_;
    const double v = evaluate_group_value(world_, model, group);
    cache_.emplace(key, v);
    return v;
}

PerformanceVector GenomicEnvironment::observe(const Allocation& alloc) {
    if (alloc.size() != kGenomicGroups) {
        throw DimensionError("genomic environment has two groups", kGenomicGroups, alloc.size());
    }
    const auto pairs = realize_allocation(alloc, seed_ ^ (0x9e3779b97f4a7c15ULL * ++calls_));
    PerformanceVector out(kGenomicGroups);
    for (std::size_t g = 0; g < kGenomicGroups; ++g) {
        out[g] = group_value(g, static_cast<std::size_t>(pairs[g]));
    }
    return out;
}

}  // namespace equalloc
