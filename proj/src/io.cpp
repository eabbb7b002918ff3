#include "equalloc/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "equalloc/errors.hpp"

namespace equalloc {

namespace {

template <class T>
T get_field(const Json& doc, const char* key) {
    if (!doc.is_object() || !doc.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("field '") + key + "': " + e.what());
    }
}

template <class T>
T get_field_or(const Json& doc, const char* key, T fallback) {
    if (!doc.is_object() || !doc.contains(key)) return fallback;
    return get_field<T>(doc, key);
}

// Wraps domain validation failures raised while building objects from a document.
template <class F>
auto build(const char* what, F&& make) {
    try {
        return make();
    } catch (const ConfigError&) {
        throw;
    } catch (const PreconditionError& e) {
        throw ConfigError(std::string(what) + ": " + e.what());
    }
}

}  // namespace

Json to_json(const Allocation& alloc) {
    return Json{{"counts", std::vector<double>(alloc.counts().begin(), alloc.counts().end())}};
}

Json to_json(const CostModel& cost) { return Json{{"costs", cost.costs}, {"budget", cost.budget}}; }

Json to_json(const UtilitySpec& utility) {
    return Json{{"weights", utility.weights},
                {"parity_penalty", utility.parity_penalty},
                {"transform", utility.transform == Transform::log ? "log" : "identity"},
                {"normalize", utility.normalize}};
}

Json to_json(const AnalyticCurve& curve) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < curve.size(); ++r) {
        Json row = Json::array();
        for (std::size_t c = 0; c < curve.size(); ++c) row.push_back(curve.gamma(r, c));
        rows.push_back(row);
    }
    return Json{{"gamma", rows},
                {"form", to_string(curve.form())},
                {"power_exponent", curve.power_exponent()},
                {"offset", curve.offset()}};
}

Json to_json(const EstimatorConfig& e) {
    return Json{{"window", e.window}, {"se_floor", e.se_floor}, {"min_points", e.min_points}};
}

Json to_json(const GenomicConfig& w) {
    return Json{{"variants", w.variants},
                {"causal_count", w.causal_count},
                {"heritability", w.heritability},
                {"prevalence", w.prevalence},
                {"population", w.population},
                {"benefit", w.benefit},
                {"cost", w.cost},
                {"clump_window", w.clump_window},
                {"pvalue_threshold", w.pvalue_threshold},
                {"maf_floor", w.maf_floor},
                {"r2_threshold", w.r2_threshold},
                {"ld_rho", w.ld_rho},
                {"fst", w.fst},
                {"holdout_fraction", w.holdout_fraction},
                {"calibration_fraction", w.calibration_fraction},
                {"seed", w.seed}};
}

Json to_json(const SolveResult& r) {
    return Json{{"counts", std::vector<double>(r.alloc.counts().begin(), r.alloc.counts().end())},
                {"utility", r.utility},
                {"method", std::string(to_string(r.method))},
                {"iterations", r.iterations},
                {"converged", r.converged}};
}

Allocation allocation_from_json(const Json& doc) {
    const auto counts = doc.is_array() ? build("counts", [&] { return doc.get<std::vector<double>>(); })
                                       : get_field<std::vector<double>>(doc, "counts");
    return build("counts", [&] { return Allocation(counts); });
}

CostModel cost_from_json(const Json& doc) {
    const auto costs = get_field<std::vector<double>>(doc, "costs");
    const auto budget = get_field<double>(doc, "budget");
    return build("cost", [&] { return CostModel(costs, budget); });
}

UtilitySpec utility_from_json(const Json& doc) {
    const auto weights = get_field<std::vector<double>>(doc, "weights");
    const auto penalty = get_field_or<double>(doc, "parity_penalty", 0.0);
    const auto transform = get_field_or<std::string>(doc, "transform", "identity");
    const auto normalize = get_field_or<bool>(doc, "normalize", false);
    Transform t = Transform::identity;
    if (transform == "log") {
        t = Transform::log;
    } else if (transform != "identity") {
        throw ConfigError("field 'transform': expected \"identity\" or \"log\", got \"" + transform + "\"");
    }
    return build("utility", [&] { return UtilitySpec(weights, penalty, t, normalize); });
}

std::string to_string(CurveForm form) {
    switch (form) {
        case CurveForm::sqrt: return "sqrt";
        case CurveForm::log1p: return "log1p";
        case CurveForm::power: return "power";
    }
    return "sqrt";
}

CurveForm curve_form_from_string(const std::string& name) {
    if (name == "sqrt") return CurveForm::sqrt;
    if (name == "log1p") return CurveForm::log1p;
    if (name == "power") return CurveForm::power;
    throw ConfigError("field 'form': expected \"sqrt\", \"log1p\" or \"power\", got \"" + name + "\"");
}

AnalyticCurve curve_from_json(const Json& doc) {
    if (!doc.is_object() || !doc.contains("gamma")) throw ConfigError("missing field 'gamma'");
    const Json& g = doc.at("gamma");
    std::vector<double> flat;
    std::size_t groups = 0;
    if (!g.is_array() || g.empty()) throw ConfigError("field 'gamma' must be a non-empty array");
    if (g.front().is_array()) {
        groups = g.size();
        for (const auto& row : g) {
            if (!row.is_array() || row.size() != groups) {
                throw ConfigError("field 'gamma' must be a square matrix");
            }
            for (const auto& x : row) {
                if (!x.is_number()) throw ConfigError("field 'gamma' has a non-numeric entry");
                flat.push_back(x.get<double>());
            }
        }
    } else {
        flat = get_field<std::vector<double>>(doc, "gamma");
        groups = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(flat.size()))));
        if (groups * groups != flat.size()) throw ConfigError("field 'gamma' length is not a perfect square");
    }
    const CurveForm form = curve_form_from_string(get_field_or<std::string>(doc, "form", "sqrt"));
    const double p = get_field_or<double>(doc, "power_exponent", 0.5);
    const double offset = get_field_or<double>(doc, "offset", 0.0);
    return build("curve", [&] { return AnalyticCurve(flat, groups, form, p, offset); });
}

EstimatorConfig estimator_from_json(const Json& doc) {
    EstimatorConfig e;
    e.window = get_field_or<std::size_t>(doc, "window", e.window);
    e.se_floor = get_field_or<double>(doc, "se_floor", e.se_floor);
    e.min_points = get_field_or<std::size_t>(doc, "min_points", e.min_points);
    if (e.window < 2) throw ConfigError("field 'window' must be at least 2");
    if (!(e.se_floor >= 0.0)) throw ConfigError("field 'se_floor' must be non-negative");
    return e;
}

GenomicConfig genomic_from_json(const Json& doc) {
    GenomicConfig w;
    w.variants = get_field_or(doc, "variants", w.variants);
    w.causal_count = get_field_or(doc, "causal_count", w.causal_count);
    w.heritability = get_field_or(doc, "heritability", w.heritability);
    w.prevalence = get_field_or(doc, "prevalence", w.prevalence);
    w.population = get_field_or(doc, "population", w.population);
    w.benefit = get_field_or(doc, "benefit", w.benefit);
    w.cost = get_field_or(doc, "cost", w.cost);
    w.clump_window = get_field_or(doc, "clump_window", w.clump_window);
    w.pvalue_threshold = get_field_or(doc, "pvalue_threshold", w.pvalue_threshold);
    w.maf_floor = get_field_or(doc, "maf_floor", w.maf_floor);
    w.r2_threshold = get_field_or(doc, "r2_threshold", w.r2_threshold);
    w.ld_rho = get_field_or(doc, "ld_rho", w.ld_rho);
    w.fst = get_field_or(doc, "fst", w.fst);
    w.holdout_fraction = get_field_or(doc, "holdout_fraction", w.holdout_fraction);
    w.calibration_fraction = get_field_or(doc, "calibration_fraction", w.calibration_fraction);
    w.seed = get_field_or(doc, "seed", w.seed);
    build("world", [&] {
        validate(w);
        return 0;
    });
    return w;
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

std::string config_digest(const Json& config) {
    const std::string canonical = config.dump();
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(canonical.data(), canonical.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

void Table::add_row(std::vector<std::string> row) {
    if (row.size() != columns.size()) {
        throw DimensionError("table row width does not match header", columns.size(), row.size());
    }
    rows.push_back(std::move(row));
}

std::string render_csv(const Table& table, const std::string& digest) {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    };
    line(table.columns);
    out << "# config_digest: " << digest << '\n';
    for (const auto& row : table.rows) line(row);
    return out.str();
}

void write_csv(const std::filesystem::path& path, const Table& table, const std::string& digest) {
    write_text_file(path, render_csv(table, digest));
}

}  // namespace equalloc
