#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "equalloc/errors.hpp"
#include "equalloc/harness.hpp"

namespace {

using namespace equalloc;

int exit_code(const std::exception& e) {
    if (dynamic_cast<const CapacityError*>(&e)) return 3;
    if (dynamic_cast<const DomainError*>(&e) || dynamic_cast<const NumericalError*>(&e)) return 4;
    return 2;
}

struct Common {
    std::string config;
    std::string out = "out";
    std::uint64_t seed_offset = 0;
};

struct GreedyFlags {
    std::string instance;
    std::optional<double> step;
    std::string start;
    std::string marginals;
    std::optional<std::uint64_t> seed;
    std::string trace_out;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"equalloc: budgeted sample allocation across groups"};
    app.require_subcommand(1);

    Common common;
    GreedyFlags gf;
    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* opt = sub->add_option("--config", common.config, "experiment config (JSON)");
        if (config_required) opt->required()->check(CLI::ExistingFile);
        sub->add_option("--out", common.out, "output directory")->capture_default_str();
        sub->add_option("--seed-offset", common.seed_offset, "added to every seed in the config");
    };

    for (const char* name : {"solve", "audit", "convergence", "frontier", "prs-sim"}) {
        add_common(app.add_subcommand(name), true);
    }
    add_common(app.add_subcommand("table1", "Table 1 instance; built-in defaults when --config is omitted"), false);
    auto* greedy = app.add_subcommand("greedy");
    add_common(greedy, false);
    greedy->add_option("--instance", gf.instance, "instance document (curve, cost, utility)");
    greedy->add_option("--step", gf.step, "spend per step");
    greedy->add_option("--start", gf.start, "start allocation file, or 'zero'");
    greedy->add_option("--marginals", gf.marginals, "true|estimated")->check(CLI::IsMember({"true", "estimated"}));
    greedy->add_option("--seed", gf.seed, "estimator and noise seed");
    greedy->add_option("--trace-out", gf.trace_out, "trace CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        CLI::App* sub = app.get_subcommands().front();
        const ExperimentKind kind = experiment_kind_from_string(sub->get_name());
        Json doc = common.config.empty() ? Json::object() : read_json_file(common.config);
        if (kind == ExperimentKind::greedy) {
            if (!gf.instance.empty()) doc["instance"] = read_json_file(gf.instance);
            if (gf.step) doc["step"] = *gf.step;
            if (!gf.start.empty()) doc["start"] = gf.start;
            if (!gf.marginals.empty()) doc["marginals"] = gf.marginals;
            if (gf.seed) doc["seed"] = *gf.seed;
            if (!gf.trace_out.empty()) doc["trace_out"] = gf.trace_out;
            if (!doc.contains("instance") && !doc.contains("curve")) {
                throw ConfigError("greedy needs --instance or a config with a curve block");
            }
        }
        const ExperimentConfig config = load_experiment(kind, std::move(doc), common.out, common.seed_offset);
        const ExperimentOutput out = run_experiment(config);
        for (const auto& f : out.files) std::cout << f.string() << '\n';
        std::cout << (std::filesystem::path(common.out) / "manifest.json").string() << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "equalloc: " << e.what() << '\n';
        return exit_code(e);
    }
}
