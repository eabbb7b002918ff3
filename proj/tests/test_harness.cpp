#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <sys/wait.h>

#include "equalloc/errors.hpp"
#include "equalloc/harness.hpp"

using namespace equalloc;
namespace fs = std::filesystem;

namespace {

const char* kCurve = R"({"form": "sqrt", "gamma": [[1.0, 0.3, 0.3, 0.3], [0.3, 0.5, 0.3, 0.3],
                          [0.3, 0.3, 1.0, 0.3], [0.3, 0.3, 0.3, 1.0]]})";

Json audit_doc() {
    Json d;
    d["experiment"] = "audit";
    d["curve"] = Json::parse(kCurve);
    d["cost"] = {{"costs", {1, 1, 2, 1}}, {"budget", 1000}};
    d["auditor"] = {{"weights", {1, 1, 1, 1}}, {"normalize", true}};
    d["observed"] = {{"counts", {200, 200, 200, 200}}};
    d["grid_resolution"] = 5;
    return d;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("equalloc_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(EQUALLOC_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("experiment names") {
    CHECK(experiment_kind_from_string("prs-sim") == ExperimentKind::adaptive_prs);
    CHECK(experiment_kind_from_string("table1") == ExperimentKind::table1);
    CHECK(to_string(ExperimentKind::frontier) == "frontier");
    CHECK_THROWS_AS(experiment_kind_from_string("bogus"), ConfigError);
}

TEST_CASE("format_number and csv rendering") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(200.0) == "200");
    CHECK(format_number(-2.5e-10) == "-2.5e-10");
    CHECK(format_number(std::numeric_limits<double>::quiet_NaN()) == "nan");
    Table t;
    t.columns = {"a", "b"};
    t.add_row({"1", "x"});
    CHECK_THROWS(t.add_row({"1"}));
    CHECK(render_csv(t, "abc") == "a,b\n# config_digest: abc\n1,x\n");
}

TEST_CASE("config digest is canonical") {
    const Json a = Json::parse(R"({"b": 1, "a": [1, 2]})");
    const Json b = Json::parse(R"({"a": [1, 2], "b": 1})");
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a).size() == 64);
    CHECK(config_digest(a) != config_digest(Json::parse(R"({"a": [1, 2], "b": 2})")));
}

TEST_CASE("instance documents") {
    Json d = audit_doc();
    const Instance inst = instance_from_json(d);
    CHECK(inst.curve.size() == 4);
    CHECK_FALSE(inst.utility.has_value());
    d["cost"]["costs"] = {1, 1};
    CHECK_THROWS_AS(instance_from_json(d), ConfigError);
    CHECK_THROWS_AS(instance_from_json(Json::parse(R"({"cost": {"costs": [1], "budget": 1}})")), ConfigError);
}

TEST_CASE("load_experiment: kind check, seed offset and digest") {
    CHECK_THROWS_AS(load_experiment(ExperimentKind::table1, audit_doc(), "x"), ConfigError);
    Json d = audit_doc();
    d["seed"] = 3;
    const auto plain = load_experiment(ExperimentKind::audit, d, "x");
    const auto shifted = load_experiment(ExperimentKind::audit, d, "x", 10);
    CHECK(plain.seeds == std::vector<std::uint64_t>{3});
    CHECK(shifted.seeds == std::vector<std::uint64_t>{13});
    CHECK(plain.digest != shifted.digest);
    CHECK(plain.digest == load_experiment(ExperimentKind::audit, d, "y").digest);

    Json p = Json::parse(R"({"world": {"population": 2000, "variants": 50, "causal_count": 5}, "grid": [10], "seeds": 3})");
    const auto prs = load_experiment(ExperimentKind::adaptive_prs, p, "x", 100);
    CHECK(prs.seeds == std::vector<std::uint64_t>{100, 101, 102});
    Json bad = audit_doc();
    bad["auditor"]["weights"] = {1, 1};
    CHECK_THROWS(load_experiment(ExperimentKind::audit, bad, "x"));
}

TEST_CASE("table1: defaults and document overrides") {
    const auto d = table1_defaults();
    CHECK(d.curve.size() == 4);
    CHECK(d.cost.budget == 1000);
    CHECK(d.priority_utility.weights[3] == 1.5);
    CHECK(d.representative_shares == std::vector<double>{2, 2, 2, 1});
    const auto c = table1_from_json(Json::parse(R"({"step": 5, "grid_resolution": 10})"));
    CHECK(c.step == 5);
    CHECK(c.grid_resolution == 10);
    CHECK(c.curve.gamma(1, 1) == 0.5);
}

TEST_CASE("table1: coarse run keeps the row order and the optimal rows dominate") {
    auto c = table1_defaults();
    c.grid_resolution = 10;
    c.step = 10;
    const auto r = run_table1(c);
    REQUIRE(r.rows.size() == 7);
    CHECK(r.rows[0].policy == "Equal");
    CHECK(r.rows[6].policy == "Greedy (U_priority)");
    const double best_eq = r.row("Optimal (U_equal)").u_equal;
    const double best_pri = r.row("Optimal (U_priority)").u_priority;
    for (const auto& row : r.rows) {
        CHECK(row.u_equal <= best_eq + 1e-9);
        CHECK(row.u_priority <= best_pri + 1e-9);
    }
    CHECK_THROWS(r.row("nope"));
    const Table t = table1_table(r);
    CHECK(t.rows.size() == 7);
}

TEST_CASE("convergence: deterministic regardless of worker count") {
    ConvergenceConfig c;
    c.instances = 6;
    c.k_max = 4;
    c.workers = 1;
    const auto one = run_convergence(c);
    c.workers = 3;
    const auto three = run_convergence(c);
    CHECK(render_csv(convergence_records_table(one), "") == render_csv(convergence_records_table(three), ""));
    CHECK(one.records.size() == 6 * 2 * 3);
    CHECK(one.summary.size() == 6);
    CHECK(one.max_oracle_disagreement < 1e-3);
    const auto a = convergence_instance(c, CurveForm::log1p, 4);
    const auto b = convergence_instance(c, CurveForm::log1p, 4);
    CHECK(a.curve.gamma_row_major().size() == b.curve.gamma_row_major().size());
    CHECK(std::equal(a.curve.gamma_row_major().begin(), a.curve.gamma_row_major().end(),
                     b.curve.gamma_row_major().begin()));
    CHECK(a.curve.size() >= 2);
    CHECK(a.curve.size() <= 4);
}

TEST_CASE("run_experiment: audit output and byte-identical reruns") {
    const auto dir1 = scratch("audit1");
    const auto dir2 = scratch("audit2");
    const auto out1 = run_experiment(load_experiment(ExperimentKind::audit, audit_doc(), dir1));
    run_experiment(load_experiment(ExperimentKind::audit, audit_doc(), dir2));
    REQUIRE(fs::exists(dir1 / "audit.csv"));
    REQUIRE(fs::exists(dir1 / "manifest.json"));
    const std::string csv = slurp(dir1 / "audit.csv");
    CHECK(csv == slurp(dir2 / "audit.csv"));
    CHECK(csv.find("# config_digest: ") != std::string::npos);
    const Json manifest = Json::parse(slurp(dir1 / "manifest.json"));
    CHECK(manifest.at("experiment") == "audit");
    CHECK(manifest.at("config_digest").get<std::string>().size() == 64);
    REQUIRE(out1.runs.size() >= 1);
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("run_experiment: greedy trace columns") {
    const auto dir = scratch("greedy");
    Json d;
    d["instance"] = {{"curve", Json::parse(kCurve)}, {"cost", {{"costs", {1, 1, 2, 1}}, {"budget", 100}}}};
    d["step"] = 10;
    run_experiment(load_experiment(ExperimentKind::greedy, d, dir));
    const std::string csv = slurp(dir / "trace.csv");
    const std::string header = csv.substr(0, csv.find('\n'));
    CHECK(header ==
          "step,group,spend,n_1,n_2,n_3,n_4,marginal_est_1,marginal_est_2,marginal_est_3,marginal_est_4,"
          "marginal_true_1,marginal_true_2,marginal_true_3,marginal_true_4,utility");
    std::size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    CHECK(lines == 2 + 10);
    fs::remove_all(dir);
}

TEST_CASE("cli: exit codes") {
    const auto dir = scratch("cli");
    fs::create_directories(dir);
    auto write = [&](const std::string& name, const Json& j) {
        std::ofstream(dir / name) << j.dump();
        return (dir / name).string();
    };
    const std::string out = " --out " + (dir / "out").string();

    CHECK(run_cli("audit --config " + write("ok.json", audit_doc()) + out) == 0);

    Json bad = audit_doc();
    bad["cost"]["budget"] = -1;
    CHECK(run_cli("audit --config " + write("bad.json", bad) + out) == 2);

    Json big;
    big["curve"] = {{"gamma", Json::array()}, {"form", "sqrt"}};
    for (int i = 0; i < 25; ++i) big["curve"]["gamma"].push_back(i % 6 == 0 ? 1.0 : 0.1);
    big["cost"] = {{"costs", {1, 1, 1, 1, 1}}, {"budget", 10}};
    big["utility"] = {{"weights", {1, 1, 1, 1, 1}}};
    big["method"] = "grid";
    CHECK(run_cli("solve --config " + write("big.json", big) + out) == 3);

    Json dom = audit_doc();
    dom["auditor"]["transform"] = "log";
    dom["observed"]["counts"] = {0, 0, 0, 0};
    CHECK(run_cli("audit --config " + write("dom.json", dom) + out) == 4);

    CHECK(run_cli("table1 --config " + write("wrong.json", audit_doc()) + out) == 2);
    fs::remove_all(dir);
}
