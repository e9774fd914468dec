#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "osmac/bench.hpp"

using namespace osmac;
using nlohmann::json;

namespace {

struct TmpFile {
    std::string path;
    explicit TmpFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TmpFile() { std::remove(path.c_str()); }
};

ExperimentSpec tiny_spec() {
    ExperimentSpec spec;
    spec.source.scenario = Scenario::mz_normal(1500);
    spec.source.label = "mzNormal";
    spec.methods = {Method::Uniform, Method::MVc, Method::Full};
    spec.r0 = 100;
    spec.r_grid = {150};
    spec.reps = 4;
    spec.seed = 7;
    spec.metrics.mse = true;
    spec.metrics.est_mse = true;
    return spec;
}

}  // namespace

TEST_CASE("experiment spec parses from json") {
    const json j = json::parse(R"({
        "source": {"scenario": "nzNormal", "n": 5000},
        "methods": ["uniform", "mmse", "mvc", "lcc", "full", "bootstrap_full"],
        "r0": 250,
        "r_grid": [300, 500],
        "reps": 12,
        "seed": 99,
        "metrics": ["mse", "est_mse", "coverage", "accuracy", "auc", "timing"],
        "mse_mode": "unconditional",
        "pilot": "case_control",
        "validation": {"fraction": 0.25},
        "coverage_index": 2,
        "threads": 3,
        "solver": {"tol": 1e-6, "max_iter": 40}
    })");
    const ExperimentSpec spec = parse_spec(j);
    REQUIRE(spec.source.scenario.has_value());
    REQUIRE(spec.source.scenario->kind == Scenario::Kind::NzNormal);
    REQUIRE(spec.source.scenario->n == 5000);
    REQUIRE(spec.methods.size() == 6);
    REQUIRE(spec.methods[1] == Method::MMSE);
    REQUIRE(spec.r0 == 250);
    REQUIRE(spec.r_grid == std::vector<Eigen::Index>{300, 500});
    REQUIRE(spec.reps == 12);
    REQUIRE(spec.seed == 99);
    REQUIRE(spec.metrics.mse);
    REQUIRE(spec.metrics.timing);
    REQUIRE(spec.mse_mode == MseMode::Unconditional);
    REQUIRE(spec.pilot == PilotScheme::CaseControl);
    REQUIRE(spec.validation.fraction == 0.25);
    REQUIRE(spec.coverage_index == 2);
    REQUIRE(spec.threads == 3);
    REQUIRE(spec.solver.tol == 1e-6);
    REQUIRE(spec.solver.max_iter == 40);
}

TEST_CASE("csv sources parse with response selection") {
    const json j = json::parse(R"({
        "source": {"csv": "data.csv", "response": 0, "intercept": true},
        "methods": ["full"]
    })");
    const ExperimentSpec spec = parse_spec(j);
    REQUIRE_FALSE(spec.source.scenario.has_value());
    REQUIRE(spec.source.csv_path == "data.csv");
    REQUIRE(std::holds_alternative<std::size_t>(spec.source.response));
    REQUIRE(spec.source.intercept);
}

TEST_CASE("bad specs are rejected with a spec error") {
    const auto reject = [](const char* text) {
        REQUIRE_THROWS_AS(parse_spec(json::parse(text)), SpecError);
    };
    reject(R"({"methods": ["full"]})");                                // no source
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}})");        // no methods
    reject(R"({"source": {}, "methods": ["full"]})");                  // empty source
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["typo"]})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["full"],
               "metrics": ["typo"]})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["full"],
               "mse_mode": "typo"})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["full"],
               "pilot": "typo"})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["full"],
               "reps": 0})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["uniform"]})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["uniform"],
               "r_grid": [0]})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["mmse"],
               "allocation": {"total": 1, "fractions": [0.5]}})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["mmse"],
               "allocation": {"total": 100, "fractions": [1.5]}})");
    reject(R"({"source": {"csv": "x.csv"}, "methods": ["full"],
               "mse_mode": "unconditional"})");
    reject(R"({"source": {"csv": "x.csv"}, "methods": ["full"],
               "metrics": ["coverage"]})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["full"],
               "validation": {"fraction": 0.2, "csv": "v.csv"}})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": ["full"],
               "validation": {"fraction": 1.5}})");
    reject(R"({"source": {"scenario": "mzNormal", "n": 10}, "methods": [42]})");
    reject(R"({"source": {"scenario": "bogus", "n": 10}, "methods": ["full"]})");
}

TEST_CASE("a small experiment produces a fully populated report") {
    const ExperimentSpec spec = tiny_spec();
    const ExperimentReport report = run_experiment(spec);
    REQUIRE(report.n == 1500);
    REQUIRE(report.d == 7);
    REQUIRE(report.reps == 4);
    REQUIRE(report.beta_true.has_value());
    REQUIRE(report.full.converged);
    REQUIRE(report.full.se.size() == 7);
    REQUIRE(report.cells.size() == 3);

    const CellReport& uniform = report.cells[0];
    REQUIRE(uniform.method == Method::Uniform);
    REQUIRE(uniform.r0 == 100);
    REQUIRE(uniform.r == 150);
    REQUIRE(uniform.failures == 0);
    REQUIRE(std::isfinite(uniform.mse));
    REQUIRE(uniform.mse > 0.0);
    REQUIRE(std::isfinite(uniform.est_mse));
    REQUIRE(uniform.rows_mean == 250.0);

    const CellReport& full = report.cells[2];
    REQUIRE(full.method == Method::Full);
    // conditional target is the full-data fit itself
    REQUIRE(full.mse == 0.0);
    REQUIRE(full.rows_mean == 1500.0);
}

TEST_CASE("identical specs give byte-identical reports") {
    const ExperimentSpec spec = tiny_spec();
    const std::string a = report_to_json(run_experiment(spec)).dump(2);
    const std::string b = report_to_json(run_experiment(spec)).dump(2);
    REQUIRE(a == b);

    ExperimentSpec threaded = spec;
    threaded.threads = 2;
    const std::string c = report_to_json(run_experiment(threaded)).dump(2);
    REQUIRE(a == c);
}

TEST_CASE("timing keys appear only when requested") {
    ExperimentSpec spec = tiny_spec();
    spec.reps = 2;
    const json without = report_to_json(run_experiment(spec));
    REQUIRE_FALSE(without["cells"][0].contains("timing"));

    spec.metrics.timing = true;
    const json with = report_to_json(run_experiment(spec));
    REQUIRE(with["cells"][0].contains("timing"));
    REQUIRE(with["cells"][0]["timing"]["mean_seconds"].get<double>() > 0.0);
    // two-step phases are only reported for the two-step methods
    REQUIRE(with["cells"][1]["timing"]["ssp_seconds"].get<double>() > 0.0);
    REQUIRE(with["cells"][0]["timing"]["ssp_seconds"].is_null());
}

TEST_CASE("unconditional coverage stays inside the unit interval") {
    ExperimentSpec spec;
    spec.source.scenario = Scenario::mz_normal(1200);
    spec.source.label = "mzNormal";
    spec.methods = {Method::MVc};
    spec.r0 = 100;
    spec.r_grid = {200};
    spec.reps = 30;
    spec.seed = 5;
    spec.mse_mode = MseMode::Unconditional;
    spec.metrics = MetricSet{.mse = true, .coverage = true};
    const ExperimentReport report = run_experiment(spec);
    REQUIRE(report.cells.size() == 1);
    REQUIRE(std::isfinite(report.cells[0].coverage));
    REQUIRE(report.cells[0].coverage >= 0.5);
    REQUIRE(report.cells[0].coverage <= 1.0);
}

TEST_CASE("allocation sweeps add one cell per fraction") {
    ExperimentSpec spec;
    spec.source.scenario = Scenario::mz_normal(1500);
    spec.source.label = "mzNormal";
    spec.methods = {Method::MMSE};
    spec.allocation_total = 300;
    spec.allocation_fractions = {0.2, 0.5};
    spec.reps = 3;
    spec.seed = 21;
    const ExperimentReport report = run_experiment(spec);
    REQUIRE(report.cells.size() == 2);
    REQUIRE(report.cells[0].r0 == 60);
    REQUIRE(report.cells[0].r == 240);
    REQUIRE(report.cells[0].fraction == 0.2);
    REQUIRE(report.cells[1].r0 == 150);
    REQUIRE(report.cells[1].r == 150);
    for (const CellReport& c : report.cells) REQUIRE(c.r0 + c.r == 300);
}

TEST_CASE("validation holdout comes off the tail of a csv source") {
    TmpFile tmp("osmac_bench_holdout.csv");
    {
        Rng rng(31);
        RowMatrixXd x(60, 2);
        VectorXd y(60);
        for (Eigen::Index i = 0; i < 60; ++i) {
            x(i, 0) = rng.standard_normal();
            x(i, 1) = rng.standard_normal();
            y[i] = rng.uniform01() < sigmoid(x.row(i).sum()) ? 1.0 : 0.0;
        }
        save_csv(Dataset(x, y), tmp.path);
    }
    ExperimentSpec spec;
    spec.source.csv_path = tmp.path;
    spec.source.label = "csv";
    spec.methods = {Method::Full};
    spec.reps = 1;
    spec.validation.fraction = 0.25;
    spec.metrics = MetricSet{.mse = true, .accuracy = true};
    const ExperimentReport report = run_experiment(spec);
    REQUIRE(report.n == 45);  // 15 rows held out
    REQUIRE(std::isfinite(report.full.accuracy));
    REQUIRE(report.full.accuracy >= 0.0);
    REQUIRE(report.full.accuracy <= 1.0);
    REQUIRE(std::isfinite(report.cells[0].accuracy));
}

TEST_CASE("csv rendering has a header and one line per cell") {
    const ExperimentReport report = run_experiment(tiny_spec());
    const std::string csv = report_to_csv(report);
    std::size_t lines = 0;
    for (char ch : csv) lines += ch == '\n';
    REQUIRE(lines == 1 + report.cells.size());
    REQUIRE(csv.rfind("method,r0,r,fraction,reps,failures,", 0) == 0);
}

TEST_CASE("reports can be written to disk in both formats") {
    const ExperimentReport report = run_experiment(tiny_spec());
    TmpFile jf("osmac_report.json"), cf("osmac_report.csv");
    emit_report(report, "json", jf.path);
    emit_report(report, "csv", cf.path);

    std::ifstream jin(jf.path);
    json parsed;
    jin >> parsed;
    REQUIRE(parsed["schema"] == "osmac-report-v1");
    REQUIRE(parsed["cells"].size() == 3);

    std::ifstream cin_(cf.path);
    std::string header;
    std::getline(cin_, header);
    REQUIRE(header.rfind("method,", 0) == 0);

    REQUIRE_THROWS_AS(emit_report(report, "yaml", jf.path), Error);
}

TEST_CASE("bootstrap of the full fit is stable on balanced data") {
    Rng gen(41);
    RowMatrixXd x(300, 2);
    VectorXd y(300);
    for (Eigen::Index i = 0; i < 300; ++i) {
        x(i, 0) = gen.standard_normal();
        x(i, 1) = gen.standard_normal();
        y[i] = gen.uniform01() < sigmoid(0.5 * x.row(i).sum()) ? 1.0 : 0.0;
    }
    const Dataset data(x, y);
    const FitResult full = fit_full_mle(data);
    Rng rng(42);
    const BootstrapSummary boot = run_bootstrap_full(data, full.beta, 50, rng);
    REQUIRE(boot.reps == 50);
    REQUIRE(boot.failures == 0);
    REQUIRE(boot.mse > 0.0);
    REQUIRE(boot.mse < 1.0);

    Rng rng2(42);
    const BootstrapSummary again = run_bootstrap_full(data, full.beta, 50, rng2);
    REQUIRE(again.mse == boot.mse);
}
