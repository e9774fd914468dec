// Command-line front end: `gen` writes synthetic datasets, `fit` runs a
// single subsampled estimate, `bench` drives a full experiment spec.
//
// Exit codes: 0 on success, 2 for configuration/data problems (bad flags,
// bad spec, unreadable files), 3 when a requested single fit fails for
// statistical reasons (separation, singular hessian, empty acceptance set).
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "osmac/osmac.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitEstimation = 3;

struct GenArgs {
    std::string scenario;
    Eigen::Index n = 0;
    double param = 0.0;
    std::uint64_t seed = 42;
    std::string out;
    bool binary = false;
};

struct FitArgs {
    std::string data;
    std::string response = "y";
    std::optional<std::size_t> response_index;
    bool intercept = false;
    std::string method;
    Eigen::Index r0 = 200;
    Eigen::Index r = 800;
    std::string pilot = "uniform";
    std::string mx_source = "full";
    std::uint64_t seed = 42;
    double tol = osmac::SolverConfig{}.tol;
    int max_iter = osmac::SolverConfig{}.max_iter;
    std::string dump_ssp;
    std::string out;
};

struct BenchArgs {
    std::string spec_path;
    std::string out;
    std::string format;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw osmac::IoError("cannot open output file '" + path + "'");
    f << text;
    if (!f) throw osmac::IoError("failed writing '" + path + "'");
}

void dump_plan(const osmac::SamplingPlan& plan, const std::string& path) {
    std::string text = "index,pi\n";
    for (Eigen::Index i = 0; i < plan.pi.size(); ++i) {
        text += std::to_string(i);
        text += ',';
        text += osmac::detail::format_double(plan.pi[i]);
        text += '\n';
    }
    write_text(path, text);
}

int run_gen(const GenArgs& args) {
    const osmac::Scenario scn =
        osmac::Scenario::from_name(args.scenario, args.n, args.param);
    osmac::Rng rng(args.seed);
    const osmac::Dataset data = osmac::generate(scn, rng);
    if (args.binary)
        osmac::save_binary(data, args.out);
    else
        osmac::save_csv(data, args.out);
    std::cerr << "wrote " << data.n() << " rows x " << data.d() << " covariates to "
              << args.out << "\n";
    return kExitOk;
}

int run_fit(const FitArgs& args) {
    using namespace osmac;
    const ColumnRef response = args.response_index
                                   ? ColumnRef(*args.response_index)
                                   : ColumnRef(args.response);
    const Dataset data = load_csv(args.data, response, args.intercept);

    SolverConfig solver;
    solver.tol = args.tol;
    solver.max_iter = args.max_iter;
    if (args.r0 < 1 || args.r < 1) throw SpecError("need --r0 >= 1 and --r >= 1");

    nlohmann::ordered_json j;
    j["method"] = args.method;
    j["n"] = data.n();
    j["d"] = data.d();
    j["seed"] = args.seed;
    Rng rng(args.seed);
    std::optional<SamplingPlan> plan;

    if (args.method == "full") {
        if (!args.dump_ssp.empty())
            throw SpecError("--dump-ssp makes no sense with --method full");
        const FitResult fit = fit_full_mle(data, solver);
        const MxMatrix mx = compute_mx(data, fit.beta);
        const MatrixXd info_inv =
            (static_cast<double>(data.n()) * mx.m())
                .llt()
                .solve(MatrixXd::Identity(data.d(), data.d()));
        j["beta"] = detail::vector_json(fit.beta);
        j["se"] = detail::vector_json(info_inv.diagonal().cwiseMax(0.0).cwiseSqrt());
        j["iterations"] = fit.iterations;
        j["converged"] = fit.converged;
    } else if (args.method == "uniform") {
        // r0 + r rows so budgets line up with the two-step methods
        const SamplingPlan uplan = ssp_uniform(data.n());
        plan = uplan;
        const auto [fit, sub] =
            algorithm1_estimate(data, uplan, args.r0 + args.r, rng, solver);
        const VarianceEstimate var = estimate_variance(sub, data, fit.beta);
        j["r0"] = args.r0;
        j["r"] = args.r;
        j["beta"] = detail::vector_json(fit.beta);
        j["se"] = detail::vector_json(var.se);
        j["iterations"] = fit.iterations;
        j["converged"] = fit.converged;
    } else if (args.method == "mmse" || args.method == "mvc") {
        TwoStepConfig cfg;
        cfg.r0 = args.r0;
        cfg.r = args.r;
        cfg.criterion = args.method == "mmse" ? Criterion::MMSE : Criterion::MVc;
        cfg.solver = solver;
        if (args.pilot == "uniform") cfg.pilot_scheme = PilotScheme::Uniform;
        else if (args.pilot == "case_control") cfg.pilot_scheme = PilotScheme::CaseControl;
        else throw SpecError("unknown pilot scheme '" + args.pilot + "'");
        if (args.mx_source == "full") cfg.mx_source = MxSource::FullData;
        else if (args.mx_source == "pilot") cfg.mx_source = MxSource::PilotSubsample;
        else throw SpecError("unknown mx source '" + args.mx_source + "'");

        TwoStepInfo info;
        const auto [fit, var] = two_step_estimate(data, cfg, rng, &info, &plan);
        j["r0"] = args.r0;
        j["r"] = args.r;
        j["beta"] = detail::vector_json(fit.beta);
        j["se"] = detail::vector_json(var.se);
        j["pilot_iterations"] = info.pilot_iterations;
        j["iterations"] = fit.iterations;
        j["converged"] = fit.converged;
    } else if (args.method == "lcc") {
        Eigen::Index accepted = 0;
        const FitResult fit =
            lcc_estimate(data, args.r0, rng, solver, &accepted, &plan);
        j["r0"] = args.r0;
        j["accepted_rows"] = accepted;
        j["beta"] = detail::vector_json(fit.beta);
        j["iterations"] = fit.iterations;
        j["converged"] = fit.converged;
    } else {
        throw SpecError("unknown method '" + args.method + "'");
    }

    if (!args.dump_ssp.empty()) {
        if (!plan) throw SpecError("no sampling plan to dump for this method");
        dump_plan(*plan, args.dump_ssp);
    }
    write_text(args.out, j.dump(2) + "\n");
    return kExitOk;
}

int run_bench(const BenchArgs& args) {
    using namespace osmac;
    ExperimentSpec spec = load_spec(args.spec_path);
    if (args.seed) spec.seed = *args.seed;
    if (args.threads) spec.threads = *args.threads;
    spec.validate();

    std::string format = args.format;
    if (format.empty()) {
        const bool csv = args.out.size() >= 4 &&
                         args.out.compare(args.out.size() - 4, 4, ".csv") == 0;
        format = csv ? "csv" : "json";
    }
    if (format != "json" && format != "csv")
        throw SpecError("unknown report format '" + format + "'");

    const ExperimentReport report = run_experiment(spec);
    emit_report(report, format, args.out);
    std::cerr << "wrote " << report.cells.size() << " cells x " << report.reps
              << " reps to " << args.out << "\n";
    return kExitOk;
}

bool is_estimation_failure(const osmac::Error& e) {
    return dynamic_cast<const osmac::SeparationError*>(&e) ||
           dynamic_cast<const osmac::SingularHessianError*>(&e) ||
           dynamic_cast<const osmac::SingularMxError*>(&e) ||
           dynamic_cast<const osmac::SingularMxHatError*>(&e) ||
           dynamic_cast<const osmac::EmptyAcceptanceError*>(&e) ||
           dynamic_cast<const osmac::DegenerateClassesError*>(&e) ||
           dynamic_cast<const osmac::ZeroMassError*>(&e);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal subsampling for large-scale logistic regression"};
    app.require_subcommand(1);

    GenArgs gen;
    CLI::App* gen_cmd = app.add_subcommand("gen", "generate a synthetic dataset");
    gen_cmd->add_option("--scenario", gen.scenario, "scenario name")->required();
    gen_cmd->add_option("--n", gen.n, "number of rows")->required();
    gen_cmd->add_option("--param", gen.param,
                        "scenario parameter (mean shift or intercept)");
    gen_cmd->add_option("--seed", gen.seed, "rng seed");
    gen_cmd->add_option("--out", gen.out, "output path")->required();
    gen_cmd->add_flag("--binary", gen.binary, "write the binary cache format");

    FitArgs fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "run one subsampled fit");
    fit_cmd->add_option("--data", fit.data, "input csv")->required();
    fit_cmd->add_option("--response", fit.response, "response column name");
    std::size_t response_index = 0;
    CLI::Option* ri_opt =
        fit_cmd->add_option("--response-index", response_index,
                            "response column index (overrides --response)");
    fit_cmd->add_flag("--intercept", fit.intercept, "prepend an all-ones column");
    fit_cmd->add_option("--method", fit.method, "uniform|mmse|mvc|lcc|full")
        ->required();
    fit_cmd->add_option("--r0", fit.r0, "pilot subsample size");
    fit_cmd->add_option("--r", fit.r, "second-step subsample size");
    fit_cmd->add_option("--pilot", fit.pilot, "pilot scheme: uniform|case_control");
    fit_cmd->add_option("--mx-source", fit.mx_source,
                        "information matrix source for mmse: full|pilot");
    fit_cmd->add_option("--seed", fit.seed, "rng seed");
    fit_cmd->add_option("--tol", fit.tol, "solver tolerance");
    fit_cmd->add_option("--max-iter", fit.max_iter, "solver iteration cap");
    fit_cmd->add_option("--dump-ssp", fit.dump_ssp,
                        "write the sampling probabilities to this csv");
    fit_cmd->add_option("--out", fit.out, "result path (default stdout)");

    BenchArgs bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "run an experiment spec");
    bench_cmd->add_option("--spec", bench.spec_path, "experiment spec json")
        ->required();
    bench_cmd->add_option("--out", bench.out, "report path")->required();
    bench_cmd->add_option("--format", bench.format, "json|csv (default by extension)");
    std::uint64_t seed_override = 0;
    CLI::Option* seed_opt =
        bench_cmd->add_option("--seed", seed_override, "override the seed from the spec file");
    int threads_override = 1;
    CLI::Option* threads_opt =
        bench_cmd->add_option("--threads", threads_override,
                              "override the worker count from the spec file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (*ri_opt) fit.response_index = response_index;
    if (*seed_opt) bench.seed = seed_override;
    if (*threads_opt) bench.threads = threads_override;

    try {
        if (gen_cmd->parsed()) return run_gen(gen);
        if (fit_cmd->parsed()) return run_fit(fit);
        return run_bench(bench);
    } catch (const osmac::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        if (fit_cmd->parsed() && is_estimation_failure(e)) return kExitEstimation;
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
}
