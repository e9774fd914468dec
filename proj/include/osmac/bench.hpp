#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <json.hpp>

#include "osmac/dataset.hpp"
#include "osmac/errors.hpp"
#include "osmac/estimators.hpp"
#include "osmac/glm.hpp"
#include "osmac/rng.hpp"
#include "osmac/sampling.hpp"
#include "osmac/ssp.hpp"
#include "osmac/synth.hpp"
#include "osmac/types.hpp"

namespace osmac {

enum class Method { Uniform, MMSE, MVc, LCC, Full, BootstrapFull };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::Uniform: return "uniform";
        case Method::MMSE: return "mmse";
        case Method::MVc: return "mvc";
        case Method::LCC: return "lcc";
        case Method::Full: return "full";
        case Method::BootstrapFull: return "bootstrap_full";
    }
    return "?";
}

inline Method method_from_name(const std::string& name) {
    if (name == "uniform") return Method::Uniform;
    if (name == "mmse") return Method::MMSE;
    if (name == "mvc") return Method::MVc;
    if (name == "lcc") return Method::LCC;
    if (name == "full") return Method::Full;
    if (name == "bootstrap_full") return Method::BootstrapFull;
    throw SpecError("unknown method '" + name + "'");
}

/// Conditional: one fixed dataset, errors measured against its full-data MLE.
/// Unconditional: fresh dataset every repetition, errors against beta_true.
enum class MseMode { Conditional, Unconditional };

struct MetricSet {
    bool mse = false;
    bool est_mse = false;
    bool coverage = false;
    bool accuracy = false;
    bool auc = false;
    bool timing = false;

    bool wants_variance() const { return est_mse || coverage; }
};

struct SourceSpec {
    std::optional<Scenario> scenario;
    std::string csv_path;
    ColumnRef response = std::string("y");
    bool intercept = false;
    std::string label;
};

struct ValidationSpec {
    double fraction = 0.0;
    std::string csv_path;

    bool any() const { return fraction > 0.0 || !csv_path.empty(); }
};

struct ExperimentSpec {
    SourceSpec source;
    std::vector<Method> methods;
    Eigen::Index r0 = 200;
    std::vector<Eigen::Index> r_grid;
    std::vector<double> allocation_fractions;  // optional sweep of r0/(r0+r)
    Eigen::Index allocation_total = 0;
    int reps = 1;
    std::uint64_t seed = 42;
    MetricSet metrics{.mse = true};
    MseMode mse_mode = MseMode::Conditional;
    PilotScheme pilot = PilotScheme::Uniform;
    ValidationSpec validation;
    Eigen::Index coverage_index = 0;
    int threads = 1;
    SolverConfig solver{};

    void validate() const {
        if (reps < 1) throw SpecError("reps must be >= 1");
        if (methods.empty()) throw SpecError("methods must be nonempty");
        if (r0 < 1) throw SpecError("r0 must be >= 1");
        if (threads < 1) throw SpecError("threads must be >= 1");
        const bool scenario = source.scenario.has_value();
        if (!scenario && source.csv_path.empty())
            throw SpecError("source needs a scenario or a csv path");
        bool gridded = false;
        for (Method m : methods)
            gridded |= m == Method::Uniform || m == Method::MMSE || m == Method::MVc;
        if (gridded && r_grid.empty() && allocation_fractions.empty())
            throw SpecError("r_grid must be nonempty for subsampling methods");
        for (Eigen::Index r : r_grid)
            if (r < 1) throw SpecError("r_grid entries must be >= 1");
        if (!allocation_fractions.empty()) {
            if (allocation_total < 2)
                throw SpecError("allocation sweep needs a total of at least 2");
            for (double f : allocation_fractions)
                if (!(f > 0.0 && f < 1.0))
                    throw SpecError("allocation fractions must lie in (0,1)");
        }
        if (mse_mode == MseMode::Unconditional && !scenario)
            throw SpecError("unconditional mode needs a scenario source");
        if (metrics.coverage && !scenario)
            throw SpecError("coverage needs a scenario source (true beta unknown otherwise)");
        if (validation.fraction > 0.0 && !validation.csv_path.empty())
            throw SpecError("give either a validation fraction or a validation csv, not both");
        if (validation.csv_path.empty() && validation.fraction != 0.0 &&
            !(validation.fraction > 0.0 && validation.fraction < 1.0))
            throw SpecError("validation fraction must lie in (0,1)");
        if (coverage_index < 0) throw SpecError("coverage_index must be >= 0");
    }
};

struct CellReport {
    Method method = Method::Uniform;
    Eigen::Index r0 = 0;
    Eigen::Index r = 0;
    double fraction = std::numeric_limits<double>::quiet_NaN();  // allocation rows only
    int reps = 0;
    int failures = 0;
    double mse = std::numeric_limits<double>::quiet_NaN();
    double est_mse = std::numeric_limits<double>::quiet_NaN();
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double auc = std::numeric_limits<double>::quiet_NaN();
    double time_mean = std::numeric_limits<double>::quiet_NaN();
    double time_sd = std::numeric_limits<double>::quiet_NaN();
    double pilot_seconds = std::numeric_limits<double>::quiet_NaN();
    double ssp_seconds = std::numeric_limits<double>::quiet_NaN();
    double solve_seconds = std::numeric_limits<double>::quiet_NaN();
    double rows_mean = std::numeric_limits<double>::quiet_NaN();
};

struct FullReference {
    VectorXd beta;
    VectorXd se;
    int iterations = 0;
    bool converged = false;
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double auc = std::numeric_limits<double>::quiet_NaN();
};

struct ExperimentReport {
    std::string source_label;
    Eigen::Index n = 0;
    Eigen::Index d = 0;
    int reps = 0;
    std::uint64_t seed = 0;
    MseMode mse_mode = MseMode::Conditional;
    MetricSet metrics{};
    std::optional<VectorXd> beta_true;
    FullReference full;
    std::vector<CellReport> cells;
};

namespace detail {

// Sampling streams live below 2^32; dataset streams above, so the two can
// never collide no matter how many repetitions run.
constexpr std::uint64_t kDataStreamBase = std::uint64_t{1} << 32;
constexpr std::uint64_t kValidationStream = std::uint64_t{1} << 33;
constexpr std::uint64_t kCellsPerRep = 4096;

inline std::uint64_t sampling_stream(int rep, std::size_t cell) {
    return static_cast<std::uint64_t>(rep) * kCellsPerRep + cell + 1;
}

struct CellDef {
    Method method;
    Eigen::Index r0;
    Eigen::Index r;
    double fraction = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<CellDef> build_cells(const ExperimentSpec& spec) {
    std::vector<CellDef> cells;
    for (Method m : spec.methods) {
        switch (m) {
            case Method::Uniform:
            case Method::MMSE:
            case Method::MVc:
                for (Eigen::Index r : spec.r_grid)
                    cells.push_back({m, spec.r0, r});
                break;
            case Method::LCC:
                cells.push_back({m, spec.r0, 0});
                break;
            case Method::Full:
            case Method::BootstrapFull:
                cells.push_back({m, 0, 0});
                break;
        }
    }
    for (Method m : spec.methods) {
        if (m != Method::MMSE && m != Method::MVc) continue;
        for (double f : spec.allocation_fractions) {
            const auto r0 = static_cast<Eigen::Index>(
                std::llround(f * static_cast<double>(spec.allocation_total)));
            const Eigen::Index r0c =
                std::clamp<Eigen::Index>(r0, 1, spec.allocation_total - 1);
            cells.push_back({m, r0c, spec.allocation_total - r0c, f});
        }
    }
    if (cells.size() >= kCellsPerRep) throw SpecError("too many experiment cells");
    return cells;
}

struct CellOutcome {
    bool success = false;
    VectorXd beta;
    double tr_v = std::numeric_limits<double>::quiet_NaN();
    double se_cov = std::numeric_limits<double>::quiet_NaN();
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double auc = std::numeric_limits<double>::quiet_NaN();
    double t_total = std::numeric_limits<double>::quiet_NaN();
    double t_pilot = std::numeric_limits<double>::quiet_NaN();
    double t_ssp = std::numeric_limits<double>::quiet_NaN();
    double t_solve = std::numeric_limits<double>::quiet_NaN();
    double rows = std::numeric_limits<double>::quiet_NaN();
};

inline Dataset make_source_dataset(const ExperimentSpec& spec, std::uint64_t stream) {
    if (spec.source.scenario) {
        Rng rng(spec.seed, stream);
        return generate(*spec.source.scenario, rng);
    }
    return load_csv(spec.source.csv_path, spec.source.response, spec.source.intercept);
}

inline Dataset slice_rows(const Dataset& data, Eigen::Index begin, Eigen::Index count) {
    RowMatrixXd x = data.x().middleRows(begin, count);
    VectorXd y = data.y().segment(begin, count);
    return Dataset(std::move(x), std::move(y));
}

inline CellOutcome run_cell(const ExperimentSpec& spec, const Dataset& data,
                            const Dataset* eval_data, const CellDef& cell, Rng& rng) {
    using clock = std::chrono::steady_clock;
    CellOutcome out;
    const bool want_var = spec.metrics.wants_variance();
    const Eigen::Index ci = spec.coverage_index;
    const auto t0 = clock::now();
    try {
        switch (cell.method) {
            case Method::Uniform: {
                const SamplingPlan plan = ssp_uniform(data.n());
                auto [fit, sub] =
                    algorithm1_estimate(data, plan, cell.r0 + cell.r, rng, spec.solver);
                out.beta = std::move(fit.beta);
                out.rows = static_cast<double>(cell.r0 + cell.r);
                if (want_var) {
                    const VarianceEstimate var = estimate_variance(sub, data, out.beta);
                    out.tr_v = var.vcov.trace();
                    if (ci < var.se.size()) out.se_cov = var.se[ci];
                }
                break;
            }
            case Method::MMSE:
            case Method::MVc: {
                TwoStepConfig cfg;
                cfg.r0 = cell.r0;
                cfg.r = cell.r;
                cfg.pilot_scheme = spec.pilot;
                cfg.criterion =
                    cell.method == Method::MMSE ? Criterion::MMSE : Criterion::MVc;
                cfg.solver = spec.solver;
                TwoStepInfo info;
                auto [fit, var] = two_step_estimate(data, cfg, rng, &info);
                out.beta = std::move(fit.beta);
                out.rows = static_cast<double>(cell.r0 + cell.r);
                out.tr_v = var.vcov.trace();
                if (ci < var.se.size()) out.se_cov = var.se[ci];
                out.t_pilot = info.seconds_pilot;
                out.t_ssp = info.seconds_ssp;
                out.t_solve = info.seconds_solve;
                break;
            }
            case Method::LCC: {
                Eigen::Index accepted = 0;
                FitResult fit = lcc_estimate(data, cell.r0, rng, spec.solver, &accepted);
                out.beta = std::move(fit.beta);
                out.rows = static_cast<double>(cell.r0 + accepted);
                break;
            }
            case Method::Full: {
                FitResult fit = fit_full_mle(data, spec.solver);
                out.beta = std::move(fit.beta);
                out.rows = static_cast<double>(data.n());
                if (want_var) {
                    const MxMatrix mx = compute_mx(data, out.beta);
                    const MatrixXd info_inv =
                        (static_cast<double>(data.n()) * mx.m())
                            .llt()
                            .solve(MatrixXd::Identity(data.d(), data.d()));
                    out.tr_v = info_inv.trace();
                    if (ci < data.d()) out.se_cov = std::sqrt(std::max(info_inv(ci, ci), 0.0));
                }
                break;
            }
            case Method::BootstrapFull: {
                const SamplingPlan plan = ssp_uniform(data.n());
                auto [fit, sub] =
                    algorithm1_estimate(data, plan, data.n(), rng, spec.solver);
                out.beta = std::move(fit.beta);
                out.rows = static_cast<double>(data.n());
                break;
            }
        }
        out.success = true;
    } catch (const Error&) {
        out.success = false;  // counted, never fatal
    }
    out.t_total = std::chrono::duration<double>(clock::now() - t0).count();
    if (out.success && (spec.metrics.accuracy || spec.metrics.auc)) {
        const Dataset& ev = eval_data ? *eval_data : data;
        if (spec.metrics.accuracy) out.accuracy = classify(out.beta, ev).accuracy;
        if (spec.metrics.auc) {
            try {
                out.auc = auc(out.beta, ev);
            } catch (const Error&) {
            }
        }
    }
    return out;
}

template <typename Get>
double mean_over(const std::vector<CellOutcome>& outs, Get get) {
    double sum = 0.0;
    Eigen::Index k = 0;
    for (const auto& o : outs) {
        if (!o.success) continue;
        const double v = get(o);
        if (!std::isfinite(v)) continue;
        sum += v;
        ++k;
    }
    return k > 0 ? sum / static_cast<double>(k) : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// Runs the repetition study described by an ExperimentSpec. Per-repetition estimation
/// failures are tallied in failure_count; aggregates are computed over the
/// successful repetitions only.
inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const bool conditional = spec.mse_mode == MseMode::Conditional;
    const bool scenario = spec.source.scenario.has_value();

    Dataset base = detail::make_source_dataset(spec, detail::kDataStreamBase);
    std::optional<Dataset> holdout;
    if (!spec.validation.csv_path.empty()) {
        holdout = load_csv(spec.validation.csv_path, spec.source.response,
                           spec.source.intercept);
    } else if (spec.validation.fraction > 0.0) {
        if (scenario) {
            Scenario v = *spec.source.scenario;
            v.n = std::max<Eigen::Index>(
                1, static_cast<Eigen::Index>(std::llround(
                       spec.validation.fraction * static_cast<double>(v.n))));
            Rng vr(spec.seed, detail::kValidationStream);
            holdout = generate(v, vr);
        } else {
            const auto k = std::clamp<Eigen::Index>(
                static_cast<Eigen::Index>(std::llround(
                    spec.validation.fraction * static_cast<double>(base.n()))),
                1, base.n() - 1);
            holdout = detail::slice_rows(base, base.n() - k, k);
            base = detail::slice_rows(base, 0, base.n() - k);
        }
    }

    ExperimentReport report;
    report.source_label = spec.source.label;
    report.n = base.n();
    report.d = base.d();
    report.reps = spec.reps;
    report.seed = spec.seed;
    report.mse_mode = spec.mse_mode;
    report.metrics = spec.metrics;
    if (scenario) report.beta_true = spec.source.scenario->beta_true();
    if (spec.coverage_index >= base.d())
        throw SpecError("coverage_index out of range for this source");

    // Reference fit on the base dataset; also the conditional MSE target.
    {
        const FitResult fit = fit_full_mle(base, spec.solver);
        const MxMatrix mx = compute_mx(base, fit.beta);
        const MatrixXd info_inv = (static_cast<double>(base.n()) * mx.m())
                                      .llt()
                                      .solve(MatrixXd::Identity(base.d(), base.d()));
        report.full.beta = fit.beta;
        report.full.se = info_inv.diagonal().cwiseMax(0.0).cwiseSqrt();
        report.full.iterations = fit.iterations;
        report.full.converged = fit.converged;
        const Dataset& ev = holdout ? *holdout : base;
        if (spec.metrics.accuracy)
            report.full.accuracy = classify(report.full.beta, ev).accuracy;
        if (spec.metrics.auc) {
            try {
                report.full.auc = auc(report.full.beta, ev);
            } catch (const Error&) {
            }
        }
    }

    const std::vector<detail::CellDef> cells = detail::build_cells(spec);
    std::vector<std::vector<detail::CellOutcome>> outcomes(
        cells.size(), std::vector<detail::CellOutcome>(spec.reps));

    const int nthreads = std::min(spec.threads, spec.reps);
    std::vector<std::string> worker_errors(static_cast<std::size_t>(nthreads));
    auto worker = [&](int w) {
        try {
            for (int rep = w; rep < spec.reps; rep += nthreads) {
                std::optional<Dataset> fresh;
                if (!conditional) {
                    Rng dr(spec.seed, detail::kDataStreamBase + static_cast<std::uint64_t>(rep));
                    fresh = generate(*spec.source.scenario, dr);
                }
                const Dataset& data = conditional ? base : *fresh;
                const Dataset* ev = holdout ? &*holdout : nullptr;
                for (std::size_t c = 0; c < cells.size(); ++c) {
                    Rng rng(spec.seed, detail::sampling_stream(rep, c));
                    outcomes[c][rep] = detail::run_cell(spec, data, ev, cells[c], rng);
                }
            }
        } catch (const std::exception& e) {
            worker_errors[static_cast<std::size_t>(w)] = e.what();
        }
    };
    if (nthreads <= 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(nthreads));
        for (int w = 0; w < nthreads; ++w) pool.emplace_back(worker, w);
        for (auto& t : pool) t.join();
    }
    for (const auto& msg : worker_errors)
        if (!msg.empty()) throw Error("experiment worker failed: " + msg);

    const VectorXd mode_target = conditional ? report.full.beta : *report.beta_true;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto& outs = outcomes[c];
        CellReport cr;
        cr.method = cells[c].method;
        cr.r0 = cells[c].r0;
        cr.r = cells[c].r;
        cr.fraction = cells[c].fraction;
        cr.reps = spec.reps;
        int successes = 0;
        for (const auto& o : outs) successes += o.success ? 1 : 0;
        cr.failures = spec.reps - successes;

        const VectorXd& target = (cells[c].method == Method::BootstrapFull &&
                                  report.beta_true)
                                     ? *report.beta_true
                                     : mode_target;
        if (spec.metrics.mse)
            cr.mse = detail::mean_over(outs, [&](const detail::CellOutcome& o) {
                return (o.beta - target).squaredNorm();
            });
        if (spec.metrics.est_mse)
            cr.est_mse =
                detail::mean_over(outs, [](const detail::CellOutcome& o) { return o.tr_v; });
        if (spec.metrics.coverage) {
            const double truth = (*report.beta_true)[spec.coverage_index];
            cr.coverage = detail::mean_over(outs, [&](const detail::CellOutcome& o) {
                if (!std::isfinite(o.se_cov)) return std::numeric_limits<double>::quiet_NaN();
                return std::fabs(o.beta[spec.coverage_index] - truth) <= 1.96 * o.se_cov
                           ? 1.0
                           : 0.0;
            });
        }
        if (spec.metrics.accuracy)
            cr.accuracy = detail::mean_over(
                outs, [](const detail::CellOutcome& o) { return o.accuracy; });
        if (spec.metrics.auc)
            cr.auc =
                detail::mean_over(outs, [](const detail::CellOutcome& o) { return o.auc; });
        if (spec.metrics.timing) {
            cr.time_mean = detail::mean_over(
                outs, [](const detail::CellOutcome& o) { return o.t_total; });
            if (successes >= 2 && std::isfinite(cr.time_mean)) {
                double ss = 0.0;
                for (const auto& o : outs)
                    if (o.success) ss += (o.t_total - cr.time_mean) * (o.t_total - cr.time_mean);
                cr.time_sd = std::sqrt(ss / static_cast<double>(successes - 1));
            }
            cr.pilot_seconds = detail::mean_over(
                outs, [](const detail::CellOutcome& o) { return o.t_pilot; });
            cr.ssp_seconds = detail::mean_over(
                outs, [](const detail::CellOutcome& o) { return o.t_ssp; });
            cr.solve_seconds = detail::mean_over(
                outs, [](const detail::CellOutcome& o) { return o.t_solve; });
        }
        cr.rows_mean =
            detail::mean_over(outs, [](const detail::CellOutcome& o) { return o.rows; });
        report.cells.push_back(std::move(cr));
    }
    return report;
}

struct BootstrapSummary {
    int reps = 0;
    int failures = 0;
    double mse = std::numeric_limits<double>::quiet_NaN();
};

/// Uniform subsampling with replacement at r = n, repeated; the classical
/// bootstrap spread of the full-data MLE around the target coefficients.
inline BootstrapSummary run_bootstrap_full(const Dataset& data, const VectorXd& target,
                                           int reps, Rng& rng,
                                           const SolverConfig& solver = {}) {
    if (reps < 1) throw Error("need reps >= 1");
    BootstrapSummary out;
    out.reps = reps;
    const SamplingPlan plan = ssp_uniform(data.n());
    const AliasTable table(plan);
    double sum = 0.0;
    int ok = 0;
    for (int rep = 0; rep < reps; ++rep) {
        try {
            const Subsample sub =
                draw_with_replacement(table, plan, data.n(), rng, StepTag::Step1);
            const GatheredSample g = gather(data, sub);
            const FitResult fit =
                newton_mle(g.view(), VectorXd::Zero(data.d()), solver);
            sum += (fit.beta - target).squaredNorm();
            ++ok;
        } catch (const Error&) {
            ++out.failures;
        }
    }
    if (ok > 0) out.mse = sum / ok;
    return out;
}

namespace detail {

inline std::string format_double(double v) {
    if (!std::isfinite(v)) return "";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline nlohmann::ordered_json vector_json(const VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

// Metrics that were never measured surface as explicit nulls, not NaN.
inline nlohmann::ordered_json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const ExperimentReport& report) {
    nlohmann::ordered_json j;
    j["schema"] = "osmac-report-v1";
    j["source"] = report.source_label;
    j["n"] = report.n;
    j["d"] = report.d;
    j["reps"] = report.reps;
    j["seed"] = report.seed;
    j["mse_mode"] =
        report.mse_mode == MseMode::Conditional ? "conditional" : "unconditional";
    if (report.beta_true) j["beta_true"] = detail::vector_json(*report.beta_true);
    nlohmann::ordered_json full;
    full["beta"] = detail::vector_json(report.full.beta);
    full["se"] = detail::vector_json(report.full.se);
    full["iterations"] = report.full.iterations;
    full["converged"] = report.full.converged;
    if (report.metrics.accuracy) full["accuracy"] = detail::finite_or_null(report.full.accuracy);
    if (report.metrics.auc) full["auc"] = detail::finite_or_null(report.full.auc);
    j["full"] = std::move(full);
    nlohmann::ordered_json cells = nlohmann::ordered_json::array();
    for (const auto& c : report.cells) {
        nlohmann::ordered_json jc;
        jc["method"] = method_name(c.method);
        jc["r0"] = c.r0;
        jc["r"] = c.r;
        if (std::isfinite(c.fraction)) jc["fraction"] = c.fraction;
        jc["reps"] = c.reps;
        jc["failures"] = c.failures;
        if (report.metrics.mse) jc["mse"] = detail::finite_or_null(c.mse);
        if (report.metrics.est_mse) jc["est_mse"] = detail::finite_or_null(c.est_mse);
        if (report.metrics.coverage) jc["coverage"] = detail::finite_or_null(c.coverage);
        if (report.metrics.accuracy) jc["accuracy"] = detail::finite_or_null(c.accuracy);
        if (report.metrics.auc) jc["auc"] = detail::finite_or_null(c.auc);
        if (report.metrics.timing) {
            nlohmann::ordered_json jt;
            jt["mean_seconds"] = detail::finite_or_null(c.time_mean);
            jt["sd_seconds"] = detail::finite_or_null(c.time_sd);
            jt["pilot_seconds"] = detail::finite_or_null(c.pilot_seconds);
            jt["ssp_seconds"] = detail::finite_or_null(c.ssp_seconds);
            jt["solve_seconds"] = detail::finite_or_null(c.solve_seconds);
            jc["timing"] = std::move(jt);
        }
        jc["rows_mean"] = c.rows_mean;
        cells.push_back(std::move(jc));
    }
    j["cells"] = std::move(cells);
    return j;
}

inline std::string report_to_csv(const ExperimentReport& report) {
    std::string out =
        "method,r0,r,fraction,reps,failures,mse,est_mse,coverage,accuracy,auc,"
        "time_mean_s,time_sd_s,pilot_s,ssp_s,solve_s,rows_mean\n";
    for (const auto& c : report.cells) {
        out += method_name(c.method);
        out += ',';
        out += std::to_string(c.r0);
        out += ',';
        out += std::to_string(c.r);
        out += ',';
        out += detail::format_double(c.fraction);
        out += ',';
        out += std::to_string(c.reps);
        out += ',';
        out += std::to_string(c.failures);
        for (double v : {c.mse, c.est_mse, c.coverage, c.accuracy, c.auc, c.time_mean,
                         c.time_sd, c.pilot_seconds, c.ssp_seconds, c.solve_seconds,
                         c.rows_mean}) {
            out += ',';
            out += detail::format_double(v);
        }
        out += '\n';
    }
    return out;
}

/// Writes the report to disk; format is "json" or "csv".
inline void emit_report(const ExperimentReport& report, const std::string& format,
                        const std::string& path) {
    std::string text;
    if (format == "json")
        text = report_to_json(report).dump(2) + "\n";
    else if (format == "csv")
        text = report_to_csv(report);
    else
        throw SpecError("unknown report format '" + format + "'");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw SpecError(std::string("spec is missing '") + key + "'");
    return j.at(key);
}

}  // namespace detail

/// Parses an experiment spec from JSON. See the README for the schema.
inline ExperimentSpec parse_spec(const nlohmann::json& j) {
    ExperimentSpec spec;
    try {
        const auto& src = detail::require_key(j, "source");
        if (src.contains("scenario")) {
            const auto name = src.at("scenario").get<std::string>();
            const auto n = src.at("n").get<Eigen::Index>();
            const double param = src.value("param", 0.0);
            spec.source.scenario = Scenario::from_name(name, n, param);
            spec.source.label = name;
        } else if (src.contains("csv")) {
            spec.source.csv_path = src.at("csv").get<std::string>();
            spec.source.label = spec.source.csv_path;
            if (src.contains("response")) {
                if (src.at("response").is_number_unsigned() ||
                    src.at("response").is_number_integer())
                    spec.source.response = src.at("response").get<std::size_t>();
                else
                    spec.source.response = src.at("response").get<std::string>();
            }
            spec.source.intercept = src.value("intercept", false);
        } else {
            throw SpecError("source needs 'scenario' or 'csv'");
        }
        for (const auto& m : detail::require_key(j, "methods"))
            spec.methods.push_back(method_from_name(m.get<std::string>()));
        spec.r0 = j.value("r0", spec.r0);
        if (j.contains("r_grid"))
            for (const auto& r : j.at("r_grid"))
                spec.r_grid.push_back(r.get<Eigen::Index>());
        if (j.contains("allocation")) {
            const auto& a = j.at("allocation");
            spec.allocation_total = detail::require_key(a, "total").get<Eigen::Index>();
            for (const auto& f : detail::require_key(a, "fractions"))
                spec.allocation_fractions.push_back(f.get<double>());
        }
        spec.reps = j.value("reps", 1);
        spec.seed = j.value("seed", std::uint64_t{42});
        if (j.contains("metrics")) {
            spec.metrics = MetricSet{};
            for (const auto& m : j.at("metrics")) {
                const auto name = m.get<std::string>();
                if (name == "mse") spec.metrics.mse = true;
                else if (name == "est_mse") spec.metrics.est_mse = true;
                else if (name == "coverage") spec.metrics.coverage = true;
                else if (name == "accuracy") spec.metrics.accuracy = true;
                else if (name == "auc") spec.metrics.auc = true;
                else if (name == "timing") spec.metrics.timing = true;
                else throw SpecError("unknown metric '" + name + "'");
            }
        }
        if (j.contains("mse_mode")) {
            const auto mode = j.at("mse_mode").get<std::string>();
            if (mode == "conditional") spec.mse_mode = MseMode::Conditional;
            else if (mode == "unconditional") spec.mse_mode = MseMode::Unconditional;
            else throw SpecError("unknown mse_mode '" + mode + "'");
        }
        if (j.contains("pilot")) {
            const auto pilot = j.at("pilot").get<std::string>();
            if (pilot == "uniform") spec.pilot = PilotScheme::Uniform;
            else if (pilot == "case_control") spec.pilot = PilotScheme::CaseControl;
            else throw SpecError("unknown pilot scheme '" + pilot + "'");
        }
        if (j.contains("validation")) {
            const auto& v = j.at("validation");
            spec.validation.fraction = v.value("fraction", 0.0);
            spec.validation.csv_path = v.value("csv", std::string{});
        }
        spec.coverage_index = j.value("coverage_index", Eigen::Index{0});
        spec.threads = j.value("threads", 1);
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            spec.solver.tol = s.value("tol", spec.solver.tol);
            spec.solver.max_iter = s.value("max_iter", spec.solver.max_iter);
        }
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

inline ExperimentSpec load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError("cannot open spec file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("spec is not valid JSON: ") + e.what());
    }
    return parse_spec(j);
}

}  // namespace osmac
