#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "osmac/dataset.hpp"
#include "osmac/errors.hpp"
#include "osmac/glm.hpp"
#include "osmac/rng.hpp"
#include "osmac/sampling.hpp"
#include "osmac/ssp.hpp"
#include "osmac/types.hpp"

namespace osmac {

struct PilotSeparationError : SeparationError {
    using SeparationError::SeparationError;
};

/// Owned copy of the rows a subsample selected, with inverse-probability
/// weights. Keep it alive while fitting; WeightedSample views into it.
struct GatheredSample {
    RowMatrixXd x;
    VectorXd y;
    VectorXd w;

    WeightedSample view() const { return WeightedSample(x, y, w); }
};

inline GatheredSample gather(const Dataset& data, const Subsample& sub) {
    sub.validate(data.n());
    const Eigen::Index m = static_cast<Eigen::Index>(sub.size());
    GatheredSample g;
    g.x.resize(m, data.d());
    g.y.resize(m);
    g.w.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = sub.indices[static_cast<std::size_t>(k)];
        g.x.row(k) = data.x().row(i);
        g.y[k] = data.y()[i];
        g.w[k] = 1.0 / sub.probs[static_cast<std::size_t>(k)];
    }
    return g;
}

/// Draws r rows under `plan` and maximizes the inverse-probability-weighted
/// log-likelihood. The constant 1/r factor of the weighted objective is
/// dropped; it cannot move the maximizer. The subsample is returned so the
/// caller can feed it to estimate_variance.
inline std::pair<FitResult, Subsample> algorithm1_estimate(const Dataset& data,
                                                           const SamplingPlan& plan,
                                                           Eigen::Index r, Rng& rng,
                                                           const SolverConfig& solver = {}) {
    const AliasTable table(plan);
    Subsample sub = draw_with_replacement(table, plan, r, rng, StepTag::Step1);
    const GatheredSample g = gather(data, sub);
    FitResult fit = newton_mle(g.view(), VectorXd::Zero(data.d()), solver);
    return {std::move(fit), std::move(sub)};
}

struct VarianceEstimate {
    MatrixXd vcov;    // sandwich estimate for the pooled-subsample estimator
    MatrixXd mx_hat;
    MatrixXd vc_hat;
    VectorXd se;
};

/// Subsample-only moment estimate of the variance-covariance matrix:
///   mx_hat = (n m)^{-1} sum w_i(beta) x_i x_i^T / pi_i
///   vc_hat = (n m)^{-2} sum (y_i - p_i)^2 x_i x_i^T / pi_i^2
///   vcov   = mx_hat^{-1} vc_hat mx_hat^{-1}
/// over the m = |sub| drawn rows. Nothing here touches rows outside the
/// subsample.
inline VarianceEstimate estimate_variance(const Subsample& sub, const Dataset& data,
                                          const VectorXd& beta) {
    if (sub.size() == 0) throw Error("empty subsample");
    sub.validate(data.n());
    const Eigen::Index d = data.d();
    const double n = static_cast<double>(data.n());
    const double m = static_cast<double>(sub.size());

    MatrixXd mx_hat = MatrixXd::Zero(d, d);
    MatrixXd vc_hat = MatrixXd::Zero(d, d);
    for (std::size_t k = 0; k < sub.size(); ++k) {
        const Eigen::Index i = sub.indices[k];
        const double pi = sub.probs[k];
        const double p = sigmoid(data.x().row(i).dot(beta));
        const double resid = data.y()[i] - p;
        const auto xi = data.x().row(i);
        mx_hat.selfadjointView<Eigen::Lower>().rankUpdate(xi.transpose(),
                                                          p * (1.0 - p) / pi);
        vc_hat.selfadjointView<Eigen::Lower>().rankUpdate(xi.transpose(),
                                                          resid * resid / (pi * pi));
    }
    mx_hat /= n * m;
    vc_hat /= n * n * m * m;
    mx_hat.triangularView<Eigen::StrictlyUpper>() =
        mx_hat.transpose().triangularView<Eigen::StrictlyUpper>();
    vc_hat.triangularView<Eigen::StrictlyUpper>() =
        vc_hat.transpose().triangularView<Eigen::StrictlyUpper>();

    Eigen::LLT<MatrixXd> llt(mx_hat);
    if (llt.info() != Eigen::Success)
        throw SingularMxHatError("subsample Mx estimate is singular");
    MatrixXd vcov = llt.solve(llt.solve(vc_hat).transpose());
    vcov = (0.5 * (vcov + vcov.transpose())).eval();

    VarianceEstimate out;
    out.se = vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
    out.vcov = std::move(vcov);
    out.mx_hat = std::move(mx_hat);
    out.vc_hat = std::move(vc_hat);
    return out;
}

/// Mx estimated from an already-drawn subsample instead of a full-data pass:
/// (n r0)^{-1} sum w_i(beta) x_i x_i^T / pi_i.
inline MxMatrix estimate_mx_from_subsample(const Dataset& data, const Subsample& sub,
                                           const VectorXd& beta) {
    if (sub.size() == 0) throw Error("empty subsample");
    const Eigen::Index d = data.d();
    MatrixXd m = MatrixXd::Zero(d, d);
    for (std::size_t k = 0; k < sub.size(); ++k) {
        const Eigen::Index i = sub.indices[k];
        const double p = sigmoid(data.x().row(i).dot(beta));
        m.selfadjointView<Eigen::Lower>().rankUpdate(
            data.x().row(i).transpose(), p * (1.0 - p) / sub.probs[k]);
    }
    m /= static_cast<double>(data.n()) * static_cast<double>(sub.size());
    m.triangularView<Eigen::StrictlyUpper>() =
        m.transpose().triangularView<Eigen::StrictlyUpper>();
    return MxMatrix(std::move(m));
}

enum class PilotScheme { Uniform, CaseControl };
enum class Criterion { MMSE, MVc };
enum class MxSource { FullData, PilotSubsample };

struct TwoStepConfig {
    Eigen::Index r0 = 200;
    Eigen::Index r = 800;
    PilotScheme pilot_scheme = PilotScheme::Uniform;
    Criterion criterion = Criterion::MMSE;
    MxSource mx_source = MxSource::FullData;
    SolverConfig solver{};
};

/// Phase accounting for one two-step run; lets callers separate the cost of
/// building probabilities from the cost of solving.
struct TwoStepInfo {
    double seconds_pilot = 0.0;
    double seconds_ssp = 0.0;
    double seconds_solve = 0.0;
    bool mx_computed = false;
    int pilot_iterations = 0;
    int final_iterations = 0;
};

/// Two-step estimator: pilot subsample of r0 rows under the pilot scheme,
/// criterion probabilities rebuilt at the pilot estimate, r more rows drawn
/// under them, then one weighted fit over the pooled r0+r rows (each row
/// keeps the probability of the step that drew it). Standard errors come
/// from estimate_variance on the pooled subsample.
inline std::pair<FitResult, VarianceEstimate> two_step_estimate(
    const Dataset& data, const TwoStepConfig& cfg, Rng& rng,
    TwoStepInfo* info = nullptr, std::optional<SamplingPlan>* ssp_out = nullptr) {
    using clock = std::chrono::steady_clock;
    const auto seconds_since = [](clock::time_point t0) {
        return std::chrono::duration<double>(clock::now() - t0).count();
    };
    if (cfg.r0 < 1 || cfg.r < 1) throw Error("need r0 >= 1 and r >= 1");

    auto t0 = clock::now();
    const SamplingPlan pilot_plan = cfg.pilot_scheme == PilotScheme::Uniform
                                        ? ssp_uniform(data.n())
                                        : ssp_case_control(data);
    const AliasTable pilot_table(pilot_plan);
    Subsample sub1 = draw_with_replacement(pilot_table, pilot_plan, cfg.r0, rng,
                                           StepTag::Step1);
    const GatheredSample g1 = gather(data, sub1);
    FitResult pilot;
    try {
        pilot = newton_mle(g1.view(), VectorXd::Zero(data.d()), cfg.solver);
    } catch (const SeparationError& e) {
        throw PilotSeparationError("pilot MLE does not exist", e.last_iterate);
    }
    if (info) {
        info->seconds_pilot = seconds_since(t0);
        info->pilot_iterations = pilot.iterations;
    }

    t0 = clock::now();
    SamplingPlan plan = [&] {
        if (cfg.criterion == Criterion::MVc) return ssp_mvc(data, pilot.beta);
        const MxMatrix mx = cfg.mx_source == MxSource::FullData
                                ? compute_mx(data, pilot.beta)
                                : estimate_mx_from_subsample(data, sub1, pilot.beta);
        if (info) info->mx_computed = true;
        return ssp_mmse(data, pilot.beta, mx);
    }();
    const AliasTable table(plan);
    if (info) info->seconds_ssp = seconds_since(t0);
    if (ssp_out) *ssp_out = plan;

    t0 = clock::now();
    const Subsample sub2 = draw_with_replacement(table, plan, cfg.r, rng, StepTag::Step2);
    const Subsample pooled = Subsample::pooled(sub1, sub2);
    const GatheredSample g = gather(data, pooled);
    FitResult fit = newton_mle(g.view(), pilot.beta, cfg.solver);
    if (info) {
        info->seconds_solve = seconds_since(t0);
        info->final_iterations = fit.iterations;
    }

    VarianceEstimate var = estimate_variance(pooled, data, fit.beta);
    fit.vcov = var.vcov;
    fit.se = var.se;
    return {std::move(fit), std::move(var)};
}

/// Local case-control baseline: case-control pilot of size r0, Poisson
/// acceptance with probability |y_i - p_i(pilot)|, unweighted MLE on the
/// accepted rows, and the pilot added back as an offset. The pilot rows are
/// never pooled into the final fit.
inline FitResult lcc_estimate(const Dataset& data, Eigen::Index r0, Rng& rng,
                              const SolverConfig& solver = {},
                              Eigen::Index* accepted_rows = nullptr,
                              std::optional<SamplingPlan>* ssp_out = nullptr) {
    const SamplingPlan pilot_plan = ssp_case_control(data);
    const AliasTable pilot_table(pilot_plan);
    const Subsample sub1 = draw_with_replacement(pilot_table, pilot_plan, r0, rng,
                                                 StepTag::Step1);
    const GatheredSample g1 = gather(data, sub1);
    FitResult pilot;
    try {
        pilot = newton_mle(g1.view(), VectorXd::Zero(data.d()), solver);
    } catch (const SeparationError& e) {
        throw PilotSeparationError("pilot MLE does not exist", e.last_iterate);
    }

    const SamplingPlan acceptance = ssp_lcc_acceptance(data, pilot.beta);
    if (ssp_out) *ssp_out = acceptance;
    const Subsample accepted = draw_poisson(acceptance, rng);
    if (accepted.size() == 0)
        throw EmptyAcceptanceError("no rows accepted by the local case-control draw");
    if (accepted_rows) *accepted_rows = accepted.size();

    GatheredSample ga = gather(data, accepted);
    ga.w.setOnes();  // unweighted fit on the accepted rows
    const FitResult correction =
        newton_mle(ga.view(), VectorXd::Zero(data.d()), solver);

    FitResult out;
    out.beta = pilot.beta + correction.beta;
    out.converged = correction.converged;
    out.iterations = pilot.iterations + correction.iterations;
    return out;
}

struct Classification {
    std::vector<std::uint8_t> predicted;
    double accuracy = 0.0;
};

/// Predicts 1 when p_i(beta) is strictly above the threshold, so p = 0.5
/// classifies as 0 at the default cut.
inline Classification classify(const VectorXd& beta, const Dataset& data,
                               double threshold = 0.5) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw Error("threshold must lie in (0,1)");
    Classification out;
    out.predicted.resize(static_cast<std::size_t>(data.n()));
    const VectorXd eta = data.x() * beta;
    Eigen::Index correct = 0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const std::uint8_t yhat = sigmoid(eta[i]) > threshold ? 1 : 0;
        out.predicted[static_cast<std::size_t>(i)] = yhat;
        correct += static_cast<double>(yhat) == data.y()[i];
    }
    out.accuracy = static_cast<double>(correct) / static_cast<double>(data.n());
    return out;
}

/// Rank-based (Mann-Whitney) AUC of the linear scores x_i^T beta against the
/// responses; ties get half credit via midranks.
inline double auc(const VectorXd& beta, const Dataset& data) {
    const auto [n0, n1] = class_counts(data);
    if (n0 == 0 || n1 == 0)
        throw DegenerateClassesError("AUC needs both classes present");
    const VectorXd score = data.x() * beta;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(data.n()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return score[a] < score[b]; });

    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && score[order[j + 1]] == score[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (data.y()[order[k]] == 1.0) rank_sum_pos += midrank;
        i = j + 1;
    }
    const double u = rank_sum_pos -
                     0.5 * static_cast<double>(n1) * (static_cast<double>(n1) + 1.0);
    return u / (static_cast<double>(n0) * static_cast<double>(n1));
}

}  // namespace osmac
