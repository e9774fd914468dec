#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "osmac/dataset.hpp"
#include "osmac/errors.hpp"
#include "osmac/types.hpp"

namespace osmac {

/// Stable logistic function; branches on the sign of eta so neither branch
/// overflows.
inline double sigmoid(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

/// log(1 + exp(eta)) without overflow.
inline double log1pexp(double eta) {
    if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
    return std::log1p(std::exp(eta));
}

/// Non-owning view of (rows, responses, positive weights). Callers keep the
/// referenced storage alive for the duration of any call taking the view.
/// Weights are 1/pi for inverse-probability-weighted fits and all ones for
/// plain fits.
class WeightedSample {
  public:
    WeightedSample(Eigen::Ref<const RowMatrixXd> x, Eigen::Ref<const VectorXd> y,
                   Eigen::Ref<const VectorXd> w)
        : x_(x), y_(y), w_(w) {
        if (y_.size() != x_.rows() || w_.size() != x_.rows())
            throw Error("weighted sample dimensions disagree");
        for (Eigen::Index i = 0; i < w_.size(); ++i)
            if (!(w_[i] > 0.0) || !std::isfinite(w_[i]))
                throw Error("weights must be positive and finite");
    }

    Eigen::Ref<const RowMatrixXd> x() const { return x_; }
    Eigen::Ref<const VectorXd> y() const { return y_; }
    Eigen::Ref<const VectorXd> w() const { return w_; }
    Eigen::Index m() const { return x_.rows(); }
    Eigen::Index d() const { return x_.cols(); }

  private:
    Eigen::Ref<const RowMatrixXd> x_;
    Eigen::Ref<const VectorXd> y_;
    Eigen::Ref<const VectorXd> w_;
};

struct SolverConfig {
    double tol = 1e-8;          // relative-step stopping tolerance
    int max_iter = 100;
    double divergence_norm = 1e8;  // ||beta|| beyond this means separation
};

/// Weighted log-likelihood sum w_i [y_i log p_i + (1-y_i) log(1-p_i)],
/// evaluated as w_i [y_i eta_i - log(1+exp(eta_i))] so saturated
/// probabilities cost nothing.
inline double loglik(const WeightedSample& s, const VectorXd& beta) {
    const VectorXd eta = s.x() * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < s.m(); ++i)
        ll += s.w()[i] * (s.y()[i] * eta[i] - log1pexp(eta[i]));
    return ll;
}

/// Gradient sum w_i (y_i - p_i) x_i and negated Hessian
/// sum w_i p_i (1-p_i) x_i x_i^T of the weighted log-likelihood.
inline std::pair<VectorXd, MatrixXd> score_and_hessian(const WeightedSample& s,
                                                       const VectorXd& beta) {
    const Eigen::Index d = s.d();
    const VectorXd eta = s.x() * beta;
    VectorXd resid(s.m());
    VectorXd curv(s.m());
    for (Eigen::Index i = 0; i < s.m(); ++i) {
        const double p = sigmoid(eta[i]);
        resid[i] = s.w()[i] * (s.y()[i] - p);
        curv[i] = s.w()[i] * p * (1.0 - p);
    }
    VectorXd grad = s.x().transpose() * resid;
    MatrixXd neg_hess = MatrixXd::Zero(d, d);
    // Accumulate X^T diag(curv) X in row blocks to bound scratch memory.
    const Eigen::Index block = 65536;
    RowMatrixXd scratch;
    for (Eigen::Index start = 0; start < s.m(); start += block) {
        const Eigen::Index len = std::min(block, s.m() - start);
        scratch = s.x().middleRows(start, len);
        scratch.array().colwise() *= curv.segment(start, len).array().sqrt();
        neg_hess.selfadjointView<Eigen::Lower>().rankUpdate(scratch.transpose());
    }
    neg_hess.triangularView<Eigen::StrictlyUpper>() =
        neg_hess.transpose().triangularView<Eigen::StrictlyUpper>();
    return {std::move(grad), std::move(neg_hess)};
}

/// Per-iterate diagnostics kept by the Newton solver, enough to apply the
/// separation heuristic after the fact.
struct SolverTrace {
    std::vector<double> beta_norms;   // ||beta|| after each update
    std::vector<double> logliks;      // objective after each update
    VectorXd final_beta;
    int iterations = 0;
    bool hit_max_iter = false;
    bool curvature_collapsed = false;  // Hessian went singular in the saturated regime

    bool loglik_monotone_increasing() const {
        for (std::size_t i = 1; i < logliks.size(); ++i)
            if (logliks[i] <= logliks[i - 1]) return false;
        return logliks.size() >= 2;
    }
};

struct SeparationError : Error {
    SeparationError(const std::string& msg, FitResult last)
        : Error(msg), last_iterate(std::move(last)) {}
    FitResult last_iterate;
};

/// Separation heuristic over a finished solve: the iterates ran off to
/// norm > divergence_norm, or the iteration budget was exhausted with the
/// objective still strictly climbing and some |x_i^T beta| past 30 (deep in
/// the saturated regime).
inline bool check_separation(const Dataset& data, const SolverTrace& trace,
                             const SolverConfig& cfg = {}) {
    if (trace.curvature_collapsed) return true;
    for (double nb : trace.beta_norms)
        if (nb > cfg.divergence_norm) return true;
    if (trace.hit_max_iter && trace.loglik_monotone_increasing()) {
        const double max_eta =
            (data.x() * trace.final_beta).array().abs().maxCoeff();
        if (max_eta > 30.0) return true;
    }
    return false;
}

namespace detail {

inline bool separation_from_trace(const WeightedSample& s, const SolverTrace& trace,
                                  const SolverConfig& cfg) {
    if (trace.curvature_collapsed) return true;
    for (double nb : trace.beta_norms)
        if (nb > cfg.divergence_norm) return true;
    if (trace.hit_max_iter && trace.loglik_monotone_increasing()) {
        const double max_eta = (s.x() * trace.final_beta).array().abs().maxCoeff();
        if (max_eta > 30.0) return true;
    }
    return false;
}

}  // namespace detail

/// Newton solve with the trace exposed; flags rather than throws, so callers
/// can inspect how a failed solve behaved.
inline std::pair<FitResult, SolverTrace> newton_mle_traced(const WeightedSample& s,
                                                           const VectorXd& init,
                                                           const SolverConfig& cfg = {}) {
    if (init.size() != s.d()) throw Error("initial point has wrong dimension");
    FitResult fit;
    SolverTrace trace;
    VectorXd beta = init;

    for (int it = 0; it < cfg.max_iter; ++it) {
        auto [grad, neg_hess] = score_and_hessian(s, beta);
        Eigen::LLT<MatrixXd> llt(neg_hess);
        if (llt.info() != Eigen::Success) {
            // The curvature weights p(1-p) underflow once every linear
            // predictor saturates; a singular Hessian at such an iterate is
            // the no-finite-MLE signature, not a rank-deficient design.
            if (it > 0 && (s.x() * beta).array().abs().maxCoeff() > 30.0) {
                trace.curvature_collapsed = true;
                break;
            }
            throw SingularHessianError("negated Hessian is not positive definite");
        }
        const VectorXd step = llt.solve(grad);
        beta += step;
        trace.beta_norms.push_back(beta.norm());
        trace.logliks.push_back(loglik(s, beta));
        trace.iterations = it + 1;
        if (beta.norm() > cfg.divergence_norm) break;
        if (step.norm() <= cfg.tol * std::max(1.0, beta.norm())) {
            fit.converged = true;
            break;
        }
    }
    trace.hit_max_iter = !fit.converged && trace.iterations == cfg.max_iter;
    trace.final_beta = beta;
    fit.beta = std::move(beta);
    fit.iterations = trace.iterations;
    fit.separation_detected = detail::separation_from_trace(s, trace, cfg);
    return {std::move(fit), std::move(trace)};
}

/// Weighted MLE by Newton iteration. Throws SeparationError when the
/// separation heuristic fires and SingularHessianError when the negated
/// Hessian cannot be factorized (collinear rows).
inline FitResult newton_mle(const WeightedSample& s, const VectorXd& init,
                            const SolverConfig& cfg = {}) {
    auto [fit, trace] = newton_mle_traced(s, init, cfg);
    if (fit.separation_detected)
        throw SeparationError("no finite MLE: classes look separated", std::move(fit));
    return std::move(fit);
}

/// Unweighted full-data MLE from a zero start.
inline FitResult fit_full_mle(const Dataset& data, const SolverConfig& cfg = {}) {
    const VectorXd ones = VectorXd::Ones(data.n());
    WeightedSample s(data.x(), data.y(), ones);
    return newton_mle(s, VectorXd::Zero(data.d()), cfg);
}

}  // namespace osmac
