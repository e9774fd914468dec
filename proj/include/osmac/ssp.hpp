#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "osmac/dataset.hpp"
#include "osmac/errors.hpp"
#include "osmac/glm.hpp"
#include "osmac/types.hpp"

namespace osmac {

/// The d x d information-style matrix n^{-1} sum_i p_i(1-p_i) x_i x_i^T at a
/// supplied coefficient vector. Symmetric PSD by construction; the
/// constructor rejects anything that drifted from that.
class MxMatrix {
  public:
    explicit MxMatrix(MatrixXd m) : m_(std::move(m)) {
        const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
        if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
            throw Error("matrix is not symmetric");
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(m_, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10 * m_.trace())
            throw Error("matrix is not positive semidefinite");
    }

    const MatrixXd& m() const { return m_; }
    Eigen::Index d() const { return m_.rows(); }

  private:
    MatrixXd m_;
};

inline MxMatrix compute_mx(const Dataset& data, const VectorXd& beta) {
    const Eigen::Index n = data.n();
    const Eigen::Index d = data.d();
    const VectorXd eta = data.x() * beta;
    MatrixXd m = MatrixXd::Zero(d, d);
    const Eigen::Index block = 65536;
    RowMatrixXd scratch;
    for (Eigen::Index start = 0; start < n; start += block) {
        const Eigen::Index len = std::min(block, n - start);
        scratch = data.x().middleRows(start, len);
        for (Eigen::Index i = 0; i < len; ++i) {
            const double p = sigmoid(eta[start + i]);
            scratch.row(i) *= std::sqrt(p * (1.0 - p));
        }
        m.selfadjointView<Eigen::Lower>().rankUpdate(scratch.transpose());
    }
    m /= static_cast<double>(n);
    m.triangularView<Eigen::StrictlyUpper>() =
        m.transpose().triangularView<Eigen::StrictlyUpper>();
    return MxMatrix(std::move(m));
}

inline SamplingPlan ssp_uniform(Eigen::Index n) {
    if (n < 1) throw Error("need n >= 1");
    return SamplingPlan(VectorXd::Constant(n, 1.0 / static_cast<double>(n)),
                        Scheme::Uniform);
}

/// Each response class gets total probability 1/2: pi_i = 1/(2 n0) for
/// zeros, 1/(2 n1) for ones.
inline SamplingPlan ssp_case_control(const Dataset& data) {
    const auto [n0, n1] = class_counts(data);
    if (n0 == 0 || n1 == 0)
        throw DegenerateClassesError("case-control plan needs both classes present");
    const double p0 = 0.5 / static_cast<double>(n0);
    const double p1 = 0.5 / static_cast<double>(n1);
    VectorXd pi(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i)
        pi[i] = data.y()[i] == 1.0 ? p1 : p0;
    return SamplingPlan(std::move(pi), Scheme::CaseControl);
}

namespace detail {

inline SamplingPlan normalized_plan(VectorXd score, Scheme scheme, VectorXd pilot) {
    const double total = score.sum();
    if (!(total > 0.0))
        throw ZeroMassError("every row has zero sampling score");
    score /= total;
    return SamplingPlan(std::move(score), scheme, std::move(pilot));
}

}  // namespace detail

/// pi_i proportional to |y_i - p_i(beta)| * ||x_i||.
inline SamplingPlan ssp_mvc(const Dataset& data, const VectorXd& beta) {
    const VectorXd eta = data.x() * beta;
    VectorXd score(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i)
        score[i] = std::abs(data.y()[i] - sigmoid(eta[i])) * data.x().row(i).norm();
    return detail::normalized_plan(std::move(score), Scheme::MVc, beta);
}

/// pi_i proportional to |y_i - p_i(beta)| * ||Mx^{-1} x_i||. One Cholesky
/// factorization of Mx, then blocked triangular solves across all rows.
inline SamplingPlan ssp_mmse(const Dataset& data, const VectorXd& beta,
                             const MxMatrix& mx) {
    Eigen::LLT<MatrixXd> llt(mx.m());
    if (llt.info() != Eigen::Success)
        throw SingularMxError("Mx is singular; cannot form mMSE probabilities");
    // One dense product per block beats per-row triangular solves by a wide
    // margin at large n, and norm accuracy is all the probabilities need.
    const MatrixXd minv = llt.solve(MatrixXd::Identity(data.d(), data.d()));
    const VectorXd eta = data.x() * beta;
    VectorXd score(data.n());
    const Eigen::Index block = 65536;
    RowMatrixXd scratch;  // len x d, row i holds (Mx^{-1} x_i)^T
    for (Eigen::Index start = 0; start < data.n(); start += block) {
        const Eigen::Index len = std::min(block, data.n() - start);
        scratch.noalias() = data.x().middleRows(start, len) * minv;
        for (Eigen::Index i = 0; i < len; ++i)
            score[start + i] = std::abs(data.y()[start + i] - sigmoid(eta[start + i])) *
                               scratch.row(i).norm();
    }
    return detail::normalized_plan(std::move(score), Scheme::MMSE, beta);
}

/// Poisson acceptance probabilities |y_i - p_i(beta)|; not normalized.
inline SamplingPlan ssp_lcc_acceptance(const Dataset& data, const VectorXd& beta) {
    const VectorXd eta = data.x() * beta;
    VectorXd pi(data.n());
    for (Eigen::Index i = 0; i < data.n(); ++i)
        pi[i] = std::abs(data.y()[i] - sigmoid(eta[i]));
    return SamplingPlan(std::move(pi), Scheme::LCCAcceptance, beta);
}

/// Replaces pi with max(pi, eps/n) and renormalizes. Off by default
/// everywhere; exists to stress-test behavior under extreme weights.
inline SamplingPlan apply_probability_floor(const SamplingPlan& plan, double eps) {
    if (!plan.is_replacement_scheme())
        throw WrongSchemeError("probability floor applies to replacement schemes");
    const double floor = eps / static_cast<double>(plan.pi.size());
    VectorXd pi = plan.pi.cwiseMax(floor);
    pi /= pi.sum();
    return SamplingPlan(std::move(pi), plan.scheme, plan.pilot);
}

enum class TraceMode { TraceV, TraceVc };

/// Asymptotic-MSE trace of the subsample estimator under `plan`:
///   (r n^2)^{-1} sum_i (y_i - p_i)^2 a_i / pi_i
/// with a_i = ||Mx^{-1} x_i||^2 (TraceV) or ||x_i||^2 (TraceVc). Rows with a
/// zero residual contribute nothing even at pi_i = 0; a zero pi_i under a
/// nonzero residual is an error.
inline double amse_trace(const Dataset& data, const SamplingPlan& plan,
                         const VectorXd& beta, const MxMatrix& mx, Eigen::Index r,
                         TraceMode mode) {
    if (r < 1) throw Error("need r >= 1");
    if (plan.pi.size() != data.n()) throw Error("plan length mismatch");
    const VectorXd eta = data.x() * beta;

    VectorXd row_norm2(data.n());
    if (mode == TraceMode::TraceVc) {
        for (Eigen::Index i = 0; i < data.n(); ++i)
            row_norm2[i] = data.x().row(i).squaredNorm();
    } else {
        Eigen::LLT<MatrixXd> llt(mx.m());
        if (llt.info() != Eigen::Success)
            throw SingularMxError("Mx is singular");
        const Eigen::Index block = 65536;
        MatrixXd scratch;
        for (Eigen::Index start = 0; start < data.n(); start += block) {
            const Eigen::Index len = std::min(block, data.n() - start);
            scratch = data.x().middleRows(start, len).transpose();
            llt.matrixL().solveInPlace(scratch);
            llt.matrixU().solveInPlace(scratch);
            for (Eigen::Index i = 0; i < len; ++i)
                row_norm2[start + i] = scratch.col(i).squaredNorm();
        }
    }

    double acc = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const double resid = data.y()[i] - sigmoid(eta[i]);
        const double num = resid * resid * row_norm2[i];
        if (num == 0.0) continue;
        if (!(plan.pi[i] > 0.0))
            throw DivisionByZeroMassError("zero probability on a row with nonzero residual");
        acc += num / plan.pi[i];
    }
    const double n = static_cast<double>(data.n());
    return acc / (static_cast<double>(r) * n * n);
}

}  // namespace osmac
