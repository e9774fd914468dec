#pragma once

#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "osmac/dataset.hpp"
#include "osmac/errors.hpp"
#include "osmac/glm.hpp"
#include "osmac/rng.hpp"

namespace osmac {

/// One synthetic design: covariate family, row count and the coefficient
/// vector the responses are generated under.
struct Scenario {
    enum class Kind {
        MzNormal,    // N(0, Sigma), equicorrelated 0.5
        NzNormal,    // N(1.5 * 1, Sigma); ~95% ones
        UeNormal,    // zero mean, sd_j = j, correlation 0.5
        MixNormal,   // 0.5 N(+1, Sigma) + 0.5 N(-1, Sigma)
        T3,          // multivariate t_3(0, Sigma) / 10
        Exp,         // iid Exponential(rate 2) components
        RareNormalMean,  // N(mu * 1, Sigma) with mu far negative; rare ones
        RareUnivariate,  // intercept + N(0,1) covariate, beta = (b0, 1)
    };

    Kind kind;
    Eigen::Index n;
    double param = 0.0;  // mean shift (RareNormalMean) or intercept (RareUnivariate)

    static constexpr Eigen::Index kMainDim = 7;

    static Scenario mz_normal(Eigen::Index n) { return {Kind::MzNormal, n}; }
    static Scenario nz_normal(Eigen::Index n) { return {Kind::NzNormal, n}; }
    static Scenario ue_normal(Eigen::Index n) { return {Kind::UeNormal, n}; }
    static Scenario mix_normal(Eigen::Index n) { return {Kind::MixNormal, n}; }
    static Scenario t3(Eigen::Index n) { return {Kind::T3, n}; }
    static Scenario exponential(Eigen::Index n) { return {Kind::Exp, n}; }
    static Scenario rare_normal_mean(double mu, Eigen::Index n) {
        return {Kind::RareNormalMean, n, mu};
    }
    static Scenario rare_univariate(double beta0, Eigen::Index n) {
        return {Kind::RareUnivariate, n, beta0};
    }

    Eigen::Index d() const {
        return kind == Kind::RareUnivariate ? 2 : kMainDim;
    }

    VectorXd beta_true() const {
        if (kind == Kind::RareUnivariate) {
            VectorXd b(2);
            b << param, 1.0;
            return b;
        }
        return VectorXd::Constant(kMainDim, 0.5);
    }

    static Scenario from_name(const std::string& name, Eigen::Index n,
                              double param = 0.0) {
        if (name == "mzNormal") return mz_normal(n);
        if (name == "nzNormal") return nz_normal(n);
        if (name == "ueNormal") return ue_normal(n);
        if (name == "mixNormal") return mix_normal(n);
        if (name == "T3") return t3(n);
        if (name == "EXP") return exponential(n);
        if (name == "rareNormalMean") return rare_normal_mean(param, n);
        if (name == "rareUnivariate") return rare_univariate(param, n);
        throw SpecError("unknown scenario '" + name + "'");
    }
};

namespace detail {

// Equicorrelation(0.5) covariance with unit or per-component scales.
inline MatrixXd scenario_covariance(Eigen::Index d, bool unequal_scales) {
    MatrixXd cov(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double si = unequal_scales ? static_cast<double>(i + 1) : 1.0;
        for (Eigen::Index j = 0; j < d; ++j) {
            const double sj = unequal_scales ? static_cast<double>(j + 1) : 1.0;
            cov(i, j) = (i == j ? 1.0 : 0.5) * si * sj;
        }
    }
    return cov;
}

}  // namespace detail

/// Draws a dataset for the scenario: covariates per the family, responses
/// Bernoulli with success probability p_i(beta_true). Deterministic given
/// the Rng state.
inline Dataset generate(const Scenario& scn, Rng& rng) {
    if (scn.n < 1) throw Error("need n >= 1");
    const Eigen::Index n = scn.n;
    const Eigen::Index d = scn.d();
    RowMatrixXd x(n, d);

    using Kind = Scenario::Kind;
    switch (scn.kind) {
        case Kind::MzNormal:
        case Kind::NzNormal:
        case Kind::UeNormal:
        case Kind::MixNormal:
        case Kind::RareNormalMean: {
            const MatrixXd chol =
                detail::scenario_covariance(d, scn.kind == Kind::UeNormal)
                    .llt()
                    .matrixL();
            double shift = 0.0;
            if (scn.kind == Kind::NzNormal) shift = 1.5;
            if (scn.kind == Kind::RareNormalMean) shift = scn.param;
            VectorXd z(d);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.standard_normal();
                x.row(i) = (chol * z).transpose();
                if (scn.kind == Kind::MixNormal)
                    x.row(i).array() += rng.uniform01() < 0.5 ? 1.0 : -1.0;
                else
                    x.row(i).array() += shift;
            }
            break;
        }
        case Kind::T3: {
            const MatrixXd chol =
                detail::scenario_covariance(d, false).llt().matrixL();
            VectorXd z(d);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < d; ++j) z[j] = rng.standard_normal();
                const double w = rng.chi_square(3.0);  // shared across the row
                x.row(i) = (chol * z).transpose() / std::sqrt(w / 3.0) / 10.0;
            }
            break;
        }
        case Kind::Exp: {
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < d; ++j)
                    x(i, j) = rng.exponential(2.0);
            break;
        }
        case Kind::RareUnivariate: {
            for (Eigen::Index i = 0; i < n; ++i) {
                x(i, 0) = 1.0;
                x(i, 1) = rng.standard_normal();
            }
            break;
        }
    }

    const VectorXd beta = scn.beta_true();
    const VectorXd eta = x * beta;
    VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i)
        y[i] = rng.uniform01() < sigmoid(eta[i]) ? 1.0 : 0.0;
    return Dataset(std::move(x), std::move(y));
}

}  // namespace osmac
