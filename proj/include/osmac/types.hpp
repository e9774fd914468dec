#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "osmac/errors.hpp"

namespace osmac {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class Scheme { Uniform, CaseControl, MMSE, MVc, LCCAcceptance };

inline const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Uniform: return "uniform";
        case Scheme::CaseControl: return "case_control";
        case Scheme::MMSE: return "mmse";
        case Scheme::MVc: return "mvc";
        case Scheme::LCCAcceptance: return "lcc_acceptance";
    }
    return "?";
}

/// A probability vector over the n full-data rows plus the scheme that built
/// it. Replacement schemes sum to 1; LCCAcceptance entries are per-row
/// Poisson acceptance probabilities in [0,1] and need not sum to 1.
struct SamplingPlan {
    VectorXd pi;
    Scheme scheme;
    std::optional<VectorXd> pilot;  // coefficients the plan was built at

    SamplingPlan(VectorXd p, Scheme s, std::optional<VectorXd> b = std::nullopt)
        : pi(std::move(p)), scheme(s), pilot(std::move(b)) {
        validate();
    }

    bool is_replacement_scheme() const { return scheme != Scheme::LCCAcceptance; }

    void validate() const {
        for (Eigen::Index i = 0; i < pi.size(); ++i) {
            if (!(pi[i] >= 0.0) || !std::isfinite(pi[i]))
                throw NotNormalizedError("negative or non-finite probability");
            if (scheme == Scheme::LCCAcceptance && pi[i] > 1.0)
                throw NotNormalizedError("acceptance probability above 1");
        }
        if (is_replacement_scheme() && std::abs(pi.sum() - 1.0) > 1e-12 * pi.size())
            throw NotNormalizedError("plan does not sum to 1");
    }
};

enum class StepTag : std::uint8_t { Step1 = 1, Step2 = 2 };

/// Row indices drawn from a parent dataset (repetition allowed), each paired
/// with the probability it was drawn under and the step that drew it.
struct Subsample {
    std::vector<Eigen::Index> indices;
    std::vector<double> probs;
    std::vector<StepTag> tags;

    std::size_t size() const { return indices.size(); }

    void validate(Eigen::Index n) const {
        if (indices.size() != probs.size() || indices.size() != tags.size())
            throw Error("subsample field lengths differ");
        for (std::size_t i = 0; i < indices.size(); ++i) {
            if (indices[i] < 0 || indices[i] >= n)
                throw Error("subsample index out of range");
            if (!(probs[i] > 0.0))
                throw Error("subsample probability not positive");
        }
    }

    /// Concatenation preserving per-row draw probabilities and tags.
    static Subsample pooled(const Subsample& a, const Subsample& b) {
        Subsample out = a;
        out.indices.insert(out.indices.end(), b.indices.begin(), b.indices.end());
        out.probs.insert(out.probs.end(), b.probs.begin(), b.probs.end());
        out.tags.insert(out.tags.end(), b.tags.begin(), b.tags.end());
        return out;
    }
};

/// Output of a (weighted) MLE solve.
struct FitResult {
    VectorXd beta;
    bool converged = false;
    int iterations = 0;
    bool separation_detected = false;
    std::optional<MatrixXd> vcov;
    std::optional<VectorXd> se;
};

}  // namespace osmac
