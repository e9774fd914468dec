#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "osmac/errors.hpp"
#include "osmac/rng.hpp"
#include "osmac/types.hpp"

namespace osmac {

/// Walker/Vose alias table: O(n) construction, O(1) per draw. Immutable and
/// concurrently readable once built.
class AliasTable {
  public:
    explicit AliasTable(const SamplingPlan& plan) {
        if (!plan.is_replacement_scheme())
            throw WrongSchemeError("alias table needs a replacement scheme");
        const double sum = plan.pi.sum();
        if (std::abs(sum - 1.0) > 1e-9)
            throw NotNormalizedError("plan does not sum to 1");

        const std::size_t n = static_cast<std::size_t>(plan.pi.size());
        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        std::vector<double> scaled(n);
        std::vector<std::uint64_t> small, large;
        small.reserve(n);
        large.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            scaled[i] = plan.pi[static_cast<Eigen::Index>(i)] * static_cast<double>(n) / sum;
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            const std::uint64_t s = small.back();
            const std::uint64_t l = large.back();
            small.pop_back();
            large.pop_back();
            prob_[s] = scaled[s];
            alias_[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            (scaled[l] < 1.0 ? small : large).push_back(l);
        }
        // Leftovers are 1.0 up to rounding.
        for (std::uint64_t i : large) prob_[i] = 1.0;
        for (std::uint64_t i : small) prob_[i] = 1.0;
    }

    std::size_t n() const { return prob_.size(); }

    Eigen::Index draw(Rng& rng) const {
        const std::uint64_t cell = rng.bounded(prob_.size());
        const double u = rng.uniform01();
        return static_cast<Eigen::Index>(u < prob_[cell] ? cell : alias_[cell]);
    }

    /// Exact per-index probability implied by (prob, alias): what a draw
    /// actually targets, reconstructed analytically from the table.
    std::vector<double> implied_probabilities() const {
        std::vector<double> p(n(), 0.0);
        const double cell_mass = 1.0 / static_cast<double>(n());
        for (std::size_t i = 0; i < n(); ++i) {
            p[i] += prob_[i] * cell_mass;
            p[alias_[i]] += (1.0 - prob_[i]) * cell_mass;
        }
        return p;
    }

    const std::vector<double>& prob() const { return prob_; }
    const std::vector<std::uint64_t>& alias() const { return alias_; }

  private:
    std::vector<double> prob_;
    std::vector<std::uint64_t> alias_;
};

inline AliasTable build_alias(const SamplingPlan& plan) { return AliasTable(plan); }

/// r i.i.d. indices from the plan, with each draw's probability recorded.
inline Subsample draw_with_replacement(const AliasTable& table, const SamplingPlan& plan,
                                       Eigen::Index r, Rng& rng, StepTag tag) {
    if (r < 1) throw Error("need r >= 1");
    Subsample sub;
    sub.indices.reserve(static_cast<std::size_t>(r));
    sub.probs.reserve(static_cast<std::size_t>(r));
    sub.tags.assign(static_cast<std::size_t>(r), tag);
    for (Eigen::Index k = 0; k < r; ++k) {
        const Eigen::Index i = table.draw(rng);
        sub.indices.push_back(i);
        sub.probs.push_back(plan.pi[i]);
    }
    return sub;
}

/// Independent per-row inclusion with probability pi_i (Poisson sampling).
inline Subsample draw_poisson(const SamplingPlan& plan, Rng& rng,
                              StepTag tag = StepTag::Step2) {
    if (plan.scheme != Scheme::LCCAcceptance)
        throw WrongSchemeError("Poisson draw needs acceptance probabilities");
    Subsample sub;
    for (Eigen::Index i = 0; i < plan.pi.size(); ++i) {
        if (rng.uniform01() < plan.pi[i]) {
            sub.indices.push_back(i);
            sub.probs.push_back(plan.pi[i]);
            sub.tags.push_back(tag);
        }
    }
    return sub;
}

}  // namespace osmac
