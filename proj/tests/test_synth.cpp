#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "osmac/synth.hpp"

using namespace osmac;

namespace {

double col_mean(const Dataset& data, Eigen::Index j) { return data.x().col(j).mean(); }

double col_var(const Dataset& data, Eigen::Index j) {
    const double m = col_mean(data, j);
    return (data.x().col(j).array() - m).square().sum() /
           static_cast<double>(data.n() - 1);
}

double col_corr(const Dataset& data, Eigen::Index a, Eigen::Index b) {
    const double ma = col_mean(data, a), mb = col_mean(data, b);
    const auto ca = data.x().col(a).array() - ma;
    const auto cb = data.x().col(b).array() - mb;
    return (ca * cb).sum() / std::sqrt(ca.square().sum() * cb.square().sum());
}

double col_kurtosis(const Dataset& data, Eigen::Index j) {
    const double m = col_mean(data, j);
    const auto c = data.x().col(j).array() - m;
    const double n = static_cast<double>(data.n());
    const double v = c.square().sum() / n;
    return c.pow(4).sum() / n / (v * v);
}

double ones_fraction(const Dataset& data) {
    return data.y().sum() / static_cast<double>(data.n());
}

}  // namespace

TEST_CASE("centered equicorrelated normal scenario") {
    Rng rng(11);
    const Dataset data = generate(Scenario::mz_normal(100000), rng);
    REQUIRE(data.d() == 7);
    REQUIRE(std::fabs(col_mean(data, 0)) < 0.02);
    REQUIRE(std::fabs(col_mean(data, 6)) < 0.02);
    REQUIRE(std::fabs(col_var(data, 3) - 1.0) < 0.03);
    REQUIRE(std::fabs(col_corr(data, 0, 1) - 0.5) < 0.01);
    REQUIRE(std::fabs(col_corr(data, 2, 6) - 0.5) < 0.01);
    REQUIRE(std::fabs(ones_fraction(data) - 0.5) < 0.01);
}

TEST_CASE("shifted normal scenario is heavily imbalanced") {
    Rng rng(12);
    const Dataset data = generate(Scenario::nz_normal(100000), rng);
    REQUIRE(std::fabs(col_mean(data, 0) - 1.5) < 0.02);
    REQUIRE(std::fabs(ones_fraction(data) - 0.95) < 0.01);
}

TEST_CASE("unequal-variance scenario scales column j by j") {
    Rng rng(13);
    const Dataset data = generate(Scenario::ue_normal(100000), rng);
    for (Eigen::Index j = 0; j < 7; ++j) {
        const double want = static_cast<double>((j + 1) * (j + 1));
        REQUIRE(std::fabs(col_var(data, j) / want - 1.0) < 0.03);
    }
    REQUIRE(std::fabs(col_corr(data, 0, 6) - 0.5) < 0.01);
}

TEST_CASE("two-component mixture scenario is centered with inflated variance") {
    Rng rng(14);
    const Dataset data = generate(Scenario::mix_normal(100000), rng);
    REQUIRE(std::fabs(col_mean(data, 0)) < 0.03);
    // variance = within-component 1 + between-component 1
    REQUIRE(std::fabs(col_var(data, 0) - 2.0) < 0.06);
    REQUIRE(std::fabs(col_var(data, 5) - 2.0) < 0.06);
    REQUIRE(std::fabs(ones_fraction(data) - 0.5) < 0.01);
}

TEST_CASE("heavy-tailed scenario has excess kurtosis") {
    Rng rng(15);
    const Dataset data = generate(Scenario::t3(100000), rng);
    REQUIRE(std::fabs(col_mean(data, 0)) < 0.01);
    for (Eigen::Index j = 0; j < 7; ++j) REQUIRE(col_kurtosis(data, j) > 4.0);
}

TEST_CASE("exponential covariate scenario") {
    Rng rng(16);
    const Dataset data = generate(Scenario::exponential(100000), rng);
    REQUIRE(data.x().minCoeff() >= 0.0);
    REQUIRE(std::fabs(col_mean(data, 2) - 0.5) < 0.01);
    REQUIRE(std::fabs(ones_fraction(data) - 0.84) < 0.01);
}

TEST_CASE("rare-event mean shifts set the ones fraction") {
    Rng rng(17);
    const Dataset mild = generate(Scenario::rare_normal_mean(-2.14, 100000), rng);
    REQUIRE(std::fabs(ones_fraction(mild) - 0.0101) < 0.003);
    Rng rng2(18);
    const Dataset severe = generate(Scenario::rare_normal_mean(-2.9, 100000), rng2);
    REQUIRE(ones_fraction(severe) > 0.0008);
    REQUIRE(ones_fraction(severe) < 0.0022);
}

TEST_CASE("univariate intercept scenario shape") {
    const Scenario scn = Scenario::rare_univariate(-4.0, 5000);
    REQUIRE(scn.d() == 2);
    REQUIRE(scn.beta_true()[0] == -4.0);
    REQUIRE(scn.beta_true()[1] == 1.0);
    Rng rng(19);
    const Dataset data = generate(scn, rng);
    REQUIRE((data.x().col(0).array() == 1.0).all());
    REQUIRE(ones_fraction(data) < 0.1);
    REQUIRE(ones_fraction(data) > 0.0);
}

TEST_CASE("main scenarios share the constant coefficient vector") {
    for (const Scenario& scn :
         {Scenario::mz_normal(10), Scenario::ue_normal(10), Scenario::t3(10),
          Scenario::exponential(10)}) {
        const VectorXd b = scn.beta_true();
        REQUIRE(b.size() == 7);
        REQUIRE((b.array() == 0.5).all());
    }
}

TEST_CASE("generation is reproducible and stream-sensitive") {
    Rng a(77), b(77), c(77, 1);
    const Dataset da = generate(Scenario::mix_normal(500), a);
    const Dataset db = generate(Scenario::mix_normal(500), b);
    const Dataset dc = generate(Scenario::mix_normal(500), c);
    REQUIRE(da.x() == db.x());
    REQUIRE(da.y() == db.y());
    REQUIRE(da.x() != dc.x());
}

TEST_CASE("scenario names round-trip") {
    REQUIRE(Scenario::from_name("mzNormal", 100).kind == Scenario::Kind::MzNormal);
    REQUIRE(Scenario::from_name("nzNormal", 100).kind == Scenario::Kind::NzNormal);
    REQUIRE(Scenario::from_name("ueNormal", 100).kind == Scenario::Kind::UeNormal);
    REQUIRE(Scenario::from_name("mixNormal", 100).kind == Scenario::Kind::MixNormal);
    REQUIRE(Scenario::from_name("T3", 100).kind == Scenario::Kind::T3);
    REQUIRE(Scenario::from_name("EXP", 100).kind == Scenario::Kind::Exp);
    const Scenario rare = Scenario::from_name("rareNormalMean", 100, -2.9);
    REQUIRE(rare.kind == Scenario::Kind::RareNormalMean);
    REQUIRE(rare.param == -2.9);
    REQUIRE(Scenario::from_name("rareUnivariate", 100, -5.0).kind ==
            Scenario::Kind::RareUnivariate);
    REQUIRE_THROWS_AS(Scenario::from_name("bogus", 100), SpecError);
}
