#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hdsopt/rng.hpp"
#include "hdsopt/stats.hpp"

using namespace hdsopt;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("regularized incomplete gamma matches closed forms", "[stats]") {
    // P(1, x) = 1 - exp(-x)
    for (double x : {0.1, 0.5, 1.0, 3.0, 10.0})
        REQUIRE_THAT(gamma_p(1.0, x), WithinRel(1.0 - std::exp(-x), 1e-12));
    // chi2 with 2 dof: CDF(x) = 1 - exp(-x/2)
    REQUIRE_THAT(chi2_cdf(3.0, 2.0), WithinRel(1.0 - std::exp(-1.5), 1e-12));
}

TEST_CASE("chi-squared quantiles match reference values", "[stats]") {
    REQUIRE_THAT(chi2_quantile(0.95, 1), WithinRel(3.841458820694124, 1e-9));
    REQUIRE_THAT(chi2_quantile(0.95, 2), WithinRel(5.991464547107979, 1e-9));
    REQUIRE_THAT(chi2_quantile(0.95, 10), WithinRel(18.307038053275146, 1e-9));
    REQUIRE_THAT(chi2_quantile(0.95, 345), WithinRel(389.3135748864241, 1e-9));
    // quantile and CDF are inverse
    REQUIRE_THAT(chi2_cdf(chi2_quantile(0.3, 7), 7.0), WithinAbs(0.3, 1e-10));
}

TEST_CASE("gaussian log pdf", "[stats]") {
    REQUIRE_THAT(gauss_log_pdf(0.0, 0.0, 1.0), WithinRel(-0.9189385332046727, 1e-12));
    REQUIRE_THAT(gauss_log_pdf(2.0, 1.0, 4.0),
                 WithinRel(-0.5 * std::log(8.0 * std::numbers::pi) - 0.125, 1e-12));
    REQUIRE_THROWS_AS(gauss_log_pdf(0.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("linear fit recovers exact lines", "[stats]") {
    std::vector<double> x{1, 2, 3, 4, 5};
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 * v - 2.0);
    const auto fit = linear_fit(x, y);
    REQUIRE_THAT(fit.slope, WithinRel(3.0, 1e-12));
    REQUIRE_THAT(fit.intercept, WithinAbs(-2.0, 1e-10));
    REQUIRE_THAT(fit.r_squared, WithinAbs(1.0, 1e-12));
}

TEST_CASE("running stats", "[stats]") {
    RunningStats s;
    for (double v : {2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0}) s.add(v);
    REQUIRE_THAT(s.mean(), WithinRel(5.0, 1e-12));
    REQUIRE_THAT(s.variance(), WithinRel(32.0 / 7.0, 1e-12));
}

TEST_CASE("ceil_log2", "[stats]") {
    REQUIRE(ceil_log2(1) == 0);
    REQUIRE(ceil_log2(2) == 1);
    REQUIRE(ceil_log2(3) == 2);
    REQUIRE(ceil_log2(200) == 8);
    REQUIRE(ceil_log2(256) == 8);
}

TEST_CASE("rng streams are reproducible and distinct", "[stats]") {
    Rng a(42), b(42);
    REQUIRE(a.uniform() == b.uniform());
    REQUIRE(a.normal() == b.normal());
    Rng c1 = Rng(42).child("alpha");
    Rng c2 = Rng(42).child("beta");
    REQUIRE(c1.uniform() != c2.uniform());
    // child derivation does not disturb the parent stream
    Rng p(7);
    const double before = Rng(7).uniform();
    (void)p.child("x");
    REQUIRE(p.uniform() == before);
}
