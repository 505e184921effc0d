#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "folsim/errors.hpp"
#include "folsim/noise.hpp"
#include "folsim/stats.hpp"

using namespace folsim;

TEST_CASE("regeneration is bit-exact for the same (seed, replica)") {
    const NoisePath a = generate_noise(42, 0, 2, 0.01, 1000);
    const NoisePath b = generate_noise(42, 0, 2, 0.01, 1000);
    REQUIRE(a.increments.size() == b.increments.size());
    for (std::size_t i = 0; i < a.increments.size(); ++i) CHECK(a.increments[i] == b.increments[i]);
}

TEST_CASE("distinct replicas decorrelate") {
    const int n = 100000;
    const NoisePath a = generate_noise(42, 0, 1, 0.01, n);
    const NoisePath b = generate_noise(42, 1, 1, 0.01, n);

    // Sample correlation of the two increment streams.
    double saa = 0.0, sbb = 0.0, sab = 0.0, sa = 0.0, sb = 0.0;
    for (int i = 0; i < n; ++i) {
        sa += a.increments[i];
        sb += b.increments[i];
        saa += a.increments[i] * a.increments[i];
        sbb += b.increments[i] * b.increments[i];
        sab += a.increments[i] * b.increments[i];
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double corr = cov / std::sqrt((saa / n - sa / n * (sa / n)) * (sbb / n - sb / n * (sb / n)));
    CHECK(std::abs(corr) < 0.01);
}

TEST_CASE("increment moments match N(0, dt)") {
    const double dt = 0.01;
    const int n = 100000;
    const NoisePath path = generate_noise(7, 3, 1, dt, n);

    double s = 0.0, s2 = 0.0;
    for (double x : path.increments) {
        s += x;
        s2 += x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;

    // Mean within 3 standard errors of 0; variance within the chi-squared
    // band [0.0097, 0.0103] at this sample size.
    CHECK(std::abs(mean) < 3.0 * std::sqrt(dt / n));
    CHECK(var > 0.0097);
    CHECK(var < 0.0103);
}

TEST_CASE("parameter validation") {
    CHECK_THROWS_AS(generate_noise(1, 0, 1, 0.0, 10), ParameterError);
    CHECK_THROWS_AS(generate_noise(1, 0, 1, -0.1, 10), ParameterError);
    CHECK_THROWS_AS(generate_noise(1, 0, 1, 0.1, 0), ParameterError);
    CHECK_THROWS_AS(generate_noise(1, 0, 0, 0.1, 10), ParameterError);
}

TEST_CASE("coarsening preserves the Brownian endpoint") {
    const NoisePath fine = generate_noise(11, 5, 2, 0.005, 400);
    const NoisePath coarse = fine.coarsened(4);
    CHECK(coarse.steps == 100);
    CHECK(coarse.dt == doctest::Approx(0.02));
    for (int k = 0; k < 2; ++k)
        CHECK(coarse.endpoint(k) == doctest::Approx(fine.endpoint(k)).epsilon(1e-12));
    CHECK_THROWS_AS(fine.coarsened(3), ParameterError);
}

TEST_CASE("counter rng is stateless and order-independent") {
    const CounterRng rng(123, 4);
    const double late = rng.gaussian(999);
    const double early = rng.gaussian(0);
    CHECK(rng.gaussian(0) == early);
    CHECK(rng.gaussian(999) == late);
}
