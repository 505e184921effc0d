#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "folsim/errors.hpp"
#include "folsim/experiments.hpp"

using namespace folsim;

namespace {

FoliatedSystem vertical_cylinder(double k3 = 1.0, Interval z_range = {-2.0, 2.0},
                                 Interval r_range = {0.2, 4.0}) {
    CylinderParams params;
    params.kind = PerturbationKind::constant;
    params.k1 = 0.0;
    params.k2 = 0.0;
    params.k3 = k3;
    params.z_range = z_range;
    params.r_range = r_range;
    return make_cylinder_system(params, 0.0);
}

FoliatedSystem constant_cylinder() {
    CylinderParams params;
    params.kind = PerturbationKind::constant;
    params.k1 = 1.0;
    params.k2 = 0.0;
    params.k3 = 0.0;
    return make_cylinder_system(params, 0.0);
}

McOptions fast_opts() {
    McOptions opts;
    opts.threads = 2;
    opts.bootstrap_resamples = 200;
    return opts;
}

}  // namespace

TEST_CASE("coupled error vanishes at epsilon 0") {
    const FoliatedSystem sys = constant_cylinder();
    const auto f = [&](const Vec& p) { return sys.chart->project(p)[0]; };
    const CoupledErrorTable table =
        estimate_coupled_error(sys, f, {0.0}, {0.5}, 2.0, 8, 1, fast_opts());
    REQUIRE(table.rows.size() == 1);
    CHECK(table.rows[0].estimate.value == 0.0);
    CHECK(table.rows[0].estimate.ci_low == 0.0);
    CHECK(table.rows[0].estimate.ci_high == 0.0);
}

TEST_CASE("vertical K coupled error is exactly eps*k3*t with zero variance") {
    const FoliatedSystem sys = vertical_cylinder(1.0);
    const auto f = [&](const Vec& p) { return sys.chart->project(p)[1]; };  // pi_2 = z
    const std::vector<double> eps{0.2, 0.1, 0.05};
    const std::vector<double> ts{0.5, 1.0};
    const CoupledErrorTable table = estimate_coupled_error(sys, f, eps, ts, 2.0, 8, 1, fast_opts());
    for (const auto& row : table.rows) {
        CHECK(row.estimate.value ==
              doctest::Approx(row.epsilon * row.t).epsilon(1e-10));
        CHECK(row.estimate.ci_high - row.estimate.ci_low < 1e-12);
    }

    SUBCASE("the epsilon order is exactly one") {
        const RateFit fit = fit_epsilon_order(table, 1.0);
        CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-10));
    }

    SUBCASE("cor22 envelope dominates with max ratio at one") {
        const RateBound bound = fit_time_envelope(table, 0.1, EnvelopeForm::cor22);
        CHECK(bound.goodness == doctest::Approx(1.0));
        CHECK(bound.k1 <= 1.0 + 1e-12);  // K1 = k3 works, the fitted one is no larger
        for (const auto& row : table.rows)
            if (row.epsilon == 0.1)
                CHECK(bound.time_envelope(row.epsilon, row.t) >= row.estimate.value - 1e-12);
    }
}

TEST_CASE("estimate_coupled_error rejects p < 1 and tiny replica counts") {
    const FoliatedSystem sys = constant_cylinder();
    const auto f = [](const Vec& p) { return p[0]; };
    CHECK_THROWS_AS(estimate_coupled_error(sys, f, {0.1}, {1.0}, 0.5, 8, 1, fast_opts()),
                    ParameterError);
    CHECK_THROWS_AS(estimate_coupled_error(sys, f, {0.1}, {1.0}, 2.0, 1, 1, fast_opts()),
                    ParameterError);
}

TEST_CASE("exponential counterexample rejects the quadratic envelope") {
    // dy = y o dB + eps dt grows like exp(B_t); the cor22 shape cannot track it.
    const FoliatedSystem sys = make_scalar_linear_system(0.0, {-1.0, 1.0});
    const auto f = [](const Vec& p) { return p[0]; };
    McOptions opts = fast_opts();
    opts.dt = 1.0 / 128.0;
    const CoupledErrorTable table =
        estimate_coupled_error(sys, f, {0.1}, {1.0, 2.0, 4.0, 8.0}, 2.0, 50, 2, opts);
    CHECK_THROWS_AS(fit_time_envelope(table, 0.1, EnvelopeForm::cor22), EnvelopeError);
    // The exponential form absorbs the growth.
    const RateBound bound = fit_time_envelope(table, 0.1, EnvelopeForm::lemma21);
    CHECK(bound.k2 > 0.0);
    CHECK(bound.goodness <= 1.0 + 1e-12);
}

TEST_CASE("verify_theorem on the trivially convergent vertical case") {
    const FoliatedSystem sys = vertical_cylinder(1.0, {-1.0, 1.0}, {0.5, 1.5});
    const AveragedField q = averaged_field_quadrature(sys, 17, 32);
    const AveragedPath path =
        solve_averaged_ode(q, sys.chart->vertical_domain(), {1.0, 0.0}, 0.6, 1e-3);
    ErgodicRate eta;  // zero model

    const TheoremResult result =
        verify_theorem(sys, path, {0.2, 0.1}, 0.5, 2.0, 0.9, 0.4, eta, 8, 3, fast_opts());
    CHECK(result.trivially_zero);
    CHECK(result.no_inversion);
    for (const auto& row : result.rows) CHECK(row.estimate.value < 1e-9);
}

TEST_CASE("verify_theorem guards its preconditions") {
    const FoliatedSystem sys = vertical_cylinder(1.0, {-1.0, 1.0}, {0.5, 1.5});
    const AveragedField q = averaged_field_quadrature(sys, 9, 16);
    const AveragedPath path =
        solve_averaged_ode(q, sys.chart->vertical_domain(), {1.0, 0.0}, 2.0, 1e-3);
    ErgodicRate eta;
    REQUIRE(path.t0.has_value());  // z reaches the boundary at t = 1

    CHECK_THROWS_AS(
        verify_theorem(sys, path, {0.1}, 1.5, 2.0, 0.9, 0.4, eta, 4, 3, fast_opts()),
        HorizonError);
    CHECK_THROWS_AS(
        verify_theorem(sys, path, {0.1}, 0.5, 2.0, 1.5, 0.4, eta, 4, 3, fast_opts()),
        ParameterError);
    CHECK_THROWS_AS(
        verify_theorem(sys, path, {0.1}, 0.5, 2.0, 0.9, 0.7, eta, 4, 3, fast_opts()),
        ParameterError);
}

TEST_CASE("deterministic vertical exit never escapes before T_gamma") {
    const FoliatedSystem sys = vertical_cylinder(1.0, {-1.0, 1.0}, {0.5, 1.5});
    const AveragedField q = averaged_field_quadrature(sys, 17, 32);
    const AveragedPath path =
        solve_averaged_ode(q, sys.chart->vertical_domain(), {1.0, 0.0}, 2.0, 1e-3);
    REQUIRE(path.t0.has_value());
    CHECK(*path.t0 == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(path.t_gamma(0.25) == doctest::Approx(0.75).epsilon(1e-6));

    const ExitProbResult result = estimate_exit_probability(
        sys, path, 0.25, 2.0, {0.2, 0.1}, 16, 4, std::nullopt, fast_opts());
    CHECK(result.t_gamma == doctest::Approx(0.75).epsilon(1e-6));
    for (const auto& row : result.rows) {
        CHECK(row.exits == 0);
        CHECK(row.empirical == 0.0);
    }
    CHECK(result.bound_respected);
    CHECK(result.nonincreasing);

    CHECK_THROWS_AS(estimate_exit_probability(sys, path, -1.0, 2.0, {0.1}, 8, 4, std::nullopt,
                                              fast_opts()),
                    ParameterError);
}

TEST_CASE("exit probability needs a finite T_gamma") {
    const FoliatedSystem sys = constant_cylinder();  // averaged field vanishes
    const AveragedField q = averaged_field_quadrature(sys, 9, 16);
    const AveragedPath path =
        solve_averaged_ode(q, sys.chart->vertical_domain(), {1.0, 0.0}, 2.0, 1e-2);
    CHECK(!path.t0);
    CHECK(std::isinf(path.t_gamma(0.25)));
    CHECK_THROWS_AS(estimate_exit_probability(sys, path, 0.25, 2.0, {0.1}, 8, 4, std::nullopt,
                                              fast_opts()),
                    ParameterError);
    // With an explicit horizon the estimate runs.
    const ExitProbResult result = estimate_exit_probability(sys, path, 0.25, 2.0, {0.2}, 8, 4,
                                                            0.5, fast_opts());
    CHECK(result.t_gamma == 0.5);
}

TEST_CASE("lyapunov spectrum of the pure rotation is zero") {
    const FoliatedSystem sys = constant_cylinder();
    const auto spectrum = estimate_lyapunov(sys, 0.0, 200.0, 0.01, 5, 10, fast_opts());
    REQUIRE(spectrum.size() == 3);
    for (double l : spectrum) CHECK(std::abs(l) < 0.02);
    // Sorted descending.
    CHECK(spectrum[0] >= spectrum[1]);
    CHECK(spectrum[1] >= spectrum[2]);
}

TEST_CASE("lyapunov requires Jacobians") {
    FoliatedSystem sys = constant_cylinder();
    sys.diffusion[0].jacobian = nullptr;
    CHECK_THROWS_AS(estimate_lyapunov(sys, 0.1, 10.0, 0.01, 5, 10, fast_opts()), JacobianMissing);
}

TEST_CASE("fit_system_eta returns the zero model for a vertical constant K") {
    const FoliatedSystem sys = vertical_cylinder(1.0);
    McOptions opts = fast_opts();
    const ErgodicRate eta = fit_system_eta(sys, 4, 50.0, 0.01, 6, 2.0, 1.0, opts);
    CHECK(eta.model == ErgodicRate::Model::zero);
}

TEST_CASE("delta estimates decrease as epsilon shrinks") {
    CylinderParams params;
    params.kind = PerturbationKind::linear_x;
    const FoliatedSystem sys = make_cylinder_system(params, 0.0);
    const DeltaResult result =
        estimate_delta(sys, 0, {0.2, 0.05}, 0.0, 1.0, 2.0, 24, 7, fast_opts());
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[1].estimate.value < result.rows[0].estimate.value);
    CHECK(result.no_inversion);
}

TEST_CASE("replica reductions are independent of the thread count") {
    const FoliatedSystem sys = constant_cylinder();
    const auto f = [&](const Vec& p) { return sys.chart->project(p)[0]; };
    McOptions one = fast_opts();
    one.threads = 1;
    McOptions two = fast_opts();
    two.threads = 2;
    const CoupledErrorTable a = estimate_coupled_error(sys, f, {0.1, 0.05}, {1.0}, 2.0, 32, 9, one);
    const CoupledErrorTable b = estimate_coupled_error(sys, f, {0.1, 0.05}, {1.0}, 2.0, 32, 9, two);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].estimate.value == b.rows[i].estimate.value);
        CHECK(a.rows[i].estimate.ci_low == b.rows[i].estimate.ci_low);
        CHECK(a.rows[i].estimate.ci_high == b.rows[i].estimate.ci_high);
    }
}
