#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "folsim/averaging.hpp"
#include "folsim/errors.hpp"
#include "folsim/systems.hpp"

using namespace folsim;

namespace {

FoliatedSystem cylinder_with(PerturbationKind kind, double k1 = 1.0, double k2 = 0.0,
                             double k3 = 0.0, double lambda1 = 1.0, double lambda2 = 1.0) {
    CylinderParams params;
    params.lambda1 = lambda1;
    params.lambda2 = lambda2;
    params.kind = kind;
    params.k1 = k1;
    params.k2 = k2;
    params.k3 = k3;
    return make_cylinder_system(params, 0.0);
}

}  // namespace

TEST_CASE("leaf averages on the cylinder") {
    SUBCASE("constant horizontal K averages to zero in both components") {
        const FoliatedSystem sys = cylinder_with(PerturbationKind::constant, 0.7, -0.4, 0.0);
        for (double r : {0.5, 1.0, 2.0}) {
            CHECK(std::abs(leaf_average_quadrature(sys, sys.vertical_component(0), {r, 0.3}, 64)) <
                  1e-10);
            CHECK(std::abs(leaf_average_quadrature(sys, sys.vertical_component(1), {r, 0.3}, 64)) <
                  1e-10);
        }
    }

    SUBCASE("linear K averages to r/2 in the radial component") {
        const FoliatedSystem sys = cylinder_with(PerturbationKind::linear_x);
        for (double r : {0.5, 1.0, 2.0}) {
            CHECK(leaf_average_quadrature(sys, sys.vertical_component(0), {r, 0.0}, 64) ==
                  doctest::Approx(r / 2.0).epsilon(1e-10));
            CHECK(std::abs(leaf_average_quadrature(sys, sys.vertical_component(1), {r, 0.0}, 64)) <
                  1e-10);
        }
    }

    SUBCASE("a constant function averages to itself") {
        const FoliatedSystem sys = cylinder_with(PerturbationKind::constant);
        const auto g = [](const Vec&) { return 3.25; };
        CHECK(leaf_average_quadrature(sys, g, {1.0, 0.0}, 16) == doctest::Approx(3.25));
    }

    SUBCASE("doubling the node count changes nothing for smooth integrands") {
        const FoliatedSystem sys = cylinder_with(PerturbationKind::linear_x);
        const auto g = [](const Vec& p) { return std::exp(std::sin(p[0]) + 0.2 * p[1]); };
        const double a = leaf_average_quadrature(sys, g, {1.3, 0.4}, 32);
        const double b = leaf_average_quadrature(sys, g, {1.3, 0.4}, 64);
        CHECK(a == doctest::Approx(b).epsilon(1e-8));
    }

    SUBCASE("sphere leaf averages") {
        SphereParams params;
        params.kind = PerturbationKind::linear_x;
        const FoliatedSystem sys = make_sphere_system(params, 0.0);
        // E[x^2]/r over the sphere of radius r is r/3.
        for (double r : {0.5, 1.0, 2.0})
            CHECK(leaf_average_quadrature(sys, sys.vertical_component(0), {r}, 48) ==
                  doctest::Approx(r / 3.0).epsilon(1e-8));
    }

    SUBCASE("no declared measure raises MeasureUnknown") {
        const FoliatedSystem sys = make_scalar_linear_system(0.0);
        CHECK_THROWS_AS(
            leaf_average_quadrature(sys, sys.vertical_component(0), {0.0}, 32), MeasureUnknown);
    }
}

TEST_CASE("quadrature-tabulated averaged field") {
    const FoliatedSystem sys = cylinder_with(PerturbationKind::linear_x);
    const AveragedField q = averaged_field_quadrature(sys, 33, 64);

    // Q(v) = (r/2, 0) is linear, so the interpolation is exact.
    for (double r : {0.5, 1.1, 2.7}) {
        const Vec qv = q.eval({r, 0.2});
        CHECK(qv[0] == doctest::Approx(r / 2.0).epsilon(1e-9));
        CHECK(std::abs(qv[1]) < 1e-9);
    }
    REQUIRE(q.lipschitz_estimate.has_value());
    CHECK(*q.lipschitz_estimate == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("running time average along the unperturbed flow") {
    SUBCASE("constant g has a constant running average") {
        const FoliatedSystem sys = cylinder_with(PerturbationKind::constant);
        const auto g = [](const Vec&) { return 2.0; };
        const RunningAverage avg =
            leaf_average_timeseries(sys, g, {1.0, 0.0, 0.0}, 50.0, 0.01, 1, 0);
        for (double v : avg.values) CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
    }

    SUBCASE("periodic rotation converges at rate 1/T") {
        const FoliatedSystem sys =
            cylinder_with(PerturbationKind::linear_x, 0, 0, 0, /*lambda1=*/1.0, /*lambda2=*/0.0);
        const auto g = sys.vertical_component(0);  // r cos^2(u), average 1/2 at r=1
        const RunningAverage avg =
            leaf_average_timeseries(sys, g, {1.0, 0.0, 0.0}, 100.0, 0.005, 1, 0);
        CHECK(avg.estimate == doctest::Approx(0.5).epsilon(0.01));
    }

    SUBCASE("elliptic rotation converges to the same limit") {
        const FoliatedSystem sys =
            cylinder_with(PerturbationKind::linear_x, 0, 0, 0, /*lambda1=*/0.0, /*lambda2=*/1.0);
        const auto g = sys.vertical_component(0);
        std::vector<double> estimates;
        for (int rep = 0; rep < 16; ++rep)
            estimates.push_back(
                leaf_average_timeseries(sys, g, {1.0, 0.0, 0.0}, 400.0, 0.01, 77, rep).estimate);
        double mean = 0.0;
        for (double e : estimates) mean += e / estimates.size();
        CHECK(mean == doctest::Approx(0.5).epsilon(0.08));
    }
}

TEST_CASE("fit_eta") {
    SUBCASE("constant g yields the zero model") {
        const FoliatedSystem sys = cylinder_with(PerturbationKind::constant, 0.0, 0.0, 1.0);
        const auto g = sys.vertical_component(1);  // identically k3
        std::vector<RunningAverage> curves;
        for (int rep = 0; rep < 4; ++rep)
            curves.push_back(leaf_average_timeseries(sys, g, {1.0, 0.0, 0.0}, 50.0, 0.01, 5, rep));
        const ErgodicRate rate = fit_eta(curves, 1.0, 2.0, 1.0);
        CHECK(rate.model == ErgodicRate::Model::zero);
        CHECK(rate.eval(10.0) == 0.0);
    }

    SUBCASE("periodic case fits q near 1") {
        const FoliatedSystem sys =
            cylinder_with(PerturbationKind::linear_x, 0, 0, 0, 1.0, 0.0);
        const auto g = sys.vertical_component(0);
        std::vector<RunningAverage> curves;
        for (int rep = 0; rep < 4; ++rep)
            curves.push_back(
                leaf_average_timeseries(sys, g, {1.0, 0.0, 0.0}, 400.0, 0.005, 11, rep));
        const ErgodicRate rate = fit_eta(curves, 0.5, 2.0, 5.0);
        REQUIRE(rate.model == ErgodicRate::Model::power);
        CHECK(rate.q > 0.8);
        CHECK(rate.q < 1.2);
    }
}

TEST_CASE("averaged ODE solver") {
    const Box domain({{0.2, 4.0}, {-2.0, 2.0}});

    SUBCASE("zero field keeps the path constant") {
        AveragedField q;
        q.eval = [](const Vec&) { return Vec{0.0, 0.0}; };
        const AveragedPath path = solve_averaged_ode(q, domain, {1.0, 0.5}, 3.0, 1e-2);
        CHECK(!path.t0);
        for (const Vec& v : path.values) {
            CHECK(v[0] == 1.0);
            CHECK(v[1] == 0.5);
        }
    }

    SUBCASE("constant field integrates exactly and detects the boundary hit") {
        AveragedField q;
        q.eval = [](const Vec&) { return Vec{0.0, 1.0}; };  // v(t) = (r0, z0 + t)
        const AveragedPath path = solve_averaged_ode(q, domain, {1.0, 0.0}, 5.0, 1e-2);
        REQUIRE(path.t0.has_value());
        CHECK(*path.t0 == doctest::Approx(2.0).epsilon(1e-9));
        const Vec mid = path.value_at(1.0);
        CHECK(mid[1] == doctest::Approx(1.0).epsilon(1e-12));
        // T_gamma = inf{ t : dist(v(t), boundary) <= gamma } = (2 - 0.8) - ...
        // with r-distance 0.8 fixed, z governs for gamma < 0.8.
        CHECK(path.t_gamma(0.25) == doctest::Approx(2.0 - 0.25).epsilon(1e-6));
        CHECK(path.t_gamma(0.5) == doctest::Approx(1.5).epsilon(1e-6));
        // gamma above the radial clearance is reached immediately.
        CHECK(path.t_gamma(0.9) == doctest::Approx(0.0));
    }

    SUBCASE("T_gamma is nonincreasing in gamma") {
        AveragedField q;
        q.eval = [](const Vec&) { return Vec{0.0, 0.7}; };
        const AveragedPath path = solve_averaged_ode(q, domain, {1.0, 0.0}, 5.0, 1e-2);
        double prev = path.t_gamma(0.05);
        for (double gamma : {0.1, 0.2, 0.4, 0.7}) {
            const double cur = path.t_gamma(gamma);
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
        REQUIRE(path.t0.has_value());
        CHECK(path.t_gamma(0.1) <= *path.t0 + 1e-9);
    }

    SUBCASE("linear field matches the exponential to 1e-8") {
        AveragedField q;
        q.eval = [](const Vec& v) { return Vec{v[0] / 2.0, 0.0}; };
        const AveragedPath path = solve_averaged_ode(q, domain, {1.0, 0.0}, 1.0, 1e-3);
        const Vec end = path.values.back();
        CHECK(std::abs(end[0] - std::exp(0.5)) / std::exp(0.5) <= 1e-8);
        CHECK(end[1] == 0.0);
    }

    SUBCASE("v0 outside V") {
        AveragedField q;
        q.eval = [](const Vec&) { return Vec{0.0, 0.0}; };
        CHECK_THROWS_AS(solve_averaged_ode(q, domain, {10.0, 0.0}, 1.0, 1e-2), DomainError);
    }
}

TEST_CASE("delta diagnostic") {
    CylinderParams params;
    params.kind = PerturbationKind::linear_x;
    const double eps = 0.1;
    const FoliatedSystem sys = make_cylinder_system(params, eps);
    const double h_slow = 1e-2;
    const double dt = eps * h_slow;
    const int steps = static_cast<int>(1.0 / (eps * dt)) + 2;
    const NoisePath noise = generate_noise(17, 0, 1, dt, steps);
    const Trajectory traj = integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise,
                                                   Scheme::exact_leaf);
    const RescaledPath path = rescaled_view(traj, eps, h_slow, 1.0);

    SUBCASE("constant g minus its own average integrates to zero") {
        const auto g = [](const Vec&) { return 4.0; };
        const auto qg = [](const Vec&) { return 4.0; };
        CHECK(delta_diagnostic(path, *sys.chart, g, qg, 0.0, 0.8) == 0.0);
    }

    SUBCASE("zero duration gives zero") {
        const auto g = sys.vertical_component(0);
        const auto qg = [](const Vec& v) { return v[0] / 2.0; };
        CHECK(delta_diagnostic(path, *sys.chart, g, qg, 0.2, 0.0) == 0.0);
    }

    SUBCASE("horizon errors surface") {
        const auto g = sys.vertical_component(0);
        const auto qg = [](const Vec& v) { return v[0] / 2.0; };
        CHECK_THROWS_AS(delta_diagnostic(path, *sys.chart, g, qg, 0.5, 1.0), HorizonError);
    }
}
