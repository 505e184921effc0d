#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "folsim/errors.hpp"
#include "folsim/sde.hpp"
#include "folsim/stats.hpp"
#include "folsim/systems.hpp"

using namespace folsim;

TEST_CASE("heun converges strongly to the Stratonovich solution of dY = Y o dB") {
    // Oracle: Y_T = exp(B_T) for Y_0 = 1 (Stratonovich chain rule).
    const FoliatedSystem sys = make_scalar_linear_system(0.0);
    const int paths = 300;
    const double t_final = 1.0;
    const std::vector<int> coarsen = {4, 2, 1};  // dt = 1e-2, 5e-3, 2.5e-3

    std::vector<double> dts, errors;
    for (int factor : coarsen) {
        double mse = 0.0;
        double dt = 0.0;
        for (int rep = 0; rep < paths; ++rep) {
            const NoisePath fine = generate_noise(314, rep, 1, 2.5e-3, 400);
            const NoisePath noise = fine.coarsened(factor);
            dt = noise.dt;
            const Trajectory traj =
                integrate_stratonovich(sys, {1.0, 0.0}, noise, Scheme::heun);
            const double exact = std::exp(fine.endpoint(0));
            const double err = traj.states.back()[0] - exact;
            mse += err * err;
        }
        dts.push_back(dt);
        errors.push_back(std::sqrt(mse / paths) * t_final);
    }
    const LineFit fit = loglog_fit(dts, errors);
    CHECK(fit.slope >= 0.9);
}

TEST_CASE("exact_leaf preserves (r, z) to machine precision at epsilon 0") {
    const FoliatedSystem sys = make_cylinder_system({}, 0.0);
    const NoisePath noise = generate_noise(1, 0, 1, 0.01, 2000);
    const Trajectory traj = integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise,
                                                   Scheme::exact_leaf);
    REQUIRE(!traj.exit_step);
    for (const Vec& p : traj.states) {
        CHECK(std::hypot(p[0], p[1]) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(p[2] == 0.0);
    }
}

TEST_CASE("deterministic rotation matches the exact angle") {
    CylinderParams params;
    params.lambda1 = 1.0;
    params.lambda2 = 0.0;
    params.kind = PerturbationKind::none;
    const FoliatedSystem sys = make_cylinder_system(params, 0.0);
    const double t_final = 2.0;
    const NoisePath noise = generate_noise(3, 0, 1, 1e-3, 2000);

    const Trajectory exact = integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise,
                                                    Scheme::exact_leaf);
    CHECK(exact.states.back()[0] == doctest::Approx(std::cos(t_final)).epsilon(1e-10));
    CHECK(exact.states.back()[1] == doctest::Approx(std::sin(t_final)).epsilon(1e-10));

    const Trajectory heun = integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise, Scheme::heun);
    CHECK(heun.states.back()[0] == doctest::Approx(std::cos(t_final)).epsilon(1e-5));
    CHECK(heun.states.back()[1] == doctest::Approx(std::sin(t_final)).epsilon(1e-5));
}

TEST_CASE("vertical perturbation moves z linearly under exact_leaf") {
    CylinderParams params;
    params.kind = PerturbationKind::constant;
    params.k1 = 0.0;
    params.k2 = 0.0;
    params.k3 = 2.0;
    const double eps = 0.1;
    const FoliatedSystem sys = make_cylinder_system(params, eps);
    const double dt = 1e-3;
    const NoisePath noise = generate_noise(9, 4, 1, dt, 5000);
    const Trajectory traj = integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise,
                                                   Scheme::exact_leaf);
    for (int i = 0; i <= traj.last_index(); ++i)
        CHECK(std::abs(traj.states[i][2] - eps * params.k3 * traj.time(i)) < 1e-12);
}

TEST_CASE("coupled trajectories") {
    SUBCASE("epsilon 0 gives identical paths") {
        const FoliatedSystem sys = make_cylinder_system({}, 0.0);
        const NoisePath noise = generate_noise(21, 0, 1, 0.01, 500);
        const auto pair = integrate_coupled(sys, {1.0, 0.0, 0.0}, noise, Scheme::exact_leaf);
        REQUIRE(pair.unperturbed.states.size() == pair.perturbed.states.size());
        for (std::size_t i = 0; i < pair.perturbed.states.size(); ++i)
            CHECK(pair.perturbed.states[i] == pair.unperturbed.states[i]);
    }

    SUBCASE("zero perturbation gives identical paths at epsilon 1") {
        CylinderParams params;
        params.kind = PerturbationKind::none;
        const FoliatedSystem sys = make_cylinder_system(params, 1.0);
        const NoisePath noise = generate_noise(22, 0, 1, 0.01, 500);
        const auto pair = integrate_coupled(sys, {1.0, 0.0, 0.0}, noise, Scheme::exact_leaf);
        for (std::size_t i = 0; i < pair.perturbed.states.size(); ++i)
            CHECK(pair.perturbed.states[i] == pair.unperturbed.states[i]);
    }

    SUBCASE("constant vertical K: sup |z_eps - z| equals eps*k3*t") {
        CylinderParams params;
        params.kind = PerturbationKind::constant;
        params.k1 = 0.0;
        params.k2 = 0.0;
        params.k3 = 1.5;
        const double eps = 0.05;
        const FoliatedSystem sys = make_cylinder_system(params, eps);
        const double dt = 1e-3;
        const int steps = 1000;
        const NoisePath noise = generate_noise(23, 0, 1, dt, steps);
        const auto pair = integrate_coupled(sys, {1.0, 0.0, 0.0}, noise, Scheme::exact_leaf);
        double sup = 0.0;
        for (int i = 0; i <= steps; ++i)
            sup = std::max(sup,
                           std::abs(pair.perturbed.states[i][2] - pair.unperturbed.states[i][2]));
        CHECK(sup == doctest::Approx(eps * params.k3 * steps * dt).epsilon(1e-12));
    }
}

TEST_CASE("pathwise coupling bound: sup |v_eps - v| <= eps * t * sup |K_v|") {
    CylinderParams params;
    params.kind = PerturbationKind::constant;
    params.k1 = 0.8;
    params.k2 = -0.3;
    params.k3 = 0.4;
    const double eps = 0.1;
    const FoliatedSystem sys = make_cylinder_system(params, eps);
    const double k_norm = std::sqrt(0.8 * 0.8 + 0.3 * 0.3 + 0.4 * 0.4);
    const double dt = 1e-3;
    const int steps = 2000;

    for (int rep = 0; rep < 20; ++rep) {
        const NoisePath noise = generate_noise(404, rep, 1, dt, steps);
        const auto pair = integrate_coupled(sys, {1.0, 0.0, 0.0}, noise, Scheme::exact_leaf);
        const int limit = std::min(pair.perturbed.last_index(), pair.unperturbed.last_index());
        for (int i = 0; i <= limit; ++i) {
            const Vec ve = sys.chart->project(pair.perturbed.states[i]);
            const Vec vu = sys.chart->project(pair.unperturbed.states[i]);
            const double bound = eps * pair.perturbed.time(i) * k_norm;
            CHECK(norm(diff(ve, vu)) <= bound * 1.0001 + 1e-12);
        }
    }
}

TEST_CASE("exit detection truncates at the first outside state") {
    CylinderParams params;
    params.z_range = {-0.1, 0.1};
    params.kind = PerturbationKind::constant;
    params.k1 = 0.0;
    params.k2 = 0.0;
    params.k3 = 1.0;
    const FoliatedSystem sys = make_cylinder_system(params, 1.0);  // z(t) = t
    const NoisePath noise = generate_noise(31, 0, 1, 0.015, 100);
    const Trajectory traj = integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise,
                                                   Scheme::exact_leaf);
    REQUIRE(traj.exit_step.has_value());
    CHECK(*traj.exit_step == 7);  // z_7 = 0.105 is the first value above 0.1
    CHECK(static_cast<int>(traj.states.size()) == *traj.exit_step + 1);
    CHECK(!sys.chart->in_domain(traj.states.back()));
    for (int i = 0; i < *traj.exit_step; ++i) CHECK(sys.chart->in_domain(traj.states[i]));
}

TEST_CASE("scheme and domain preconditions") {
    FoliatedSystem sys = make_cylinder_system({}, 0.0);
    const NoisePath noise = generate_noise(1, 0, 1, 0.01, 10);
    CHECK_THROWS_AS(
        integrate_stratonovich(sys, {100.0, 0.0, 0.0}, noise, Scheme::heun), DomainError);
    sys.exact_leaf_step = nullptr;
    CHECK_THROWS_AS(
        integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise, Scheme::exact_leaf), SchemeError);
}

TEST_CASE("rescaled view") {
    CylinderParams params;
    params.kind = PerturbationKind::constant;
    params.k1 = 0.0;
    params.k2 = 0.0;
    params.k3 = 1.0;

    SUBCASE("epsilon 1 is the identity reindexing") {
        const FoliatedSystem sys = make_cylinder_system(params, 1.0);
        const NoisePath noise = generate_noise(5, 0, 1, 0.01, 100);
        const Trajectory traj =
            integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise, Scheme::exact_leaf);
        const RescaledPath path = rescaled_view(traj, 1.0, 0.01);
        CHECK(path.h == doctest::Approx(0.01));
        CHECK(path.states.size() == traj.states.size());
        for (std::size_t i = 0; i < path.states.size(); ++i)
            CHECK(path.states[i] == traj.states[i]);
    }

    SUBCASE("slow horizon is eps times the fast horizon") {
        const FoliatedSystem sys = make_cylinder_system(params, 0.1);
        const NoisePath noise = generate_noise(5, 0, 1, 0.01, 1000);  // fast horizon 10
        const Trajectory traj =
            integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise, Scheme::exact_leaf);
        const RescaledPath path = rescaled_view(traj, 0.1, 0.01);
        CHECK(path.slow_horizon() == doctest::Approx(1.0));
        CHECK_THROWS_AS(rescaled_view(traj, 0.1, 0.01, 2.0), HorizonError);
    }

    SUBCASE("rescaled vertical coordinate equals k3 * s exactly") {
        const double eps = 0.05;
        const FoliatedSystem sys = make_cylinder_system(params, eps);
        const double h_slow = 1e-2;
        const double dt = eps * h_slow;
        const int steps = static_cast<int>(std::llround(1.0 / (eps * dt))) + 2;
        const NoisePath noise = generate_noise(5, 0, 1, dt, steps);
        const Trajectory traj =
            integrate_stratonovich(sys, {1.0, 0.0, 0.0}, noise, Scheme::exact_leaf);
        const RescaledPath path = rescaled_view(traj, eps, h_slow, 1.0);
        double worst = 0.0;
        for (int j = 0; j <= path.last_index(); ++j)
            worst = std::max(worst, std::abs(path.states[j][2] - path.time(j)));
        CHECK(worst <= 1e-10);
    }
}
