#include "folsim/sde.hpp"

#include <cmath>

#include "folsim/errors.hpp"

namespace folsim {

namespace {

Vec drift_with_perturbation(const FoliatedSystem& sys, const Vec& x) {
    Vec a = sys.drift.eval(x);
    if (sys.epsilon != 0.0) axpy(a, sys.epsilon, sys.perturbation.eval(x));
    return a;
}

Vec heun_step(const FoliatedSystem& sys, const Vec& x, double dt, const Vec& db) {
    const int r = sys.driving_dims();

    Vec incr = drift_with_perturbation(sys, x);
    for (auto& c : incr) c *= dt;
    for (int k = 0; k < r; ++k) axpy(incr, db[k], sys.diffusion[k].eval(x));

    Vec pred = x;
    for (std::size_t i = 0; i < x.size(); ++i) pred[i] += incr[i];

    Vec incr2 = drift_with_perturbation(sys, pred);
    for (auto& c : incr2) c *= dt;
    for (int k = 0; k < r; ++k) axpy(incr2, db[k], sys.diffusion[k].eval(pred));

    Vec out = x;
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += 0.5 * (incr[i] + incr2[i]);
    return out;
}

Vec exact_leaf_step(const FoliatedSystem& sys, const Vec& x, double dt, const Vec& db) {
    Vec out = sys.exact_leaf_step(x, dt, db);
    if (sys.epsilon != 0.0) axpy(out, sys.epsilon * dt, sys.perturbation.eval(out));
    return out;
}

}  // namespace

Trajectory integrate_stratonovich(const FoliatedSystem& system, const Vec& x0,
                                  const NoisePath& noise, Scheme scheme) {
    if (!system.chart->in_domain(x0))
        throw DomainError("integrate_stratonovich: initial condition outside chart domain");
    if (scheme == Scheme::exact_leaf && !system.has_exact_leaf())
        throw SchemeError("integrate_stratonovich: system '" + system.name +
                          "' declares no closed-form leaf flow");

    Trajectory traj;
    traj.dt = noise.dt;
    traj.states.reserve(noise.steps + 1);
    traj.states.push_back(x0);

    Vec db(noise.dims);
    Vec x = x0;
    for (int i = 0; i < noise.steps; ++i) {
        for (int k = 0; k < noise.dims; ++k) db[k] = noise.at(i, k);
        x = scheme == Scheme::heun ? heun_step(system, x, noise.dt, db)
                                   : exact_leaf_step(system, x, noise.dt, db);
        traj.states.push_back(x);
        if (!system.chart->in_domain(x)) {
            traj.exit_step = i + 1;
            break;
        }
    }
    return traj;
}

CoupledTrajectories integrate_coupled(const FoliatedSystem& system, const Vec& x0,
                                      const NoisePath& noise, Scheme scheme) {
    return {integrate_stratonovich(system.with_epsilon(0.0), x0, noise, scheme),
            integrate_stratonovich(system, x0, noise, scheme)};
}

RescaledPath rescaled_view(const Trajectory& traj, double epsilon, double h_slow,
                           double slow_horizon) {
    if (epsilon <= 0.0) throw ParameterError("rescaled_view: epsilon must be positive");
    if (h_slow <= 0.0) throw ParameterError("rescaled_view: h_slow must be positive");

    const int stride = std::max<int>(1, std::llround(h_slow / (epsilon * traj.dt)));
    RescaledPath path;
    path.h = stride * epsilon * traj.dt;
    if (traj.exit_step) path.exit_slow_time = epsilon * *traj.exit_step * traj.dt;

    int n_slow;
    if (slow_horizon <= 0.0) {
        n_slow = traj.last_index() / stride;
    } else {
        n_slow = static_cast<int>(std::floor(slow_horizon / path.h + 1e-9));
        if (!traj.exit_step && n_slow * stride > traj.last_index())
            throw HorizonError("rescaled_view: trajectory horizon " +
                               std::to_string(epsilon * traj.horizon()) +
                               " shorter than requested slow horizon " +
                               std::to_string(slow_horizon));
    }

    path.states.reserve(n_slow + 1);
    const int last = traj.last_index();
    for (int j = 0; j <= n_slow; ++j) {
        const int i = std::min(j * stride, last);  // frozen at the stopped state
        path.states.push_back(traj.states[i]);
    }
    return path;
}

}  // namespace folsim
