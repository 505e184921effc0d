#pragma once

#include <optional>

#include "folsim/noise.hpp"
#include "folsim/systems.hpp"

namespace folsim {

enum class Scheme {
    heun,       // stochastic Heun predictor-corrector (Stratonovich limit)
    exact_leaf  // closed-form leaf flow composed with an Euler step for eps*K
};

// States on the uniform fast-time grid i*dt, stopped at the first domain
// exit: states[exit_step] is the first state outside the chart domain and no
// further states are produced.
struct Trajectory {
    double dt = 0.0;
    std::vector<Vec> states;
    std::optional<int> exit_step;

    int last_index() const { return static_cast<int>(states.size()) - 1; }
    double time(int i) const { return i * dt; }
    double horizon() const { return last_index() * dt; }
    std::optional<double> exit_time() const {
        if (!exit_step) return std::nullopt;
        return *exit_step * dt;
    }
};

Trajectory integrate_stratonovich(const FoliatedSystem& system, const Vec& x0,
                                  const NoisePath& noise, Scheme scheme);

struct CoupledTrajectories {
    Trajectory unperturbed;  // epsilon = 0
    Trajectory perturbed;
};

// Both solutions driven by the identical noise path, same grid.
CoupledTrajectories integrate_coupled(const FoliatedSystem& system, const Vec& x0,
                                      const NoisePath& noise, Scheme scheme);

// Slow-time view s -> y_{s/eps}, sampled every `stride` fast steps where
// stride = round(h_slow / (eps*dt)). The state is frozen at its stopped value
// after the exit time (t ^ tau convention).
struct RescaledPath {
    double h = 0.0;  // slow-time sample spacing, exactly stride*eps*dt
    std::vector<Vec> states;
    std::optional<double> exit_slow_time;  // eps * tau

    int last_index() const { return static_cast<int>(states.size()) - 1; }
    double time(int j) const { return j * h; }
    double slow_horizon() const { return last_index() * h; }
};

// slow_horizon = 0 reindexes the whole trajectory. Throws HorizonError when
// the trajectory is too short for the requested horizon and did not exit.
RescaledPath rescaled_view(const Trajectory& traj, double epsilon, double h_slow,
                           double slow_horizon = 0.0);

}  // namespace folsim
