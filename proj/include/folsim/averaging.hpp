#pragma once

#include <functional>
#include <optional>

#include "folsim/sde.hpp"
#include "folsim/systems.hpp"

namespace folsim {

// Average of g over the leaf above vertical point v, against the invariant
// measure declared by the example system. Throws MeasureUnknown when the
// system declares none.
double leaf_average_quadrature(const FoliatedSystem& system,
                               const std::function<double(const Vec&)>& g, const Vec& v,
                               int nodes);

// The map v -> (Q^{dpi_1(K)}, ..., Q^{dpi_d(K)})(v) driving the averaged ODE.
struct AveragedField {
    enum class Source { closed_form, quadrature, time_average };

    std::function<Vec(const Vec& v)> eval;
    Source source = Source::closed_form;
    std::optional<double> lipschitz_estimate;
};

AveragedField averaged_field_closed_form(const FoliatedSystem& system);

// Tabulates the quadrature averages of the vertical components of K on a
// uniform grid over V (points_per_dim per vertical dimension) and evaluates
// by multilinear interpolation, which preserves the Lipschitz property.
AveragedField averaged_field_quadrature(const FoliatedSystem& system, int points_per_dim = 64,
                                        int nodes = 64);

// Running time average (1/t) int_0^t g(F_r(x0)) dr along one unperturbed
// trajectory (epsilon forced to zero).
struct RunningAverage {
    std::vector<double> times;
    std::vector<double> values;
    double estimate = 0.0;  // value at the horizon
};

RunningAverage leaf_average_timeseries(const FoliatedSystem& system,
                                       const std::function<double(const Vec&)>& g, const Vec& x0,
                                       double horizon, double dt, std::uint64_t master_seed,
                                       std::uint64_t replica, int record_points = 2048);

// Rate bound eta(t) on the L^p distance between the running average and Q^g,
// restricted to the family c * t^{-q} (or identically zero).
struct ErgodicRate {
    enum class Model { power, zero };
    Model model = Model::zero;
    double c = 0.0;
    double q = 0.0;
    double fit_stderr = 0.0;

    double eval(double t) const;
};

// Fits log L^p-error against log t past the burn-in, on the nonincreasing
// right-envelope of the error curve (the raw curve of a periodic flow crosses
// zero, which a pure power law cannot represent). Needs >= 8 sample points.
// q_g is the exact leaf average the running averages converge to.
ErgodicRate fit_eta(const std::vector<RunningAverage>& curves, double q_g, double p,
                    double burn_in, int fit_points = 24);

// Solution path of dv/dt = Q(v) with boundary-hit detection.
struct AveragedPath {
    std::vector<double> times;
    std::vector<Vec> values;
    std::optional<double> t0;  // first boundary-hit time, located to 1e-10
    Box domain;

    Vec value_at(double s) const;  // linear interpolation, clamped to the path
    // inf{ t : dist(v(t), boundary of V) <= gamma }; +infinity when the path
    // never comes that close.
    double t_gamma(double gamma) const;
};

AveragedPath solve_averaged_ode(const AveragedField& q, const Box& domain, const Vec& v0,
                                double t_max, double step);

// delta(eps, t) = int_{s ^ eps*tau}^{(s+t) ^ eps*tau} [g(y) - Q^g(pi(y))] dr
// on the rescaled path, trapezoid at the native slow step.
double delta_diagnostic(const RescaledPath& path, const FoliatedChart& chart,
                        const std::function<double(const Vec&)>& g,
                        const std::function<double(const Vec&)>& qg_of_v, double s, double t);

// Cumulative version: value j is delta(eps, j*h) for the offset s.
std::vector<double> delta_running(const RescaledPath& path, const FoliatedChart& chart,
                                  const std::function<double(const Vec&)>& g,
                                  const std::function<double(const Vec&)>& qg_of_v, double s);

}  // namespace folsim
