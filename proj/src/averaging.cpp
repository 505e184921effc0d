#include "folsim/averaging.hpp"

#include <algorithm>
#include <cmath>

#include "folsim/errors.hpp"
#include "folsim/stats.hpp"

namespace folsim {

double leaf_average_quadrature(const FoliatedSystem& system,
                               const std::function<double(const Vec&)>& g, const Vec& v,
                               int nodes) {
    if (!system.has_leaf_measure())
        throw MeasureUnknown("leaf_average_quadrature: system '" + system.name +
                             "' declares no invariant leaf measure");
    if (nodes < 2) throw ParameterError("leaf_average_quadrature: need at least 2 nodes");
    return system.leaf_average(g, v, nodes);
}

AveragedField averaged_field_closed_form(const FoliatedSystem& system) {
    if (!system.averaged_closed_form)
        throw MeasureUnknown("averaged_field_closed_form: system '" + system.name +
                             "' has no analytic averaged field");
    AveragedField q;
    q.eval = system.averaged_closed_form;
    q.source = AveragedField::Source::closed_form;
    return q;
}

namespace {

// Uniform tensor grid over a box with multilinear interpolation.
struct GridTable {
    Box box;
    int pts = 0;
    int dim = 0;
    int out_dim = 0;
    std::vector<double> values;  // flattened: node-major, then component

    double coord(int axis, int j) const {
        const auto& b = box.bound(axis);
        return b.lo + (b.hi - b.lo) * j / (pts - 1);
    }

    Vec eval(const Vec& v) const {
        std::vector<int> base(dim);
        std::vector<double> w(dim);
        for (int axis = 0; axis < dim; ++axis) {
            const auto& b = box.bound(axis);
            double x = (v[axis] - b.lo) / (b.hi - b.lo) * (pts - 1);
            x = std::clamp(x, 0.0, static_cast<double>(pts - 1));
            int j = std::min(static_cast<int>(x), pts - 2);
            base[axis] = j;
            w[axis] = x - j;
        }
        Vec out(out_dim, 0.0);
        const int corners = 1 << dim;
        for (int c = 0; c < corners; ++c) {
            double weight = 1.0;
            std::size_t index = 0;
            for (int axis = 0; axis < dim; ++axis) {
                const int bit = (c >> axis) & 1;
                weight *= bit ? w[axis] : 1.0 - w[axis];
                index = index * pts + (base[axis] + bit);
            }
            for (int k = 0; k < out_dim; ++k) out[k] += weight * values[index * out_dim + k];
        }
        return out;
    }
};

}  // namespace

AveragedField averaged_field_quadrature(const FoliatedSystem& system, int points_per_dim,
                                        int nodes) {
    if (points_per_dim < 2) throw ParameterError("averaged_field_quadrature: grid too small");
    const Box& box = system.chart->vertical_domain();
    const int d = box.dim();

    auto table = std::make_shared<GridTable>();
    table->box = box;
    table->pts = points_per_dim;
    table->dim = d;
    table->out_dim = d;

    std::size_t total = 1;
    for (int axis = 0; axis < d; ++axis) total *= points_per_dim;
    table->values.resize(total * d);

    std::vector<std::function<double(const Vec&)>> components;
    for (int i = 0; i < d; ++i) components.push_back(system.vertical_component(i));

    std::vector<int> idx(d, 0);
    for (std::size_t node = 0; node < total; ++node) {
        std::size_t rest = node;
        for (int axis = d - 1; axis >= 0; --axis) {
            idx[axis] = static_cast<int>(rest % points_per_dim);
            rest /= points_per_dim;
        }
        Vec v(d);
        for (int axis = 0; axis < d; ++axis) v[axis] = table->coord(axis, idx[axis]);
        for (int k = 0; k < d; ++k)
            table->values[node * d + k] = leaf_average_quadrature(system, components[k], v, nodes);
    }

    // Lipschitz estimate from first differences along each axis.
    double lip = 0.0;
    for (std::size_t node = 0; node < total; ++node) {
        std::size_t rest = node;
        std::size_t stride = 1;
        for (int axis = d - 1; axis >= 0; --axis) {
            const int j = static_cast<int>(rest % points_per_dim);
            rest /= points_per_dim;
            if (j + 1 < points_per_dim) {
                const double h = table->coord(axis, 1) - table->coord(axis, 0);
                for (int k = 0; k < d; ++k) {
                    const double dq = table->values[(node + stride) * d + k] -
                                      table->values[node * d + k];
                    lip = std::max(lip, std::abs(dq / h));
                }
            }
            stride *= points_per_dim;
        }
    }

    AveragedField q;
    q.eval = [table](const Vec& v) { return table->eval(v); };
    q.source = AveragedField::Source::quadrature;
    q.lipschitz_estimate = lip;
    return q;
}

RunningAverage leaf_average_timeseries(const FoliatedSystem& system,
                                       const std::function<double(const Vec&)>& g, const Vec& x0,
                                       double horizon, double dt, std::uint64_t master_seed,
                                       std::uint64_t replica, int record_points) {
    const int steps = static_cast<int>(std::llround(horizon / dt));
    const NoisePath noise = generate_noise(master_seed, replica, system.driving_dims(), dt, steps);
    const FoliatedSystem frozen = system.with_epsilon(0.0);
    const Scheme scheme = frozen.has_exact_leaf() ? Scheme::exact_leaf : Scheme::heun;
    const Trajectory traj = integrate_stratonovich(frozen, x0, noise, scheme);

    RunningAverage out;
    const int n = traj.last_index();
    const int every = std::max(1, n / std::max(1, record_points));
    double integral = 0.0;
    double prev = g(traj.states[0]);
    for (int i = 1; i <= n; ++i) {
        const double cur = g(traj.states[i]);
        integral += 0.5 * (prev + cur) * dt;
        prev = cur;
        if (i % every == 0 || i == n) {
            out.times.push_back(traj.time(i));
            out.values.push_back(integral / traj.time(i));
        }
    }
    out.estimate = out.values.empty() ? 0.0 : out.values.back();
    return out;
}

double ErgodicRate::eval(double t) const {
    if (model == Model::zero) return 0.0;
    return c * std::pow(t, -q);
}

ErgodicRate fit_eta(const std::vector<RunningAverage>& curves, double q_g, double p,
                    double burn_in, int fit_points) {
    if (curves.empty()) throw FitError("fit_eta: no curves");
    const auto& times = curves.front().times;
    for (const auto& c : curves)
        if (c.times.size() != times.size())
            throw FitError("fit_eta: curves sampled on different grids");

    std::vector<double> err(times.size());
    std::vector<double> at(curves.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        for (std::size_t c = 0; c < curves.size(); ++c) at[c] = curves[c].values[i] - q_g;
        err[i] = power_mean(at, p);
    }

    if (*std::max_element(err.begin(), err.end()) < 1e-12) {
        ErgodicRate rate;
        rate.model = ErgodicRate::Model::zero;
        return rate;
    }

    const std::vector<double> env = nonincreasing_envelope(err);

    // Log-spaced sample times in [burn_in, horizon].
    const double t_max = times.back();
    if (!(burn_in > 0.0) || burn_in >= t_max) throw FitError("fit_eta: bad burn-in");
    std::vector<double> xs, ys;
    std::size_t cursor = 0;
    for (int k = 0; k < fit_points; ++k) {
        const double target =
            burn_in * std::pow(t_max / burn_in, static_cast<double>(k) / (fit_points - 1));
        while (cursor + 1 < times.size() && times[cursor] < target) ++cursor;
        if (!xs.empty() && times[cursor] <= xs.back()) continue;
        if (env[cursor] <= 0.0) continue;
        xs.push_back(times[cursor]);
        ys.push_back(env[cursor]);
    }
    if (xs.size() < 8) throw FitError("fit_eta: fewer than 8 usable points past burn-in");

    const LineFit fit = loglog_fit(xs, ys);
    if (fit.slope >= 0.0)
        throw FitError("fit_eta: error envelope is not decreasing (slope " +
                       std::to_string(fit.slope) + ")");
    ErgodicRate rate;
    rate.model = ErgodicRate::Model::power;
    rate.c = std::exp(fit.intercept);
    rate.q = -fit.slope;
    rate.fit_stderr = fit.slope_stderr;
    return rate;
}

Vec AveragedPath::value_at(double s) const {
    if (times.empty()) throw HorizonError("AveragedPath: empty path");
    if (s <= times.front()) return values.front();
    if (s >= times.back()) return values.back();
    const auto it = std::upper_bound(times.begin(), times.end(), s);
    const std::size_t i = static_cast<std::size_t>(it - times.begin());
    const double w = (s - times[i - 1]) / (times[i] - times[i - 1]);
    Vec out(values[i].size());
    for (std::size_t k = 0; k < out.size(); ++k)
        out[k] = (1.0 - w) * values[i - 1][k] + w * values[i][k];
    return out;
}

double AveragedPath::t_gamma(double gamma) const {
    if (gamma <= 0.0) throw ParameterError("t_gamma: gamma must be positive");
    double prev_d = domain.boundary_distance(values.front());
    if (prev_d <= gamma) return times.front();
    for (std::size_t i = 1; i < values.size(); ++i) {
        const double d = domain.boundary_distance(values[i]);
        if (d <= gamma) {
            const double w = (prev_d - gamma) / (prev_d - d);
            return times[i - 1] + w * (times[i] - times[i - 1]);
        }
        prev_d = d;
    }
    return std::numeric_limits<double>::infinity();
}

namespace {

Vec rk4_step(const AveragedField& q, const Vec& v, double h) {
    const Vec k1 = q.eval(v);
    Vec tmp = v;
    axpy(tmp, 0.5 * h, k1);
    const Vec k2 = q.eval(tmp);
    tmp = v;
    axpy(tmp, 0.5 * h, k2);
    const Vec k3 = q.eval(tmp);
    tmp = v;
    axpy(tmp, h, k3);
    const Vec k4 = q.eval(tmp);
    Vec out = v;
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

}  // namespace

AveragedPath solve_averaged_ode(const AveragedField& q, const Box& domain, const Vec& v0,
                                double t_max, double step) {
    if (!domain.contains(v0)) throw DomainError("solve_averaged_ode: v0 outside V");
    if (step <= 0.0 || t_max <= 0.0)
        throw ParameterError("solve_averaged_ode: step and t_max must be positive");

    AveragedPath path;
    path.domain = domain;
    path.times.push_back(0.0);
    path.values.push_back(v0);

    const int steps = static_cast<int>(std::ceil(t_max / step - 1e-12));
    Vec v = v0;
    for (int i = 0; i < steps; ++i) {
        const double t = i * step;
        const double h = std::min(step, t_max - t);
        const Vec next = rk4_step(q, v, h);
        if (!domain.contains(next)) {
            // Bisect the step length until the hit time is known to 1e-10.
            double lo = 0.0, hi = h;
            while (hi - lo > 1e-10) {
                const double mid = 0.5 * (lo + hi);
                if (domain.contains(rk4_step(q, v, mid)))
                    lo = mid;
                else
                    hi = mid;
            }
            path.t0 = t + hi;
            path.times.push_back(*path.t0);
            path.values.push_back(rk4_step(q, v, hi));
            return path;
        }
        v = next;
        path.times.push_back(t + h);
        path.values.push_back(v);
    }
    return path;
}

std::vector<double> delta_running(const RescaledPath& path, const FoliatedChart& chart,
                                  const std::function<double(const Vec&)>& g,
                                  const std::function<double(const Vec&)>& qg_of_v, double s) {
    const int n = path.last_index();
    const double h = path.h;

    // Integration is cut at the exit time; the path itself is frozen there.
    double cut = path.exit_slow_time ? *path.exit_slow_time : path.slow_horizon();
    const int j_start = std::min(n, static_cast<int>(std::ceil(s / h - 1e-9)));
    const int j_cut = std::min(n, static_cast<int>(std::floor(cut / h + 1e-9)));

    std::vector<double> integrand(n + 1, 0.0);
    for (int j = j_start; j <= j_cut; ++j)
        integrand[j] = g(path.states[j]) - qg_of_v(chart.project(path.states[j]));

    std::vector<double> out(n + 1 - j_start, 0.0);
    double acc = 0.0;
    for (int j = j_start + 1; j <= n; ++j) {
        if (j <= j_cut) acc += 0.5 * (integrand[j - 1] + integrand[j]) * h;
        out[j - j_start] = acc;
    }
    return out;
}

double delta_diagnostic(const RescaledPath& path, const FoliatedChart& chart,
                        const std::function<double(const Vec&)>& g,
                        const std::function<double(const Vec&)>& qg_of_v, double s, double t) {
    if (t < 0.0 || s < 0.0) throw ParameterError("delta_diagnostic: s and t must be nonnegative");
    if (t == 0.0) return 0.0;
    if (s + t > path.slow_horizon() + 1e-9 && !path.exit_slow_time)
        throw HorizonError("delta_diagnostic: rescaled path shorter than s + t");
    const std::vector<double> curve = delta_running(path, chart, g, qg_of_v, s);
    const int j = std::min(static_cast<int>(curve.size()) - 1,
                           static_cast<int>(std::floor(t / path.h + 1e-9)));
    return curve[j];
}

}  // namespace folsim
