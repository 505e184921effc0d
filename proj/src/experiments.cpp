#include "folsim/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "folsim/errors.hpp"
#include "folsim/stats.hpp"

namespace folsim {

namespace {

std::uint64_t cell_seed(std::uint64_t master_seed, std::uint64_t cell) {
    return master_seed + 0x9e3779b97f4a7c15ULL * (cell + 1);
}

// Below this an L^p estimate is indistinguishable from accumulated rounding.
constexpr double kNoiseFloor = 1e-9;

McEstimate summarize(const std::vector<double>& sups, double p, std::uint64_t master_seed,
                     std::uint64_t cell, int resamples) {
    McEstimate est;
    est.value = power_mean(sups, p);
    est.p = p;
    est.replicas = static_cast<int>(sups.size());
    est.master_seed = master_seed;
    const Interval95 ci =
        bootstrap_power_mean_ci(sups, p, cell_seed(master_seed, cell), resamples);
    est.ci_low = ci.lo;
    est.ci_high = ci.hi;
    return est;
}

// CI-separated comparisons along a descending eps grid.
template <typename Row>
bool no_ci_separated_increase(const std::vector<Row>& rows,
                              double (*lo)(const Row&), double (*hi)(const Row&)) {
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (lo(rows[i]) > hi(rows[i - 1])) return false;
    return true;
}

int steps_for_slow_horizon(double slow_horizon, double epsilon, double h_slow) {
    return static_cast<int>(std::ceil(slow_horizon / (epsilon * epsilon * h_slow))) + 2;
}

}  // namespace

void parallel_replicas(int replicas, int threads, const std::function<void(int)>& work) {
    int n = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    n = std::max(1, std::min(n, replicas));
    if (n == 1) {
        for (int r = 0; r < replicas; ++r) work(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n);
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    for (int w = 0; w < n; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= replicas || failed.load()) return;
                try {
                    work(r);
                } catch (...) {
                    if (!failed.exchange(true)) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Coupled-error experiment

CoupledErrorTable estimate_coupled_error(const FoliatedSystem& system,
                                         const std::function<double(const Vec&)>& f,
                                         const std::vector<double>& eps_grid,
                                         const std::vector<double>& t_grid, double p, int replicas,
                                         std::uint64_t seed, const McOptions& opts) {
    if (p < 1.0) throw ParameterError("estimate_coupled_error: p must be >= 1");
    if (replicas < 2) throw ParameterError("estimate_coupled_error: need at least 2 replicas");
    if (eps_grid.empty() || t_grid.empty())
        throw ParameterError("estimate_coupled_error: empty grid");

    const double dt = opts.dt;
    const double t_max = *std::max_element(t_grid.begin(), t_grid.end());
    const int steps = static_cast<int>(std::ceil(t_max / dt - 1e-12));
    std::vector<int> t_index(t_grid.size());
    for (std::size_t k = 0; k < t_grid.size(); ++k)
        t_index[k] = std::min(steps, static_cast<int>(std::llround(t_grid[k] / dt)));

    const Scheme scheme = opts.scheme_for(system);
    CoupledErrorTable table;
    table.p = p;
    table.replicas = replicas;
    table.master_seed = seed;

    std::uint64_t cell = 0;
    for (double eps : eps_grid) {
        const FoliatedSystem sys_eps = system.with_epsilon(eps);
        std::vector<std::vector<double>> sups(t_grid.size(), std::vector<double>(replicas, 0.0));

        parallel_replicas(replicas, opts.threads, [&](int rep) {
            const NoisePath noise =
                generate_noise(seed, static_cast<std::uint64_t>(rep), system.driving_dims(), dt,
                               steps);
            const CoupledTrajectories pair =
                integrate_coupled(sys_eps, system.default_x0, noise, scheme);
            const int limit =
                std::min(pair.perturbed.last_index(), pair.unperturbed.last_index());
            double running = 0.0;
            std::size_t k = 0;
            std::vector<std::size_t> order(t_grid.size());
            for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
            std::sort(order.begin(), order.end(),
                      [&](std::size_t a, std::size_t b) { return t_index[a] < t_index[b]; });
            for (int i = 0; i <= steps; ++i) {
                if (i <= limit)
                    running = std::max(running, std::abs(f(pair.perturbed.states[i]) -
                                                         f(pair.unperturbed.states[i])));
                while (k < order.size() && t_index[order[k]] == i) {
                    sups[order[k]][rep] = running;
                    ++k;
                }
            }
            while (k < order.size()) sups[order[k++]][rep] = running;
        });

        for (std::size_t k = 0; k < t_grid.size(); ++k) {
            CoupledErrorRow row;
            row.epsilon = eps;
            row.t = t_grid[k];
            row.estimate = summarize(sups[k], p, seed, cell++, opts.bootstrap_resamples);
            table.rows.push_back(row);
        }
    }
    return table;
}

RateFit fit_epsilon_order(const CoupledErrorTable& table, double t_fixed) {
    std::vector<double> eps, values;
    for (const auto& row : table.rows)
        if (std::abs(row.t - t_fixed) <= 1e-12 * std::max(1.0, t_fixed)) {
            eps.push_back(row.epsilon);
            values.push_back(row.estimate.value);
        }
    if (eps.size() < 3) throw FitError("fit_epsilon_order: need >= 3 eps points at fixed t");
    for (double v : values)
        if (v <= 0.0) throw FitError("fit_epsilon_order: nonpositive estimate in log-log fit");
    const LineFit fit = loglog_fit(eps, values);
    RateFit out;
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    out.stderr_ = fit.slope_stderr;
    out.r_squared = fit.r_squared;
    for (std::size_t i = 0; i < eps.size(); ++i) out.grid.emplace_back(eps[i], values[i]);
    return out;
}

double RateBound::time_envelope(double epsilon, double t) const {
    switch (form) {
        case EnvelopeForm::lemma21:
            return k1 * epsilon * t * std::exp(k2 * std::pow(t, p));
        case EnvelopeForm::cor22:
            return k1 * epsilon * (t + t * t);
        case EnvelopeForm::cor23:
            return k1 * epsilon * (t + std::pow(t, 1.5));
        case EnvelopeForm::thm41:
            break;
    }
    throw ParameterError("time_envelope: thm41 bound needs an ergodic rate");
}

double RateBound::theorem_bound(double epsilon, double t, const ErgodicRate& eta) const {
    const double stretched = t * std::pow(std::abs(std::log(epsilon)), 2.0 * beta / p);
    return c1 * std::pow(epsilon, alpha) + c2 * eta.eval(stretched);
}

RateBound fit_time_envelope(const CoupledErrorTable& table, double eps_fixed, EnvelopeForm form,
                            double max_spread) {
    if (form == EnvelopeForm::thm41)
        throw ParameterError("fit_time_envelope: thm41 is fitted by verify_theorem");

    std::vector<double> ts, values;
    for (const auto& row : table.rows)
        if (std::abs(row.epsilon - eps_fixed) <= 1e-12 * std::max(1.0, eps_fixed)) {
            ts.push_back(row.t);
            values.push_back(row.estimate.value);
        }
    if (ts.size() < 2) throw FitError("fit_time_envelope: need >= 2 time points at fixed eps");

    RateBound bound;
    bound.form = form;
    bound.p = table.p;

    if (form == EnvelopeForm::lemma21) {
        // log(est / (eps t)) = log K1 + K2 t^p, K2 >= 0.
        std::vector<double> xs, ys;
        for (std::size_t i = 0; i < ts.size(); ++i)
            if (values[i] > 0.0) {
                xs.push_back(std::pow(ts[i], table.p));
                ys.push_back(std::log(values[i] / (eps_fixed * ts[i])));
            }
        if (xs.size() >= 2) {
            const LineFit fit = linear_fit(xs, ys);
            bound.k2 = std::max(0.0, fit.slope);
        }
    }

    const auto shape = [&](double t) {
        switch (form) {
            case EnvelopeForm::lemma21:
                return t * std::exp(bound.k2 * std::pow(t, table.p));
            case EnvelopeForm::cor22:
                return t + t * t;
            default:
                return t + std::pow(t, 1.5);
        }
    };

    double rmax = 0.0, rmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (values[i] <= 0.0) continue;  // zero estimates are dominated by anything
        const double r = values[i] / (eps_fixed * shape(ts[i]));
        rmax = std::max(rmax, r);
        rmin = std::min(rmin, r);
    }
    if (rmax == 0.0) {  // everything zero: the null bound dominates
        bound.k1 = 0.0;
        bound.goodness = 0.0;
        bound.spread = 1.0;
        return bound;
    }

    bound.spread = rmax / rmin;
    if (bound.spread > max_spread)
        throw EnvelopeError(
            "fit_time_envelope: estimate/shape ratios span a factor " +
            std::to_string(bound.spread) + " (> " + std::to_string(max_spread) +
            "); the declared envelope form does not match the observed growth in t");

    bound.k1 = rmax;  // smallest constant that dominates the whole grid
    double goodness = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (values[i] > 0.0)
            goodness = std::max(goodness, values[i] / (bound.k1 * eps_fixed * shape(ts[i])));
    bound.goodness = goodness;
    return bound;
}

// ---------------------------------------------------------------------------
// Theorem experiment

namespace {

double rescaled_sup_error(const RescaledPath& path, const FoliatedChart& chart,
                          const AveragedPath& averaged, double t) {
    double sup = 0.0;
    const int n = path.last_index();
    for (int j = 0; j <= n; ++j) {
        const double s = path.time(j);
        if (s > t + 1e-12) break;
        const Vec pi = chart.project(path.states[j]);
        const Vec v = averaged.value_at(s);
        sup = std::max(sup, norm(diff(pi, v)));
    }
    return sup;
}

struct Nnls2 {
    double c1 = 0.0, c2 = 0.0;
};

// Nonnegative least squares with two regressors (tiny, closed form).
Nnls2 nnls2(const std::vector<double>& a, const std::vector<double>& b,
            const std::vector<double>& y) {
    const auto sum2 = [](const std::vector<double>& u, const std::vector<double>& v) {
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
        return s;
    };
    const double aa = sum2(a, a), bb = sum2(b, b), ab = sum2(a, b);
    const double ay = sum2(a, y), by = sum2(b, y);

    const auto ssr = [&](double c1, double c2) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double r = y[i] - c1 * a[i] - c2 * b[i];
            s += r * r;
        }
        return s;
    };

    std::vector<Nnls2> candidates;
    const double det = aa * bb - ab * ab;
    if (det > 1e-30) {
        const Nnls2 full{(ay * bb - by * ab) / det, (by * aa - ay * ab) / det};
        if (full.c1 >= 0.0 && full.c2 >= 0.0) candidates.push_back(full);
    }
    if (aa > 0.0) candidates.push_back({std::max(0.0, ay / aa), 0.0});
    if (bb > 0.0) candidates.push_back({0.0, std::max(0.0, by / bb)});
    candidates.push_back({0.0, 0.0});

    Nnls2 best = candidates.front();
    double best_ssr = ssr(best.c1, best.c2);
    for (const auto& c : candidates) {
        const double s = ssr(c.c1, c.c2);
        if (s < best_ssr) {
            best = c;
            best_ssr = s;
        }
    }
    return best;
}

}  // namespace

TheoremResult verify_theorem(const FoliatedSystem& system, const AveragedPath& averaged,
                             const std::vector<double>& eps_grid, double t, double p, double alpha,
                             double beta, const ErgodicRate& eta, int replicas, std::uint64_t seed,
                             const McOptions& opts) {
    if (replicas < 2) throw ParameterError("verify_theorem: need at least 2 replicas");
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("verify_theorem: alpha must be in (0,1)");
    if (!(beta > 0.0 && beta < 0.5)) throw ParameterError("verify_theorem: beta must be in (0,1/2)");
    if (averaged.t0 && t >= *averaged.t0)
        throw HorizonError("verify_theorem: t = " + std::to_string(t) +
                           " is not below the boundary-hit time T0 = " + std::to_string(*averaged.t0));

    const Scheme scheme = opts.scheme_for(system);
    TheoremResult result;
    result.t = t;

    std::uint64_t cell = 0;
    for (double eps : eps_grid) {
        const double dt = eps * opts.h_slow;
        const int steps = steps_for_slow_horizon(t, eps, opts.h_slow);
        const FoliatedSystem sys_eps = system.with_epsilon(eps);
        std::vector<double> sups(replicas, 0.0);

        parallel_replicas(replicas, opts.threads, [&](int rep) {
            const NoisePath noise = generate_noise(seed, static_cast<std::uint64_t>(rep),
                                                   system.driving_dims(), dt, steps);
            const Trajectory traj =
                integrate_stratonovich(sys_eps, system.default_x0, noise, scheme);
            const RescaledPath path = rescaled_view(traj, eps, opts.h_slow, t);
            sups[rep] = rescaled_sup_error(path, *system.chart, averaged, t);
        });

        TheoremRow row;
        row.epsilon = eps;
        row.estimate = summarize(sups, p, seed, cell++, opts.bootstrap_resamples);
        result.rows.push_back(row);
    }

    result.trivially_zero =
        std::all_of(result.rows.begin(), result.rows.end(),
                    [](const TheoremRow& r) { return r.estimate.value < kNoiseFloor; });

    result.no_inversion = no_ci_separated_increase<TheoremRow>(
        result.rows, [](const TheoremRow& r) { return r.estimate.ci_low; },
        [](const TheoremRow& r) { return r.estimate.ci_high; });
    result.strictly_decreasing = true;
    for (std::size_t i = 1; i < result.rows.size(); ++i)
        if (result.rows[i].estimate.ci_high >= result.rows[i - 1].estimate.ci_low)
            result.strictly_decreasing = false;

    if (!result.trivially_zero) {
        std::vector<double> eps, values, a, b;
        for (const auto& row : result.rows) {
            eps.push_back(row.epsilon);
            values.push_back(row.estimate.value);
            a.push_back(std::pow(row.epsilon, alpha));
            b.push_back(eta.eval(t * std::pow(std::abs(std::log(row.epsilon)), 2.0 * beta / p)));
        }
        if (eps.size() >= 3 &&
            std::all_of(values.begin(), values.end(), [](double v) { return v > 0.0; })) {
            const LineFit fit = loglog_fit(eps, values);
            RateFit rf;
            rf.slope = fit.slope;
            rf.intercept = fit.intercept;
            rf.stderr_ = fit.slope_stderr;
            rf.r_squared = fit.r_squared;
            for (std::size_t i = 0; i < eps.size(); ++i) rf.grid.emplace_back(eps[i], values[i]);
            result.fit = rf;
        }

        RateBound bound;
        bound.form = EnvelopeForm::thm41;
        bound.alpha = alpha;
        bound.beta = beta;
        bound.p = p;
        const Nnls2 c = nnls2(a, b, values);
        bound.c1 = c.c1;
        bound.c2 = c.c2;
        // Inflate to make the bound an envelope of the measured grid.
        double scale = 1.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double bi = bound.c1 * a[i] + bound.c2 * b[i];
            if (bi <= 0.0) {
                bound.c1 = std::max(bound.c1, values[i] / a[i]);
            } else {
                scale = std::max(scale, values[i] / bi);
            }
        }
        bound.c1 *= scale;
        bound.c2 *= scale;
        double goodness = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            const double bi = bound.c1 * a[i] + bound.c2 * b[i];
            if (bi > 0.0) goodness = std::max(goodness, values[i] / bi);
        }
        bound.goodness = goodness;
        result.bound = bound;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Exit probabilities

ExitProbResult estimate_exit_probability(const FoliatedSystem& system,
                                         const AveragedPath& averaged, double gamma, double p,
                                         const std::vector<double>& eps_grid, int replicas,
                                         std::uint64_t seed,
                                         std::optional<double> t_gamma_override,
                                         const McOptions& opts) {
    if (gamma <= 0.0) throw ParameterError("estimate_exit_probability: gamma must be positive");
    if (replicas < 2) throw ParameterError("estimate_exit_probability: need >= 2 replicas");

    const double t_gamma = t_gamma_override ? *t_gamma_override : averaged.t_gamma(gamma);
    if (!std::isfinite(t_gamma) || t_gamma <= 0.0)
        throw ParameterError(
            "estimate_exit_probability: T_gamma is not finite for this averaged path; "
            "set it explicitly");

    const Scheme scheme = opts.scheme_for(system);
    ExitProbResult result;
    result.gamma = gamma;
    result.t_gamma = t_gamma;
    result.p = p;

    for (double eps : eps_grid) {
        const double dt = eps * opts.h_slow;
        const int steps = steps_for_slow_horizon(t_gamma, eps, opts.h_slow);
        const FoliatedSystem sys_eps = system.with_epsilon(eps);
        std::vector<double> sups(replicas, 0.0);
        std::vector<char> exited(replicas, 0);

        parallel_replicas(replicas, opts.threads, [&](int rep) {
            const NoisePath noise = generate_noise(seed, static_cast<std::uint64_t>(rep),
                                                   system.driving_dims(), dt, steps);
            const Trajectory traj =
                integrate_stratonovich(sys_eps, system.default_x0, noise, scheme);
            const RescaledPath path = rescaled_view(traj, eps, opts.h_slow, t_gamma);
            exited[rep] = path.exit_slow_time && *path.exit_slow_time < t_gamma ? 1 : 0;
            sups[rep] = rescaled_sup_error(path, *system.chart, averaged, t_gamma);
        });

        ExitProbRow row;
        row.epsilon = eps;
        row.replicas = replicas;
        for (char e : exited) row.exits += e;
        row.empirical = static_cast<double>(row.exits) / replicas;
        const Interval95 wil = wilson_interval(row.exits, replicas);
        row.wilson_low = wil.lo;
        row.wilson_high = wil.hi;
        row.mc_estimate = power_mean(sups, p);
        row.bound = std::pow(gamma, -p) * std::pow(row.mc_estimate, p);
        result.rows.push_back(row);
    }

    result.bound_respected = true;
    for (const auto& row : result.rows)
        if (row.bound < 1.0 && row.empirical > row.bound + 1e-12) result.bound_respected = false;

    result.nonincreasing = no_ci_separated_increase<ExitProbRow>(
        result.rows, [](const ExitProbRow& r) { return r.wilson_low; },
        [](const ExitProbRow& r) { return r.wilson_high; });
    return result;
}

// ---------------------------------------------------------------------------
// Lyapunov spectrum

std::vector<double> estimate_lyapunov(const FoliatedSystem& system, double epsilon,
                                      double horizon, double dt, std::uint64_t seed,
                                      int qr_period, const McOptions& opts) {
    if (!system.drift.has_jacobian() || !system.perturbation.has_jacobian())
        throw JacobianMissing("estimate_lyapunov: drift or perturbation lacks a Jacobian");
    for (const auto& field : system.diffusion)
        if (!field.has_jacobian())
            throw JacobianMissing("estimate_lyapunov: a diffusion field lacks a Jacobian");
    if (qr_period < 1) throw ParameterError("estimate_lyapunov: qr_period must be >= 1");

    const int n = system.chart->ambient_dim();
    const int r = system.driving_dims();
    const int steps = static_cast<int>(std::llround(horizon / dt));
    const NoisePath noise = generate_noise(seed, 0, r, dt, steps);
    const FoliatedSystem sys_eps = system.with_epsilon(epsilon);
    const Scheme scheme = opts.scheme_for(system);

    // Stratonovich generator increment over one step, evaluated at x.
    const auto generator = [&](const Vec& x, const Vec& db) {
        Mat g = sys_eps.drift.jacobian(x);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) g(i, j) *= dt;
        if (epsilon != 0.0) {
            const Mat jk = sys_eps.perturbation.jacobian(x);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g(i, j) += epsilon * dt * jk(i, j);
        }
        for (int k = 0; k < r; ++k) {
            const Mat jx = sys_eps.diffusion[k].jacobian(x);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) g(i, j) += db[k] * jx(i, j);
        }
        return g;
    };

    // The flow is followed without domain truncation: exponents are asymptotic
    // objects of the system, not of the chart neighbourhood.
    Vec x = system.default_x0;
    Mat m = Mat::identity(n);
    Vec log_acc(n, 0.0);
    Vec db(r);

    for (int i = 0; i < steps; ++i) {
        for (int k = 0; k < r; ++k) db[k] = noise.at(i, k);
        const Mat g1 = generator(x, db);

        Vec x_next;
        if (scheme == Scheme::exact_leaf) {
            x_next = sys_eps.exact_leaf_step(x, dt, db);
            if (epsilon != 0.0) axpy(x_next, epsilon * dt, sys_eps.perturbation.eval(x_next));
        } else {
            // One Heun step on the state alone.
            Vec incr = sys_eps.drift.eval(x);
            if (epsilon != 0.0) axpy(incr, epsilon, sys_eps.perturbation.eval(x));
            for (auto& c : incr) c *= dt;
            for (int k = 0; k < r; ++k) axpy(incr, db[k], sys_eps.diffusion[k].eval(x));
            Vec pred = x;
            for (int j = 0; j < n; ++j) pred[j] += incr[j];
            Vec incr2 = sys_eps.drift.eval(pred);
            if (epsilon != 0.0) axpy(incr2, epsilon, sys_eps.perturbation.eval(pred));
            for (auto& c : incr2) c *= dt;
            for (int k = 0; k < r; ++k) axpy(incr2, db[k], sys_eps.diffusion[k].eval(pred));
            x_next = x;
            for (int j = 0; j < n; ++j) x_next[j] += 0.5 * (incr[j] + incr2[j]);
        }

        const Mat g2 = generator(x_next, db);
        const Mat g1m = g1.times(m);
        Mat pred_m = m;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) pred_m(a, b) += g1m(a, b);
        const Mat g2m = g2.times(pred_m);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) m(a, b) += 0.5 * (g1m(a, b) + g2m(a, b));

        x = x_next;
        if ((i + 1) % qr_period == 0 || i + 1 == steps) {
            const Vec rdiag = qr_orthonormalize(m);
            for (int j = 0; j < n; ++j) log_acc[j] += std::log(rdiag[j]);
        }
    }

    for (auto& v : log_acc) v /= steps * dt;
    std::sort(log_acc.begin(), log_acc.end(), std::greater<>());
    return log_acc;
}

// ---------------------------------------------------------------------------
// Ergodic rate and delta diagnostic

ErgodicRate fit_system_eta(const FoliatedSystem& system, int replicas, double horizon, double dt,
                           std::uint64_t seed, double p, double burn_in, const McOptions& opts) {
    const int d = system.chart->codim();
    const Vec v0 = system.chart->vertical_projection(system.default_x0);

    ErgodicRate dominant;
    dominant.model = ErgodicRate::Model::zero;
    double dominant_value = 0.0;
    for (int i = 0; i < d; ++i) {
        const auto g = system.vertical_component(i);
        const double qg = leaf_average_quadrature(system, g, v0, 128);
        std::vector<RunningAverage> curves(replicas);
        parallel_replicas(replicas, opts.threads, [&](int rep) {
            curves[rep] = leaf_average_timeseries(system, g, system.default_x0, horizon, dt, seed,
                                                  static_cast<std::uint64_t>(rep));
        });
        ErgodicRate rate;
        try {
            rate = fit_eta(curves, qg, p, burn_in);
        } catch (const FitError&) {
            continue;  // component with no resolvable decay; others may carry it
        }
        const double at_horizon = rate.eval(std::sqrt(burn_in * horizon));
        if (rate.model == ErgodicRate::Model::power && at_horizon > dominant_value) {
            dominant = rate;
            dominant_value = at_horizon;
        }
    }
    return dominant;
}

DeltaResult estimate_delta(const FoliatedSystem& system, int component,
                           const std::vector<double>& eps_grid, double s, double t, double p,
                           int replicas, std::uint64_t seed, const McOptions& opts) {
    if (component < 0 || component >= system.chart->codim())
        throw ParameterError("estimate_delta: component out of range");
    if (replicas < 2) throw ParameterError("estimate_delta: need >= 2 replicas");

    const auto g = system.vertical_component(component);
    const AveragedField q = system.averaged_closed_form
                                ? averaged_field_closed_form(system)
                                : averaged_field_quadrature(system);
    const auto qg = [&q, component](const Vec& v) { return q.eval(v)[component]; };

    const Scheme scheme = opts.scheme_for(system);
    DeltaResult result;
    result.s = s;
    result.t = t;

    std::uint64_t cell = 0;
    for (double eps : eps_grid) {
        const double dt = eps * opts.h_slow;
        const int steps = steps_for_slow_horizon(s + t, eps, opts.h_slow);
        const FoliatedSystem sys_eps = system.with_epsilon(eps);
        std::vector<double> sups(replicas, 0.0);

        parallel_replicas(replicas, opts.threads, [&](int rep) {
            const NoisePath noise = generate_noise(seed, static_cast<std::uint64_t>(rep),
                                                   system.driving_dims(), dt, steps);
            const Trajectory traj =
                integrate_stratonovich(sys_eps, system.default_x0, noise, scheme);
            const RescaledPath path = rescaled_view(traj, eps, opts.h_slow, s + t);
            const std::vector<double> curve = delta_running(path, *system.chart, g, qg, s);
            double sup = 0.0;
            for (std::size_t j = 0; j < curve.size(); ++j) {
                if (j * path.h > t + 1e-12) break;
                sup = std::max(sup, std::abs(curve[j]));
            }
            sups[rep] = sup;
        });

        DeltaRow row;
        row.epsilon = eps;
        row.estimate = summarize(sups, p, seed, cell++, opts.bootstrap_resamples);
        result.rows.push_back(row);
    }

    result.no_inversion = no_ci_separated_increase<DeltaRow>(
        result.rows, [](const DeltaRow& r) { return r.estimate.ci_low; },
        [](const DeltaRow& r) { return r.estimate.ci_high; });
    return result;
}

}  // namespace folsim
