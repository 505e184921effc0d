#include "folsim/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "folsim/averaging.hpp"
#include "folsim/errors.hpp"
#include "folsim/experiments.hpp"
#include "folsim/stats.hpp"

namespace folsim {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string csv_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

namespace {

constexpr double kZeroEstimate = 1e-9;  // below this an L^p estimate is rounding noise

struct Context {
    const RunConfig& cfg;
    fs::path dir;
    std::vector<Verdict> verdicts;
    json summary;

    void verdict(const std::string& property, bool ok, const std::string& detail = "") {
        verdicts.push_back({property, ok, detail});
    }

    void write_file(const std::string& name, const std::string& content) const {
        std::ofstream out(dir / name, std::ios::binary);
        out << content;
    }
};

McOptions make_options(const RunConfig& cfg) {
    McOptions opts;
    opts.threads = cfg.threads;
    opts.h_slow = cfg.h_slow;
    opts.dt = cfg.dt;
    opts.prefer_exact_leaf = cfg.scheme != "heun";
    return opts;
}

Scheme resolve_scheme(const RunConfig& cfg, const FoliatedSystem& sys) {
    if (cfg.scheme == "heun") return Scheme::heun;
    if (cfg.scheme == "exact_leaf") {
        if (!sys.has_exact_leaf())
            throw SchemeError("scheme exact_leaf requested but system '" + sys.name +
                              "' declares no closed-form leaf flow");
        return Scheme::exact_leaf;
    }
    return sys.has_exact_leaf() ? Scheme::exact_leaf : Scheme::heun;
}

std::string estimate_csv_header() {
    return "epsilon,t,p,estimate,ci_low,ci_high,replicas\n";
}

std::string estimate_csv_row(double eps, double t, const McEstimate& e) {
    std::ostringstream os;
    os << csv_double(eps) << ',' << csv_double(t) << ',' << csv_double(e.p) << ','
       << csv_double(e.value) << ',' << csv_double(e.ci_low) << ',' << csv_double(e.ci_high) << ','
       << e.replicas << '\n';
    return os.str();
}

json estimate_json(const McEstimate& e) {
    return {{"value", e.value}, {"ci_low", e.ci_low}, {"ci_high", e.ci_high},
            {"replicas", e.replicas}, {"p", e.p}};
}

// The foliation invariant is rechecked on every run before any simulation.
void check_foliation(Context& ctx, const FoliatedSystem& sys) {
    std::vector<VectorField> fields;
    fields.push_back(sys.drift);
    for (const auto& f : sys.diffusion) fields.push_back(f);
    const auto points = sys.chart->sample_domain_points(100, ctx.cfg.master_seed);
    const FoliationReport report = verify_foliated(fields, *sys.chart, points);
    ctx.summary["foliation_max_violation"] = report.max_violation;
}

// ---------------------------------------------------------------------------

void run_simulate(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const FoliatedSystem sys = build_system(cfg, cfg.epsilon);
    check_foliation(ctx, sys);
    const Scheme scheme = resolve_scheme(cfg, sys);
    const int steps = static_cast<int>(std::llround(cfg.horizon / cfg.dt));
    const NoisePath noise =
        generate_noise(cfg.master_seed, 0, sys.driving_dims(), cfg.dt, steps);
    const Trajectory traj = integrate_stratonovich(sys, cfg.effective_x0(sys), noise, scheme);

    const int n = sys.chart->ambient_dim();
    const int d = sys.chart->codim();
    std::ostringstream csv;
    csv << "t";
    for (int i = 1; i <= n; ++i) csv << ",x" << i;
    for (int i = 1; i <= d; ++i) csv << ",pi" << i;
    csv << '\n';
    for (int i = 0; i <= traj.last_index(); ++i) {
        csv << csv_double(traj.time(i));
        for (int j = 0; j < n; ++j) csv << ',' << csv_double(traj.states[i][j]);
        const Vec pi = sys.chart->project(traj.states[i]);
        for (int j = 0; j < d; ++j) csv << ',' << csv_double(pi[j]);
        csv << '\n';
    }
    csv << "# exit_time=" << (traj.exit_time() ? csv_double(*traj.exit_time()) : "none") << '\n';
    ctx.write_file("table.csv", csv.str());

    ctx.summary["steps"] = traj.last_index();
    ctx.summary["exit_time"] = traj.exit_time() ? json(*traj.exit_time()) : json(nullptr);
}

void run_leaf_average(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const FoliatedSystem sys = build_system(cfg, 0.0);
    check_foliation(ctx, sys);
    const int d = sys.chart->codim();
    const Vec x0 = cfg.effective_x0(sys);
    const Vec v0 = sys.chart->vertical_projection(x0);

    // Q table over the vertical grid.
    const Box& box = sys.chart->vertical_domain();
    std::ostringstream csv;
    for (int i = 1; i <= d; ++i) csv << (i > 1 ? "," : "") << "v" << i;
    for (int i = 1; i <= d; ++i) csv << ",Q" << i;
    csv << '\n';
    std::vector<std::function<double(const Vec&)>> gs;
    for (int i = 0; i < d; ++i) gs.push_back(sys.vertical_component(i));
    std::size_t total = 1;
    for (int axis = 0; axis < d; ++axis) total *= cfg.q_grid;
    for (std::size_t node = 0; node < total; ++node) {
        std::size_t rest = node;
        Vec v(d);
        for (int axis = d - 1; axis >= 0; --axis) {
            const int j = static_cast<int>(rest % cfg.q_grid);
            rest /= cfg.q_grid;
            const Interval& b = box.bound(axis);
            v[axis] = b.lo + (b.hi - b.lo) * j / (cfg.q_grid - 1);
        }
        for (int axis = 0; axis < d; ++axis) csv << (axis ? "," : "") << csv_double(v[axis]);
        for (int i = 0; i < d; ++i)
            csv << ',' << csv_double(leaf_average_quadrature(sys, gs[i], v, cfg.quadrature_nodes));
        csv << '\n';
    }
    ctx.write_file("table.csv", csv.str());

    // Time-average cross-check per component, with rate fits.
    ctx.summary["components"] = json::array();
    for (int i = 0; i < d; ++i) {
        const double quad = leaf_average_quadrature(sys, gs[i], v0, cfg.quadrature_nodes);
        std::vector<RunningAverage> curves(cfg.replicas);
        parallel_replicas(cfg.replicas, cfg.threads, [&](int rep) {
            curves[rep] = leaf_average_timeseries(sys, gs[i], x0, cfg.horizon, cfg.dt,
                                                  cfg.master_seed, rep);
        });
        json comp;
        comp["component"] = i + 1;
        comp["quadrature"] = quad;

        std::vector<double> deviations(cfg.replicas);
        for (int rep = 0; rep < cfg.replicas; ++rep)
            deviations[rep] = curves[rep].estimate - quad;
        const double lp_dev = power_mean(deviations, cfg.p);
        comp["time_average_lp_deviation"] = lp_dev;

        ErgodicRate eta;
        std::string eta_note = "power";
        try {
            eta = fit_eta(curves, quad, cfg.p, cfg.burn_in);
        } catch (const FitError& err) {
            eta_note = err.what();
        }
        if (eta.model == ErgodicRate::Model::zero) {
            comp["eta"] = {{"model", "zero"}};
        } else {
            comp["eta"] = {{"model", "power"}, {"c", eta.c}, {"q", eta.q},
                           {"stderr", eta.fit_stderr}};
        }
        comp["eta_note"] = eta_note;

        const double tol = eta.model == ErgodicRate::Model::zero
                               ? kZeroEstimate
                               : 3.0 * eta.eval(cfg.horizon);
        const bool ok = lp_dev <= tol;
        std::ostringstream detail;
        detail << "component " << i + 1 << ": |time_avg - quadrature|_Lp = " << lp_dev
               << " vs 3*eta(T) = " << tol;
        ctx.verdict("quadrature/time-average consistency (component " + std::to_string(i + 1) + ")",
                    ok, detail.str());
        comp["consistent"] = ok;
        ctx.summary["components"].push_back(comp);

        if (i == cfg.component) {
            // Error-curve export for the configured component.
            std::vector<double> err(curves.front().times.size());
            std::vector<double> at(curves.size());
            for (std::size_t j = 0; j < err.size(); ++j) {
                for (std::size_t c = 0; c < curves.size(); ++c)
                    at[c] = curves[c].values[j] - quad;
                err[j] = power_mean(at, cfg.p);
            }
            const std::vector<double> env = nonincreasing_envelope(err);
            std::ostringstream curve_csv;
            curve_csv << "t,lp_error,envelope\n";
            for (std::size_t j = 0; j < err.size(); ++j)
                curve_csv << csv_double(curves.front().times[j]) << ',' << csv_double(err[j])
                          << ',' << csv_double(env[j]) << '\n';
            ctx.write_file("curves.csv", curve_csv.str());
        }
    }
}

void run_coupled_error(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const FoliatedSystem sys = build_system(cfg, 0.0);
    check_foliation(ctx, sys);
    const auto f = resolve_observable(sys, cfg.f);
    McOptions opts = make_options(cfg);
    opts.prefer_exact_leaf = resolve_scheme(cfg, sys) == Scheme::exact_leaf;

    const CoupledErrorTable table = estimate_coupled_error(
        sys, f, cfg.eps_grid, cfg.t_grid, cfg.p, cfg.replicas, cfg.master_seed, opts);

    std::ostringstream csv;
    csv << estimate_csv_header();
    for (const auto& row : table.rows) csv << estimate_csv_row(row.epsilon, row.t, row.estimate);
    ctx.write_file("table.csv", csv.str());

    ctx.summary["slopes"] = json::array();
    for (double t : cfg.t_grid) {
        // Monotonicity across the eps grid at fixed t.
        std::vector<McEstimate> at_t;
        for (const auto& row : table.rows)
            if (std::abs(row.t - t) <= 1e-12 * std::max(1.0, t)) at_t.push_back(row.estimate);
        bool no_inversion = true;
        for (std::size_t i = 1; i < at_t.size(); ++i)
            if (at_t[i].ci_low > at_t[i - 1].ci_high) no_inversion = false;
        ctx.verdict("no CI-separated inversion in eps (t=" + csv_double(t) + ")", no_inversion);

        if (cfg.eps_grid.size() >= 3) {
            json entry;
            entry["t"] = t;
            const bool all_zero = std::all_of(at_t.begin(), at_t.end(), [](const McEstimate& e) {
                return e.value < kZeroEstimate;
            });
            if (all_zero) {
                entry["slope"] = nullptr;
                entry["note"] = "estimates identically zero";
            } else {
                try {
                    const RateFit fit = fit_epsilon_order(table, t);
                    entry["slope"] = fit.slope;
                    entry["stderr"] = fit.stderr_;
                    entry["r_squared"] = fit.r_squared;
                } catch (const FitError& err) {
                    entry["slope"] = nullptr;
                    entry["note"] = err.what();
                }
            }
            ctx.summary["slopes"].push_back(entry);
        }
    }

    if (cfg.envelope_form != "none") {
        const EnvelopeForm form = cfg.envelope_form == "lemma21" ? EnvelopeForm::lemma21
                                  : cfg.envelope_form == "cor22" ? EnvelopeForm::cor22
                                                                 : EnvelopeForm::cor23;
        ctx.summary["envelopes"] = json::array();
        int rejected = 0;
        for (double eps : cfg.eps_grid) {
            json entry;
            entry["epsilon"] = eps;
            try {
                const RateBound bound = fit_time_envelope(table, eps, form);
                entry["k1"] = bound.k1;
                if (form == EnvelopeForm::lemma21) entry["k2"] = bound.k2;
                entry["goodness"] = bound.goodness;
                entry["spread"] = bound.spread;
            } catch (const EnvelopeError& err) {
                ++rejected;
                entry["rejected"] = err.what();
            }
            ctx.summary["envelopes"].push_back(entry);
        }
        const int total = static_cast<int>(cfg.eps_grid.size());
        if (cfg.expect_envelope == "holds")
            ctx.verdict("envelope form " + cfg.envelope_form + " dominates the grid",
                        rejected == 0,
                        std::to_string(rejected) + "/" + std::to_string(total) + " rejected");
        else
            ctx.verdict("envelope form " + cfg.envelope_form + " rejected (expected)",
                        rejected == total,
                        std::to_string(rejected) + "/" + std::to_string(total) + " rejected");
    }
}

AveragedPath averaged_path_for(const RunConfig& cfg, const FoliatedSystem& sys, double t_max) {
    const AveragedField q = averaged_field_quadrature(sys, cfg.q_grid, cfg.quadrature_nodes);
    const Vec v0 = sys.chart->vertical_projection(cfg.effective_x0(sys));
    const double step = std::min(1e-3, cfg.h_slow / 4.0);
    return solve_averaged_ode(q, sys.chart->vertical_domain(), v0, t_max, step);
}

std::string averaged_path_csv(const AveragedPath& path) {
    std::ostringstream csv;
    csv << "t";
    for (std::size_t i = 1; i <= path.values.front().size(); ++i) csv << ",v" << i;
    csv << '\n';
    for (std::size_t i = 0; i < path.times.size(); ++i) {
        csv << csv_double(path.times[i]);
        for (double v : path.values[i]) csv << ',' << csv_double(v);
        csv << '\n';
    }
    return csv.str();
}

ErgodicRate theorem_eta(const RunConfig& cfg, const FoliatedSystem& sys) {
    // Fixed protocol for the rate entering the theorem bound: 64 replicas to
    // horizon 200 at dt 0.01, dominant vertical component.
    McOptions opts = make_options(cfg);
    opts.dt = 0.01;
    return fit_system_eta(sys, std::min(cfg.replicas, 64), 200.0, 0.01,
                          cfg.master_seed + 0x657461 /* "eta" */, cfg.p, cfg.burn_in, opts);
}

void run_theorem(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const FoliatedSystem sys = build_system(cfg, 0.0);
    check_foliation(ctx, sys);
    const double t = cfg.t_grid.front();
    const AveragedPath path = averaged_path_for(cfg, sys, t);
    ctx.write_file("path.csv", averaged_path_csv(path));

    const ErgodicRate eta = theorem_eta(cfg, sys);
    McOptions opts = make_options(cfg);
    opts.prefer_exact_leaf = resolve_scheme(cfg, sys) == Scheme::exact_leaf;

    const TheoremResult result = verify_theorem(sys, path, cfg.eps_grid, t, cfg.p, cfg.alpha,
                                                cfg.beta, eta, cfg.replicas, cfg.master_seed, opts);

    std::ostringstream csv;
    csv << estimate_csv_header();
    for (const auto& row : result.rows) csv << estimate_csv_row(row.epsilon, t, row.estimate);
    ctx.write_file("table.csv", csv.str());

    ctx.summary["eta"] = eta.model == ErgodicRate::Model::zero
                             ? json{{"model", "zero"}}
                             : json{{"model", "power"}, {"c", eta.c}, {"q", eta.q}};
    ctx.summary["rows"] = json::array();
    for (const auto& row : result.rows) {
        json r = estimate_json(row.estimate);
        r["epsilon"] = row.epsilon;
        ctx.summary["rows"].push_back(r);
    }

    ctx.verdict("no CI-separated inversion in eps", result.no_inversion);
    if (result.trivially_zero) {
        ctx.verdict("transversal estimates identically zero (trivial convergence)", true);
        ctx.summary["trivially_zero"] = true;
    } else {
        ctx.summary["trivially_zero"] = false;
        if (result.fit) {
            ctx.summary["fit"] = {{"slope", result.fit->slope},
                                  {"stderr", result.fit->stderr_},
                                  {"r_squared", result.fit->r_squared}};
            ctx.verdict("fitted eps-exponent positive", result.fit->slope > 0.0,
                        "slope = " + csv_double(result.fit->slope));
        } else {
            ctx.verdict("fitted eps-exponent positive", false, "fit unavailable");
        }
        if (result.bound) {
            ctx.summary["bound"] = {{"c1", result.bound->c1},
                                    {"c2", result.bound->c2},
                                    {"alpha", result.bound->alpha},
                                    {"beta", result.bound->beta},
                                    {"goodness", result.bound->goodness}};
            ctx.verdict("theorem bound dominates the grid", result.bound->goodness <= 1.0 + 1e-12,
                        "goodness = " + csv_double(result.bound->goodness));
        }
    }
    ctx.summary["strictly_decreasing"] = result.strictly_decreasing;
}

void run_exit_prob(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const FoliatedSystem sys = build_system(cfg, 0.0);
    check_foliation(ctx, sys);
    const double ode_horizon = cfg.t_gamma ? *cfg.t_gamma : 100.0;
    const AveragedPath path = averaged_path_for(cfg, sys, ode_horizon);
    ctx.write_file("path.csv", averaged_path_csv(path));

    McOptions opts = make_options(cfg);
    opts.prefer_exact_leaf = resolve_scheme(cfg, sys) == Scheme::exact_leaf;

    const ExitProbResult result =
        estimate_exit_probability(sys, path, cfg.gamma, cfg.p, cfg.eps_grid, cfg.replicas,
                                  cfg.master_seed, cfg.t_gamma, opts);

    std::ostringstream csv;
    csv << "epsilon,exits,replicas,empirical,wilson_low,wilson_high,mc_estimate,bound\n";
    for (const auto& row : result.rows) {
        csv << csv_double(row.epsilon) << ',' << row.exits << ',' << row.replicas << ','
            << csv_double(row.empirical) << ',' << csv_double(row.wilson_low) << ','
            << csv_double(row.wilson_high) << ',' << csv_double(row.mc_estimate) << ','
            << csv_double(row.bound) << '\n';
    }
    ctx.write_file("table.csv", csv.str());

    ctx.summary["gamma"] = result.gamma;
    ctx.summary["t_gamma"] = result.t_gamma;
    ctx.verdict("empirical exit probability <= theorem bound where bound < 1",
                result.bound_respected);
    ctx.verdict("no Wilson-separated increase in eps", result.nonincreasing);
}

void run_lyapunov(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const FoliatedSystem sys = build_system(cfg, 0.0);
    check_foliation(ctx, sys);
    McOptions opts = make_options(cfg);
    opts.prefer_exact_leaf = resolve_scheme(cfg, sys) == Scheme::exact_leaf;

    const int n = sys.chart->ambient_dim();
    const int d = sys.chart->codim();
    std::vector<std::vector<double>> spectra;
    std::ostringstream csv;
    csv << "epsilon";
    for (int i = 1; i <= n; ++i) csv << ",lambda" << i;
    csv << '\n';
    for (double eps : cfg.eps_grid) {
        const auto spectrum =
            estimate_lyapunov(sys, eps, cfg.horizon, cfg.dt, cfg.master_seed, cfg.qr_period, opts);
        spectra.push_back(spectrum);
        csv << csv_double(eps);
        for (double l : spectrum) csv << ',' << csv_double(l);
        csv << '\n';
    }
    ctx.write_file("table.csv", csv.str());

    ctx.summary["spectra"] = json::array();
    for (std::size_t i = 0; i < spectra.size(); ++i)
        ctx.summary["spectra"].push_back({{"epsilon", cfg.eps_grid[i]}, {"spectrum", spectra[i]}});

    // When the averaged perturbation vanishes, the transversal exponents must
    // stay near or below zero and settle as eps shrinks.
    bool q_vanishes = false;
    if (sys.averaged_closed_form) {
        const Vec q0 =
            sys.averaged_closed_form(sys.chart->vertical_projection(cfg.effective_x0(sys)));
        q_vanishes = std::all_of(q0.begin(), q0.end(), [](double v) { return std::abs(v) < 1e-14; });
    }
    ctx.summary["averaged_perturbation_vanishes"] = q_vanishes;
    if (q_vanishes && !spectra.empty()) {
        bool small = true;
        for (const auto& spectrum : spectra)
            for (int j = n - d; j < n; ++j)
                if (spectrum[j] > 0.02) small = false;
        ctx.verdict("transversal exponents <= 0.02", small);
        if (spectra.size() >= 2) {
            const double first = spectra.front()[n - d];
            const double last = spectra.back()[n - d];
            ctx.verdict("transversal exponents nonincreasing toward 0", last <= first + 5e-3,
                        csv_double(first) + " -> " + csv_double(last));
        }
    }
}

void run_delta(Context& ctx) {
    const RunConfig& cfg = ctx.cfg;
    const FoliatedSystem sys = build_system(cfg, 0.0);
    check_foliation(ctx, sys);
    McOptions opts = make_options(cfg);
    opts.prefer_exact_leaf = resolve_scheme(cfg, sys) == Scheme::exact_leaf;
    const double t = cfg.t_grid.front();

    const DeltaResult result = estimate_delta(sys, cfg.component, cfg.eps_grid, cfg.delta_s, t,
                                              cfg.p, cfg.replicas, cfg.master_seed, opts);
    std::ostringstream csv;
    csv << estimate_csv_header();
    for (const auto& row : result.rows) csv << estimate_csv_row(row.epsilon, t, row.estimate);
    ctx.write_file("table.csv", csv.str());

    ctx.verdict("no CI-separated inversion in eps", result.no_inversion);
}

}  // namespace

RunResult run_experiment(const RunConfig& cfg) {
    Context ctx{cfg, {}, {}, json::object()};
    const fs::path dir = fs::path(cfg.out) / experiment_name(cfg.experiment) / cfg.tag;
    fs::create_directories(dir);
    ctx.dir = dir;

    ctx.summary["experiment"] = experiment_name(cfg.experiment);
    ctx.summary["system"] = cfg.system;
    ctx.summary["master_seed"] = cfg.master_seed;

    switch (cfg.experiment) {
        case ExperimentKind::simulate: run_simulate(ctx); break;
        case ExperimentKind::leaf_average: run_leaf_average(ctx); break;
        case ExperimentKind::coupled_error: run_coupled_error(ctx); break;
        case ExperimentKind::theorem: run_theorem(ctx); break;
        case ExperimentKind::exit_prob: run_exit_prob(ctx); break;
        case ExperimentKind::lyapunov: run_lyapunov(ctx); break;
        case ExperimentKind::delta_diag: run_delta(ctx); break;
    }

    bool all_ok = true;
    std::ostringstream summary_text;
    for (const auto& v : ctx.verdicts) {
        all_ok = all_ok && v.ok;
        summary_text << (v.ok ? "[ok]   " : "[FAIL] ") << v.property;
        if (!v.detail.empty()) summary_text << " -- " << v.detail;
        summary_text << '\n';
    }
    summary_text << '\n' << ctx.summary.dump(2) << '\n';
    ctx.write_file("summary.txt", summary_text.str());

    {
        char line[128];
        std::snprintf(line, sizeof(line), "config_hash=%016llx master_seed=%llu tool_version=%s\n",
                      static_cast<unsigned long long>(fnv1a64(canonical_config(cfg))),
                      static_cast<unsigned long long>(cfg.master_seed), kToolVersion);
        ctx.write_file("manifest", line);
    }

    RunResult result;
    result.exit_code = all_ok ? 0 : 2;
    result.verdicts = std::move(ctx.verdicts);
    result.out_dir = dir.string();
    return result;
}

}  // namespace folsim
