#include "folsim/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "folsim/errors.hpp"

namespace folsim {

namespace {

struct Entry {
    std::string section;
    std::string key;
    std::string value;
    int line = 0;
};

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<Entry> tokenize(const std::string& text) {
    std::vector<Entry> entries;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const std::string stripped = trim(raw.substr(0, raw.find('#')));
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ParseError("unterminated section header", line_no,
                                 static_cast<int>(raw.find('[')) + 1);
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) throw ParseError("empty section name", line_no, 1);
            continue;
        }
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key = value", line_no, 1);
        Entry e;
        e.section = section;
        e.key = trim(stripped.substr(0, eq));
        e.value = trim(stripped.substr(eq + 1));
        e.line = line_no;
        if (e.key.empty()) throw ParseError("missing key before '='", line_no, 1);
        entries.push_back(std::move(e));
    }
    return entries;
}

class Validator {
public:
    void fail(const std::string& msg) { errors_.push_back(msg); }

    bool parse_double(const Entry& e, double& out) {
        try {
            std::size_t used = 0;
            out = std::stod(e.value, &used);
            if (used != e.value.size() || !std::isfinite(out)) throw std::invalid_argument("");
            return true;
        } catch (...) {
            fail("[" + e.section + "] " + e.key + ": not a finite number: '" + e.value + "'");
            return false;
        }
    }

    bool parse_int(const Entry& e, int& out) {
        try {
            std::size_t used = 0;
            out = std::stoi(e.value, &used);
            if (used != e.value.size()) throw std::invalid_argument("");
            return true;
        } catch (...) {
            fail("[" + e.section + "] " + e.key + ": not an integer: '" + e.value + "'");
            return false;
        }
    }

    bool parse_u64(const Entry& e, std::uint64_t& out) {
        try {
            std::size_t used = 0;
            out = std::stoull(e.value, &used);
            if (used != e.value.size()) throw std::invalid_argument("");
            return true;
        } catch (...) {
            fail("[" + e.section + "] " + e.key + ": not an unsigned integer: '" + e.value + "'");
            return false;
        }
    }

    bool parse_double_list(const Entry& e, std::vector<double>& out) {
        std::vector<double> parsed;
        std::istringstream items(e.value);
        std::string item;
        while (std::getline(items, item, ',')) {
            item = trim(item);
            try {
                std::size_t used = 0;
                const double v = std::stod(item, &used);
                if (used != item.size() || !std::isfinite(v)) throw std::invalid_argument("");
                parsed.push_back(v);
            } catch (...) {
                fail("[" + e.section + "] " + e.key + ": bad list entry: '" + item + "'");
                return false;
            }
        }
        if (parsed.empty()) {
            fail("[" + e.section + "] " + e.key + ": empty list");
            return false;
        }
        out = std::move(parsed);
        return true;
    }

    void check(bool ok, const std::string& msg) {
        if (!ok) fail(msg);
    }

    void finish() const {
        if (errors_.empty()) return;
        std::string joined = std::to_string(errors_.size()) + " validation error(s):";
        for (const auto& e : errors_) joined += "\n  - " + e;
        throw ValidationError(joined);
    }

private:
    std::vector<std::string> errors_;
};

const std::set<std::string> kSystemKeys = {"name",  "lambda1", "lambda2", "perturbation",
                                           "k1",    "k2",      "k3",      "epsilon"};
const std::set<std::string> kDomainKeys = {"r_min", "r_max", "z_min", "z_max", "v_min", "v_max"};
const std::set<std::string> kRunKeys = {
    "experiment", "eps",           "t",          "p",          "replicas",   "h_slow",
    "dt",         "master_seed",   "threads",    "out",        "tag",        "scheme",
    "f",          "alpha",         "beta",       "gamma",      "t_gamma",    "horizon",
    "envelope_form", "expect_envelope", "qr_period", "quadrature_nodes", "q_grid",
    "burn_in",    "component",     "delta_s",    "x0"};

RunConfig build_config(const std::vector<Entry>& entries) {
    RunConfig cfg;
    Validator v;

    for (const Entry& e : entries) {
        if (e.section == "system") {
            if (!kSystemKeys.count(e.key)) {
                v.fail("[system] unknown key '" + e.key + "' (line " + std::to_string(e.line) + ")");
                continue;
            }
            if (e.key == "name") cfg.system = e.value;
            else if (e.key == "lambda1") v.parse_double(e, cfg.lambda1);
            else if (e.key == "lambda2") v.parse_double(e, cfg.lambda2);
            else if (e.key == "perturbation") cfg.perturbation = e.value;
            else if (e.key == "k1") v.parse_double(e, cfg.k1);
            else if (e.key == "k2") v.parse_double(e, cfg.k2);
            else if (e.key == "k3") v.parse_double(e, cfg.k3);
            else if (e.key == "epsilon") v.parse_double(e, cfg.epsilon);
        } else if (e.section == "domain") {
            if (!kDomainKeys.count(e.key)) {
                v.fail("[domain] unknown key '" + e.key + "' (line " + std::to_string(e.line) + ")");
                continue;
            }
            if (e.key == "r_min") v.parse_double(e, cfg.r_min);
            else if (e.key == "r_max") v.parse_double(e, cfg.r_max);
            else if (e.key == "z_min") v.parse_double(e, cfg.z_min);
            else if (e.key == "z_max") v.parse_double(e, cfg.z_max);
            else if (e.key == "v_min") v.parse_double(e, cfg.v_min);
            else if (e.key == "v_max") v.parse_double(e, cfg.v_max);
        } else if (e.section == "run") {
            if (!kRunKeys.count(e.key)) {
                v.fail("[run] unknown key '" + e.key + "' (line " + std::to_string(e.line) + ")");
                continue;
            }
            if (e.key == "experiment") {
                static const std::map<std::string, ExperimentKind> kinds = {
                    {"simulate", ExperimentKind::simulate},
                    {"leaf-average", ExperimentKind::leaf_average},
                    {"coupled-error", ExperimentKind::coupled_error},
                    {"theorem", ExperimentKind::theorem},
                    {"exit-prob", ExperimentKind::exit_prob},
                    {"lyapunov", ExperimentKind::lyapunov},
                    {"delta", ExperimentKind::delta_diag}};
                const auto it = kinds.find(e.value);
                if (it == kinds.end())
                    v.fail("[run] experiment: unknown experiment '" + e.value + "'");
                else
                    cfg.experiment = it->second;
            } else if (e.key == "eps") v.parse_double_list(e, cfg.eps_grid);
            else if (e.key == "t") v.parse_double_list(e, cfg.t_grid);
            else if (e.key == "p") v.parse_double(e, cfg.p);
            else if (e.key == "replicas") v.parse_int(e, cfg.replicas);
            else if (e.key == "h_slow") v.parse_double(e, cfg.h_slow);
            else if (e.key == "dt") v.parse_double(e, cfg.dt);
            else if (e.key == "master_seed") v.parse_u64(e, cfg.master_seed);
            else if (e.key == "threads") {
                if (e.value == "auto") cfg.threads = 0;
                else v.parse_int(e, cfg.threads);
            } else if (e.key == "out") cfg.out = e.value;
            else if (e.key == "tag") cfg.tag = e.value;
            else if (e.key == "scheme") cfg.scheme = e.value;
            else if (e.key == "f") cfg.f = e.value;
            else if (e.key == "alpha") v.parse_double(e, cfg.alpha);
            else if (e.key == "beta") v.parse_double(e, cfg.beta);
            else if (e.key == "gamma") v.parse_double(e, cfg.gamma);
            else if (e.key == "t_gamma") {
                double tg = 0.0;
                if (v.parse_double(e, tg)) cfg.t_gamma = tg;
            } else if (e.key == "horizon") v.parse_double(e, cfg.horizon);
            else if (e.key == "envelope_form") cfg.envelope_form = e.value;
            else if (e.key == "expect_envelope") cfg.expect_envelope = e.value;
            else if (e.key == "qr_period") v.parse_int(e, cfg.qr_period);
            else if (e.key == "quadrature_nodes") v.parse_int(e, cfg.quadrature_nodes);
            else if (e.key == "q_grid") v.parse_int(e, cfg.q_grid);
            else if (e.key == "burn_in") v.parse_double(e, cfg.burn_in);
            else if (e.key == "component") v.parse_int(e, cfg.component);
            else if (e.key == "delta_s") v.parse_double(e, cfg.delta_s);
            else if (e.key == "x0") v.parse_double_list(e, cfg.x0);
        } else {
            v.fail("unknown section '[" + e.section + "]' for key '" + e.key + "' (line " +
                   std::to_string(e.line) + ")");
        }
    }

    // Cross-field validation: every violation is reported, not just the first.
    const std::set<std::string> systems = {"cylinder", "sphere", "scalar_linear"};
    v.check(systems.count(cfg.system) > 0, "[system] name: unknown system '" + cfg.system + "'");
    const std::set<std::string> perturbations = {"none", "constant", "vertical", "linear"};
    v.check(perturbations.count(cfg.perturbation) > 0,
            "[system] perturbation: unknown kind '" + cfg.perturbation + "'");
    v.check(cfg.epsilon >= 0.0, "[system] epsilon: must be >= 0");

    v.check(cfg.r_min > 0.0, "[domain] r_min: must be > 0");
    v.check(cfg.r_min < cfg.r_max, "[domain] r_min/r_max: need r_min < r_max");
    v.check(cfg.z_min < cfg.z_max, "[domain] z_min/z_max: need z_min < z_max");
    v.check(cfg.v_min < cfg.v_max, "[domain] v_min/v_max: need v_min < v_max");

    for (double eps : cfg.eps_grid)
        v.check(eps >= 0.0, "[run] eps: entries must be >= 0 (got " + std::to_string(eps) + ")");
    for (double t : cfg.t_grid)
        v.check(t > 0.0, "[run] t: entries must be > 0");
    v.check(cfg.p >= 1.0, "[run] p: must be >= 1");
    v.check(cfg.replicas >= 2, "[run] replicas: must be >= 2 (confidence intervals)");
    v.check(cfg.h_slow > 0.0, "[run] h_slow: must be > 0");
    v.check(cfg.dt > 0.0, "[run] dt: must be > 0");
    v.check(cfg.threads >= 0, "[run] threads: must be >= 0 or 'auto'");
    const std::set<std::string> schemes = {"auto", "heun", "exact_leaf"};
    v.check(schemes.count(cfg.scheme) > 0, "[run] scheme: unknown scheme '" + cfg.scheme + "'");
    const std::set<std::string> observables = {"pi1", "pi2", "x1", "x2", "x3"};
    v.check(observables.count(cfg.f) > 0, "[run] f: unknown observable '" + cfg.f + "'");
    v.check(cfg.alpha > 0.0 && cfg.alpha < 1.0, "[run] alpha: must be in (0,1)");
    v.check(cfg.beta > 0.0 && cfg.beta < 0.5, "[run] beta: must be in (0,1/2)");
    v.check(cfg.gamma > 0.0, "[run] gamma: must be > 0");
    if (cfg.t_gamma) v.check(*cfg.t_gamma > 0.0, "[run] t_gamma: must be > 0");
    v.check(cfg.horizon > 0.0, "[run] horizon: must be > 0");
    const std::set<std::string> forms = {"none", "lemma21", "cor22", "cor23"};
    v.check(forms.count(cfg.envelope_form) > 0,
            "[run] envelope_form: unknown form '" + cfg.envelope_form + "'");
    v.check(cfg.expect_envelope == "holds" || cfg.expect_envelope == "rejected",
            "[run] expect_envelope: must be 'holds' or 'rejected'");
    v.check(cfg.qr_period >= 1, "[run] qr_period: must be >= 1");
    v.check(cfg.quadrature_nodes >= 2, "[run] quadrature_nodes: must be >= 2");
    v.check(cfg.q_grid >= 2, "[run] q_grid: must be >= 2");
    v.check(cfg.burn_in > 0.0, "[run] burn_in: must be > 0");
    v.check(cfg.component >= 0, "[run] component: must be >= 0");
    v.check(cfg.delta_s >= 0.0, "[run] delta_s: must be >= 0");
    if (!cfg.x0.empty()) {
        const std::size_t want = cfg.system == "scalar_linear" ? 2 : 3;
        v.check(cfg.x0.size() == want,
                "[run] x0: expected " + std::to_string(want) + " coordinates");
    }
    const int codim = cfg.system == "cylinder" ? 2 : 1;
    v.check(cfg.component < codim, "[run] component: out of range for system '" + cfg.system + "'");

    v.finish();
    return cfg;
}

}  // namespace

std::string experiment_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::simulate: return "simulate";
        case ExperimentKind::leaf_average: return "leaf-average";
        case ExperimentKind::coupled_error: return "coupled-error";
        case ExperimentKind::theorem: return "theorem";
        case ExperimentKind::exit_prob: return "exit-prob";
        case ExperimentKind::lyapunov: return "lyapunov";
        case ExperimentKind::delta_diag: return "delta";
    }
    return "unknown";
}

RunConfig parse_config(const std::string& text) {
    return build_config(tokenize(text));
}

RunConfig parse_config_with_overrides(const std::string& text,
                                      const std::vector<std::string>& overrides) {
    std::vector<Entry> entries = tokenize(text);
    int pseudo_line = -1;
    for (const std::string& ov : overrides) {
        const std::size_t eq = ov.find('=');
        if (eq == std::string::npos)
            throw ParseError("override must look like key=value: '" + ov + "'", 0, 1);
        std::string key = trim(ov.substr(0, eq));
        std::string section = "run";
        const std::size_t dot = key.find('.');
        if (dot != std::string::npos) {
            section = key.substr(0, dot);
            key = key.substr(dot + 1);
        }
        entries.push_back({section, key, trim(ov.substr(eq + 1)), pseudo_line--});
    }
    return build_config(entries);
}

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::string fmt_list(const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(xs[i]);
    }
    return out;
}

}  // namespace

std::string canonical_config(const RunConfig& cfg) {
    std::ostringstream os;
    os << "system=" << cfg.system
       << "\nlambda1=" << fmt_double(cfg.lambda1)
       << "\nlambda2=" << fmt_double(cfg.lambda2)
       << "\nperturbation=" << cfg.perturbation
       << "\nk=" << fmt_double(cfg.k1) << "," << fmt_double(cfg.k2) << "," << fmt_double(cfg.k3)
       << "\nepsilon=" << fmt_double(cfg.epsilon)
       << "\ndomain=" << fmt_double(cfg.r_min) << "," << fmt_double(cfg.r_max) << ","
       << fmt_double(cfg.z_min) << "," << fmt_double(cfg.z_max) << "," << fmt_double(cfg.v_min)
       << "," << fmt_double(cfg.v_max)
       << "\nexperiment=" << experiment_name(cfg.experiment)
       << "\neps=" << fmt_list(cfg.eps_grid)
       << "\nt=" << fmt_list(cfg.t_grid)
       << "\np=" << fmt_double(cfg.p)
       << "\nreplicas=" << cfg.replicas
       << "\nh_slow=" << fmt_double(cfg.h_slow)
       << "\ndt=" << fmt_double(cfg.dt)
       << "\nmaster_seed=" << cfg.master_seed
       << "\nscheme=" << cfg.scheme
       << "\nf=" << cfg.f
       << "\nalpha=" << fmt_double(cfg.alpha)
       << "\nbeta=" << fmt_double(cfg.beta)
       << "\ngamma=" << fmt_double(cfg.gamma)
       << "\nt_gamma=" << (cfg.t_gamma ? fmt_double(*cfg.t_gamma) : "auto")
       << "\nhorizon=" << fmt_double(cfg.horizon)
       << "\nenvelope_form=" << cfg.envelope_form
       << "\nexpect_envelope=" << cfg.expect_envelope
       << "\nqr_period=" << cfg.qr_period
       << "\nquadrature_nodes=" << cfg.quadrature_nodes
       << "\nq_grid=" << cfg.q_grid
       << "\nburn_in=" << fmt_double(cfg.burn_in)
       << "\ncomponent=" << cfg.component
       << "\ndelta_s=" << fmt_double(cfg.delta_s)
       << "\nx0=" << (cfg.x0.empty() ? "default" : fmt_list(cfg.x0)) << "\n";
    return os.str();
}

FoliatedSystem build_system(const RunConfig& cfg, double epsilon) {
    const auto kind = [&]() -> PerturbationKind {
        if (cfg.perturbation == "none") return PerturbationKind::none;
        if (cfg.perturbation == "linear") return PerturbationKind::linear_x;
        return PerturbationKind::constant;
    }();
    const bool vertical = cfg.perturbation == "vertical";

    if (cfg.system == "cylinder") {
        CylinderParams params;
        params.lambda1 = cfg.lambda1;
        params.lambda2 = cfg.lambda2;
        params.r_range = {cfg.r_min, cfg.r_max};
        params.z_range = {cfg.z_min, cfg.z_max};
        params.kind = kind;
        params.k1 = vertical ? 0.0 : cfg.k1;
        params.k2 = vertical ? 0.0 : cfg.k2;
        params.k3 = cfg.k3;
        return make_cylinder_system(params, epsilon);
    }
    if (cfg.system == "sphere") {
        SphereParams params;
        params.lambda1 = cfg.lambda1;
        params.lambda2 = cfg.lambda2;
        params.r_range = {cfg.r_min, cfg.r_max};
        params.kind = kind;
        params.k1 = vertical ? 0.0 : cfg.k1;
        params.k2 = vertical ? 0.0 : cfg.k2;
        params.k3 = cfg.k3;
        return make_sphere_system(params, epsilon);
    }
    return make_scalar_linear_system(epsilon, {cfg.v_min, cfg.v_max});
}

std::function<double(const Vec&)> resolve_observable(const FoliatedSystem& sys,
                                                     const std::string& name) {
    const auto chart = sys.chart;
    if (name == "pi1") return [chart](const Vec& p) { return chart->project(p)[0]; };
    if (name == "pi2") {
        if (chart->codim() < 2)
            throw ParameterError("observable pi2: system has codimension 1");
        return [chart](const Vec& p) { return chart->project(p)[1]; };
    }
    if (name == "x1") return [](const Vec& p) { return p[0]; };
    if (name == "x2") return [](const Vec& p) { return p[1]; };
    if (name == "x3") {
        if (chart->ambient_dim() < 3)
            throw ParameterError("observable x3: system is two-dimensional");
        return [](const Vec& p) { return p[2]; };
    }
    throw ParameterError("unknown observable '" + name + "'");
}

}  // namespace folsim
