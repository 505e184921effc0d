#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "folsim/systems.hpp"

namespace folsim {

enum class ExperimentKind {
    simulate,
    leaf_average,
    coupled_error,
    theorem,
    exit_prob,
    lyapunov,
    delta_diag
};

std::string experiment_name(ExperimentKind kind);

struct RunConfig {
    // [system]
    std::string system = "cylinder";  // cylinder | sphere | scalar_linear
    double lambda1 = 1.0;
    double lambda2 = 1.0;
    std::string perturbation = "constant";  // none | constant | vertical | linear
    double k1 = 1.0, k2 = 0.0, k3 = 0.0;
    double epsilon = 0.1;  // single-trajectory experiments (simulate)

    // [domain]
    double r_min = 0.2, r_max = 4.0;   // cylinder and sphere radial bounds
    double z_min = -2.0, z_max = 2.0;  // cylinder only
    double v_min = -1.0, v_max = 1.0;  // strip chart (scalar_linear)

    // [run]
    ExperimentKind experiment = ExperimentKind::theorem;
    std::vector<double> eps_grid{0.2, 0.1, 0.05};
    std::vector<double> t_grid{1.0};
    double p = 2.0;
    int replicas = 400;
    double h_slow = 1e-2;  // slow-grid resolution; rescaled runs use dt = eps*h_slow
    double dt = 1e-3;      // fast-time step (simulate, coupled-error, leaf-average)
    std::uint64_t master_seed = 42;
    int threads = 0;  // 0 = auto
    std::string out = "out";
    std::string tag = "run";
    std::string scheme = "auto";  // auto | heun | exact_leaf
    std::string f = "pi1";        // coupled-error observable
    double alpha = 0.9;
    double beta = 0.4;
    double gamma = 0.25;
    std::optional<double> t_gamma;
    double horizon = 400.0;  // fast-time horizon (simulate, leaf-average, lyapunov)
    std::string envelope_form = "none";    // none | lemma21 | cor22 | cor23
    std::string expect_envelope = "holds";  // holds | rejected
    int qr_period = 10;
    int quadrature_nodes = 64;
    int q_grid = 64;  // averaged-field table points per vertical dimension
    double burn_in = 5.0;
    int component = 0;    // vertical component index for delta / leaf-average
    double delta_s = 0.0;  // offset s of the delta integral
    std::vector<double> x0;  // empty = system default

    std::vector<double> effective_x0(const FoliatedSystem& sys) const {
        return x0.empty() ? sys.default_x0 : x0;
    }
};

// Parses the INI-style key-value text (sections [system], [domain], [run]).
// Throws ParseError on malformed syntax (with line/column) and
// ValidationError aggregating every violation, including unknown keys.
RunConfig parse_config(const std::string& text);

// A flag override "section.key=value" applied on top of the file before
// validation; bare "key=value" targets [run].
RunConfig parse_config_with_overrides(const std::string& text,
                                      const std::vector<std::string>& overrides);

// Deterministic serialization of the experiment-identity fields (threads and
// output locations excluded); hashing this yields the manifest config hash.
std::string canonical_config(const RunConfig& cfg);

// Instantiates the configured example system at the given epsilon.
FoliatedSystem build_system(const RunConfig& cfg, double epsilon);

// Resolves the named observable (pi1, pi2, x1, x2, x3) for the system.
std::function<double(const Vec&)> resolve_observable(const FoliatedSystem& sys,
                                                     const std::string& name);

}  // namespace folsim
