#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "folsim/averaging.hpp"
#include "folsim/sde.hpp"
#include "folsim/systems.hpp"

namespace folsim {

// L^p Monte Carlo estimate [E sup|.|^p]^{1/p} with a percentile-bootstrap
// 95% interval over replicas.
struct McEstimate {
    double value = 0.0;
    double p = 2.0;
    int replicas = 0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::uint64_t master_seed = 0;
};

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double stderr_ = 0.0;
    double r_squared = 0.0;
    std::vector<std::pair<double, double>> grid;  // (abscissa, estimate)
};

enum class EnvelopeForm {
    lemma21,  // K1 * eps * t * exp(K2 * t^p)
    cor22,    // K1 * eps * (t + t^2)
    cor23,    // K1 * eps * (t + t^{3/2})
    thm41     // C1 * eps^alpha + C2 * eta(t * |ln eps|^{2 beta / p})
};

struct RateBound {
    EnvelopeForm form = EnvelopeForm::cor22;
    double k1 = 0.0, k2 = 0.0;  // time-envelope constants
    double c1 = 0.0, c2 = 0.0;  // thm41 constants
    double alpha = 0.0, beta = 0.0;
    double p = 2.0;
    // Max ratio estimate/bound over the fitted grid (<= 1 by construction)
    // and the pre-fit ratio spread diagnostic.
    double goodness = 0.0;
    double spread = 1.0;

    double time_envelope(double epsilon, double t) const;
    double theorem_bound(double epsilon, double t, const ErgodicRate& eta) const;
};

struct McOptions {
    int threads = 0;         // 0 = all hardware threads
    double h_slow = 1e-2;    // slow-grid resolution; fast dt policy is eps*h_slow
    double dt = 1e-3;        // fast-time step for unscaled experiments
    bool prefer_exact_leaf = true;
    int bootstrap_resamples = 1000;

    Scheme scheme_for(const FoliatedSystem& system) const {
        return prefer_exact_leaf && system.has_exact_leaf() ? Scheme::exact_leaf : Scheme::heun;
    }
};

// ---------------------------------------------------------------------------
// Coupled-error scaling (fast-time estimates)

struct CoupledErrorRow {
    double epsilon = 0.0;
    double t = 0.0;
    McEstimate estimate;
};

struct CoupledErrorTable {
    std::vector<CoupledErrorRow> rows;
    double p = 2.0;
    int replicas = 0;
    std::uint64_t master_seed = 0;
};

// For each (eps, t): [E sup_{s<=t^tau} |f(y^eps_s) - f(x_s)|^p]^{1/p} from
// coupled trajectories on common noise (common across the eps grid as well).
CoupledErrorTable estimate_coupled_error(const FoliatedSystem& system,
                                         const std::function<double(const Vec&)>& f,
                                         const std::vector<double>& eps_grid,
                                         const std::vector<double>& t_grid, double p, int replicas,
                                         std::uint64_t seed, const McOptions& opts = {});

// Log-log slope of the estimate against eps at fixed t.
RateFit fit_epsilon_order(const CoupledErrorTable& table, double t_fixed);

// Fits the declared envelope over the t grid at fixed eps, inflating the
// leading constant until the bound dominates every grid point. Throws
// EnvelopeError when the estimate/shape ratios span more than max_spread,
// which signals that the declared form has the wrong growth in t.
RateBound fit_time_envelope(const CoupledErrorTable& table, double eps_fixed, EnvelopeForm form,
                            double max_spread = 10.0);

// ---------------------------------------------------------------------------
// Averaging theorem (rescaled transversal estimates)

struct TheoremRow {
    double epsilon = 0.0;
    McEstimate estimate;
};

struct TheoremResult {
    std::vector<TheoremRow> rows;
    double t = 0.0;
    bool trivially_zero = false;          // every estimate below 1e-12
    std::optional<RateFit> fit;           // absent when trivially zero
    std::optional<RateBound> bound;       // thm41 with fitted C1, C2
    bool no_inversion = true;             // no CI-separated increase in eps
    bool strictly_decreasing = true;      // CI-separated strict decrease
};

// Per eps: [E sup_{s<=t} |pi(y^eps_{s/eps ^ tau}) - v(s)|^p]^{1/p} on the slow
// grid, with v the averaged path. Requires t < T0.
TheoremResult verify_theorem(const FoliatedSystem& system, const AveragedPath& averaged,
                             const std::vector<double>& eps_grid, double t, double p, double alpha,
                             double beta, const ErgodicRate& eta, int replicas, std::uint64_t seed,
                             const McOptions& opts = {});

// ---------------------------------------------------------------------------
// Exit probabilities

struct ExitProbRow {
    double epsilon = 0.0;
    int exits = 0;
    int replicas = 0;
    double empirical = 0.0;
    double wilson_low = 0.0, wilson_high = 0.0;
    double mc_estimate = 0.0;  // theorem estimate at T_gamma (same replicas)
    double bound = 0.0;        // gamma^{-p} * mc_estimate^p
};

struct ExitProbResult {
    std::vector<ExitProbRow> rows;
    double gamma = 0.0;
    double t_gamma = 0.0;
    double p = 2.0;
    bool bound_respected = true;  // empirical <= bound wherever bound < 1
    bool nonincreasing = true;    // no Wilson-separated increase in eps
};

// Empirical P(eps*tau < T_gamma) with Wilson intervals, alongside the
// Chebyshev-type bound computed from the same replicas. T_gamma comes from
// the averaged path unless overridden (required when the path never
// approaches the boundary).
ExitProbResult estimate_exit_probability(const FoliatedSystem& system,
                                         const AveragedPath& averaged, double gamma, double p,
                                         const std::vector<double>& eps_grid, int replicas,
                                         std::uint64_t seed,
                                         std::optional<double> t_gamma_override = std::nullopt,
                                         const McOptions& opts = {});

// ---------------------------------------------------------------------------
// Lyapunov spectrum

// Time-averaged log of the R diagonal of the linearized flow with periodic
// QR re-orthonormalization; all ambient exponents, sorted descending.
// Throws JacobianMissing when a field has no Jacobian.
std::vector<double> estimate_lyapunov(const FoliatedSystem& system, double epsilon,
                                      double horizon, double dt, std::uint64_t seed,
                                      int qr_period = 10, const McOptions& opts = {});

// ---------------------------------------------------------------------------
// Ergodic-rate fitting and the delta diagnostic

// Fits eta for the system's vertical perturbation components from replicated
// running averages along the unperturbed flow; returns the slowest component
// rate (the one that dominates at the horizon).
ErgodicRate fit_system_eta(const FoliatedSystem& system, int replicas, double horizon, double dt,
                           std::uint64_t seed, double p, double burn_in,
                           const McOptions& opts = {});

struct DeltaRow {
    double epsilon = 0.0;
    McEstimate estimate;  // [E sup_{s'<=t} |delta(eps, s')|^p]^{1/p}
};

struct DeltaResult {
    std::vector<DeltaRow> rows;
    double s = 0.0, t = 0.0;
    bool no_inversion = true;
};

DeltaResult estimate_delta(const FoliatedSystem& system, int component,
                           const std::vector<double>& eps_grid, double s, double t, double p,
                           int replicas, std::uint64_t seed, const McOptions& opts = {});

// Deterministic parallel map over replica indices; results must be written to
// per-replica slots so the reduction is independent of scheduling.
void parallel_replicas(int replicas, int threads, const std::function<void(int)>& work);

}  // namespace folsim
