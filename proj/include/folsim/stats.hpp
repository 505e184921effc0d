#pragma once

#include <cstdint>
#include <vector>

namespace folsim {

double mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);

// [ (1/n) sum |x_i|^p ]^{1/p}
double power_mean(const std::vector<double>& xs, double p);

struct Interval95 {
    double lo = 0.0;
    double hi = 0.0;
};

// Percentile bootstrap (1000 resamples) for the L^p power mean of per-replica
// values. Deterministic given seed. The interval is widened, if necessary, to
// contain the plug-in estimate.
Interval95 bootstrap_power_mean_ci(const std::vector<double>& xs, double p, std::uint64_t seed,
                                   int resamples = 1000);

// Wilson score interval for a binomial proportion at 95% confidence.
Interval95 wilson_interval(int successes, int trials);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_stderr = 0.0;
    double r_squared = 0.0;
    int n = 0;
};

// Ordinary least squares y = intercept + slope * x.
LineFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// OLS of log y against log x. Entries with y <= 0 or x <= 0 are rejected
// (the caller must filter or expect a FitError).
LineFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// Smallest nonincreasing majorant from the right: out[i] = max(in[i..]).
std::vector<double> nonincreasing_envelope(const std::vector<double>& in);

}  // namespace folsim
