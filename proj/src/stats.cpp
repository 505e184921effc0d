#include "folsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "folsim/errors.hpp"
#include "folsim/noise.hpp"

namespace folsim {

double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

double power_mean(const std::vector<double>& xs, double p) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += std::pow(std::abs(x), p);
    return std::pow(s / static_cast<double>(xs.size()), 1.0 / p);
}

Interval95 bootstrap_power_mean_ci(const std::vector<double>& xs, double p, std::uint64_t seed,
                                   int resamples) {
    const double point = power_mean(xs, p);
    if (xs.size() < 2) return {point, point};

    const std::size_t n = xs.size();
    std::vector<double> pows(n);
    for (std::size_t i = 0; i < n; ++i) pows[i] = std::pow(std::abs(xs[i]), p);

    CounterRng rng(seed, /*stream=*/0x626f6f74);  // "boot"
    std::vector<double> stats(resamples);
    std::uint64_t ctr = 0;
    for (int b = 0; b < resamples; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t idx = static_cast<std::size_t>(rng.uniform64(ctr++) % n);
            s += pows[idx];
        }
        stats[b] = std::pow(s / static_cast<double>(n), 1.0 / p);
    }
    std::sort(stats.begin(), stats.end());
    const auto quantile = [&](double q) {
        const double pos = q * (resamples - 1);
        const int lo = static_cast<int>(pos);
        const int hi = std::min(lo + 1, resamples - 1);
        const double w = pos - lo;
        return (1.0 - w) * stats[lo] + w * stats[hi];
    };
    Interval95 ci{quantile(0.025), quantile(0.975)};
    ci.lo = std::min(ci.lo, point);
    ci.hi = std::max(ci.hi, point);
    return ci;
}

Interval95 wilson_interval(int successes, int trials) {
    if (trials <= 0) throw ParameterError("wilson_interval: trials must be positive");
    const double z = 1.959963984540054;  // 97.5% normal quantile
    const double n = trials;
    const double phat = successes / n;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (phat + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

LineFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw FitError("linear_fit: need at least 2 matched points");
    const int n = static_cast<int>(xs.size());
    const double xbar = mean(xs), ybar = mean(ys);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (xs[i] - xbar) * (xs[i] - xbar);
        sxy += (xs[i] - xbar) * (ys[i] - ybar);
        syy += (ys[i] - ybar) * (ys[i] - ybar);
    }
    if (sxx <= 0.0) throw FitError("linear_fit: degenerate abscissae");
    LineFit fit;
    fit.n = n;
    fit.slope = sxy / sxx;
    fit.intercept = ybar - fit.slope * xbar;
    double ssr = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = ys[i] - fit.intercept - fit.slope * xs[i];
        ssr += r * r;
    }
    fit.slope_stderr = n > 2 ? std::sqrt(ssr / (n - 2) / sxx) : 0.0;
    fit.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
    return fit;
}

LineFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    std::vector<double> lx, ly;
    lx.reserve(xs.size());
    ly.reserve(ys.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] <= 0.0 || ys[i] <= 0.0)
            throw FitError("loglog_fit: nonpositive value in log-log regression");
        lx.push_back(std::log(xs[i]));
        ly.push_back(std::log(ys[i]));
    }
    return linear_fit(lx, ly);
}

std::vector<double> nonincreasing_envelope(const std::vector<double>& in) {
    std::vector<double> out(in.size());
    double running = -1.0;
    for (std::size_t i = in.size(); i-- > 0;) {
        running = std::max(running, in[i]);
        out[i] = running;
    }
    return out;
}

}  // namespace folsim
