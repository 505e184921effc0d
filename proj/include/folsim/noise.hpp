#pragma once

#include <cstdint>
#include <vector>

namespace folsim {

// Stateless counter-based generator. A stream is keyed by (seed, stream id);
// the value at counter position i is a mixed function of (key, i) only, so any
// subset of positions can be evaluated in any order with identical results.
// Mixing is the splitmix64 finalizer applied to key + (i+1)*golden-gamma.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t uniform64(std::uint64_t counter) const;

    // Uniform double in (0, 1].
    double uniform01(std::uint64_t counter) const;

    // Standard normal from the pair of counters (2i, 2i+1) via Box-Muller.
    double gaussian(std::uint64_t index) const;

private:
    std::uint64_t key_;
};

// Brownian increments on a uniform grid: steps x dims array with independent
// N(0, dt) entries, reproducible from (master_seed, replica_index) alone.
struct NoisePath {
    double dt = 0.0;
    int steps = 0;
    int dims = 0;
    std::vector<double> increments;  // row-major: increments[step * dims + k]
    std::uint64_t master_seed = 0;
    std::uint64_t replica_index = 0;

    double at(int step, int k) const { return increments[static_cast<std::size_t>(step) * dims + k]; }

    // Sum of a column, i.e. the Brownian endpoint B^k_T.
    double endpoint(int k) const;

    // Merge consecutive increments in groups of `factor` (steps must divide).
    // The coarse path drives the same Brownian motion on a coarser grid.
    NoisePath coarsened(int factor) const;
};

NoisePath generate_noise(std::uint64_t master_seed, std::uint64_t replica_index, int dims,
                         double dt, int steps);

}  // namespace folsim
