#include "folsim/noise.hpp"

#include <cmath>
#include <numbers>

#include "folsim/errors.hpp"

namespace folsim {

namespace {

constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) {
    // Two mixing rounds decorrelate nearby (seed, stream) pairs.
    key_ = mix64(mix64(seed + kGamma) ^ (stream * 0xda942042e4dd58b5ULL + kGamma));
}

std::uint64_t CounterRng::uniform64(std::uint64_t counter) const {
    return mix64(key_ + (counter + 1) * kGamma);
}

double CounterRng::uniform01(std::uint64_t counter) const {
    // 53-bit mantissa, shifted into (0, 1] so log() is always finite.
    return (static_cast<double>(uniform64(counter) >> 11) + 1.0) * 0x1.0p-53;
}

double CounterRng::gaussian(std::uint64_t index) const {
    const double u1 = uniform01(2 * index);
    const double u2 = uniform01(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double NoisePath::endpoint(int k) const {
    double s = 0.0;
    for (int i = 0; i < steps; ++i) s += at(i, k);
    return s;
}

NoisePath NoisePath::coarsened(int factor) const {
    if (factor < 1 || steps % factor != 0)
        throw ParameterError("NoisePath::coarsened: factor must divide the step count");
    NoisePath out;
    out.dt = dt * factor;
    out.steps = steps / factor;
    out.dims = dims;
    out.master_seed = master_seed;
    out.replica_index = replica_index;
    out.increments.assign(static_cast<std::size_t>(out.steps) * dims, 0.0);
    for (int i = 0; i < steps; ++i)
        for (int k = 0; k < dims; ++k)
            out.increments[static_cast<std::size_t>(i / factor) * dims + k] += at(i, k);
    return out;
}

NoisePath generate_noise(std::uint64_t master_seed, std::uint64_t replica_index, int dims,
                         double dt, int steps) {
    if (dt <= 0.0) throw ParameterError("generate_noise: dt must be positive");
    if (steps < 1) throw ParameterError("generate_noise: steps must be >= 1");
    if (dims < 1) throw ParameterError("generate_noise: driving dimension must be >= 1");

    NoisePath path;
    path.dt = dt;
    path.steps = steps;
    path.dims = dims;
    path.master_seed = master_seed;
    path.replica_index = replica_index;
    path.increments.resize(static_cast<std::size_t>(steps) * dims);

    const CounterRng rng(master_seed, replica_index);
    const double scale = std::sqrt(dt);
    for (std::size_t i = 0; i < path.increments.size(); ++i)
        path.increments[i] = scale * rng.gaussian(i);
    return path;
}

}  // namespace folsim
