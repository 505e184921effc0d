#pragma once

#include <string>
#include <vector>

#include "folsim/config.hpp"

namespace folsim {

inline constexpr const char* kToolVersion = "0.1.0";

struct Verdict {
    std::string property;
    bool ok = true;
    std::string detail;
};

struct RunResult {
    int exit_code = 0;  // 0 = properties hold, 2 = a property failed
    std::vector<Verdict> verdicts;
    std::string out_dir;
};

// Executes the configured experiment and writes table.csv, summary.txt and
// the manifest under <out>/<experiment>/<tag>/. Deterministic given the
// config and master seed, independent of the thread count.
RunResult run_experiment(const RunConfig& cfg);

// FNV-1a 64-bit, used for the manifest config hash.
std::uint64_t fnv1a64(const std::string& data);

// Fixed-format float for byte-stable CSV output.
std::string csv_double(double x);

}  // namespace folsim
