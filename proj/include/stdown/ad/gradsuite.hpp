#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace stdown::ad {

// Finite-difference verification of every operator plus the composed
// loss-over-model gradient (64-bit, h = 1e-5, tolerance 1e-4 relative;
// the composed check samples parameter coordinates and ignores entries
// below the FD resolving power).
struct GradSuiteEntry {
    std::string name;
    double max_rel_error;
    bool pass;
};

struct GradSuiteResult {
    std::vector<GradSuiteEntry> entries;
    bool pass = true;
    double seconds = 0.0;
};

GradSuiteResult run_gradient_suite(int instances_per_op = 20, std::uint64_t seed = 1234);

}  // namespace stdown::ad
