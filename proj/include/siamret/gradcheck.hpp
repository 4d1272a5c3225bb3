#pragma once

#include <cstdint>
#include <vector>

#include "siamret/model.hpp"

namespace siamret {

struct GradCheckConfig {
    std::size_t trials = 10;
    std::uint64_t seed = 7;
    double epsilon = 1e-5;      // central-difference step
    double tolerance = 1e-4;    // max allowed relative error
    /// Test hook: perturbs one analytic gradient entry so the detector
    /// itself can be verified to fail.
    bool corrupt = false;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<double> per_trial;
    bool passed = false;
};

/// Compares analytic batch gradients against central finite differences of
/// the forward-only batch loss on seeded random small models and batches.
/// Trials alternate between the standard and modified losses; each trial's
/// margin is nudged away from every pair's hinge boundary so the
/// subgradient convention cannot flip within the epsilon step.
GradCheckReport run_gradcheck(const GradCheckConfig& cfg);

}  // namespace siamret
