#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kgfuse/autodiff.hpp"

namespace kgfuse {

/// Builds a scalar loss on the given tape. Must be deterministic: two calls
/// with identical parameter values must produce bit-identical losses.
using ScalarFn = std::function<Tape::Var(Tape&)>;

struct GradCheckOptions {
    double step = 1e-5; // central-difference step, must lie in [1e-6, 1e-4]
    double tol = 1e-4;
    int max_samples_per_tensor = 200;
    std::uint64_t seed = 0x5eed;
    // Relative error uses max(|analytic|, |numeric|, denom_floor) as the
    // denominator. The floor keeps central-difference roundoff (about
    // eps*|loss|/step, ~1e-11 here) from dominating elements whose true
    // gradient is below ~1e-7; errors above the floor still fail loudly.
    double denom_floor = 1e-6;
};

struct GradCheckEntry {
    std::string param;
    std::int64_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double rel_err = 0.0;
};

struct GradCheckParamStat {
    std::string param;
    int checked = 0;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    GradCheckEntry worst;
    std::vector<GradCheckParamStat> per_param;
    std::vector<GradCheckEntry> entries;
};

/// Compares reverse-mode gradients of `forward` against central finite
/// differences on a seeded random sample of elements per parameter tensor.
/// Elements where both the analytic and numeric magnitude fall below 1e-8 are
/// excluded. Throws NumericError if two baseline evaluations differ
/// (non-deterministic forward).
///
/// `post_backward_hook`, when set, runs after the reverse pass and before the
/// comparison; tests use it to inject gradient corruption.
GradCheckReport grad_check(const ScalarFn& forward, const ParamRefs& params,
                           const GradCheckOptions& opts = {},
                           const std::function<void(const ParamRefs&)>& post_backward_hook = {});

} // namespace kgfuse
