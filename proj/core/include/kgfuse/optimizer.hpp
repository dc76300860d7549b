#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "kgfuse/autodiff.hpp"

namespace kgfuse {

/// Adam with bias correction. Moments persist across steps and are keyed by
/// parameter name, so snapshot/restore of parameter values does not disturb
/// optimizer state.
class Adam {
public:
    struct Options {
        double lr = 2e-5;
        double beta1 = 0.9;
        double beta2 = 0.999;
        double eps = 1e-8;
    };

    explicit Adam(Options opts) : opts_(opts) {
        if (!(opts_.lr >= 0.0)) {
            throw ValidationError("adam: learning rate must be non-negative");
        }
    }

    /// One bias-corrected update applied in place to every param. Throws
    /// NumericError naming the parameter on a non-finite gradient.
    void step(const ParamRefs& params);

    std::int64_t step_count() const { return t_; }

private:
    struct Moments {
        Tensor m;
        Tensor v;
    };

    Options opts_;
    std::int64_t t_ = 0;
    std::map<std::string, Moments> moments_;
};

} // namespace kgfuse
