#pragma once

#include <cstdint>

#include "bpu/adapters.hpp"

namespace bpu {

// Central-finite-difference checks of the analytical gradients. Errors are
// max |analytic - fd| / max(||analytic||_inf, ||fd||_inf, 1) over all checked
// tensors. Cases whose forward pass lands within kink_band of a relu or clip
// kink are re-drawn (central differences are invalid across a kink; the
// analytic side uses the stated subgradient there).
struct GradCheckOptions {
    int cases = 100;
    double fd_step = 1e-6;
    double kink_band = 1e-3;
    uint64_t seed = 1234;
};

double mlp_gradcheck_max_rel_err(const GradCheckOptions& opts);
double adapter_gradcheck_max_rel_err(AdapterKind kind, const GradCheckOptions& opts);
double transformer_gradcheck_max_rel_err(const GradCheckOptions& opts);

}  // namespace bpu
