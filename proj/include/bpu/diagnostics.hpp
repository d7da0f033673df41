#pragma once

#include <utility>

#include "bpu/linalg.hpp"
#include "bpu/model.hpp"
#include "bpu/nnet.hpp"
#include "bpu/trace.hpp"

namespace bpu {

struct DiagnosticsConfig {
    bool theorem_checks = false;
    int check_every = 10;       // theorem checks every k iterations
    double explosion_factor = 50.0;
    int explosion_window = 5;
};

// Snapshot of one training iteration: losses, forget-batch logit norms and
// margins, per-layer norm entries sorted by (layer, component, metric).
// Callers set guard_flag and assumptions afterwards.
TraceRecord record_iteration(TrainableModel& model, const Grads& grads,
                             const std::vector<std::vector<double>>& forget_logits,
                             const std::vector<int>& forget_labels, int iter,
                             double loss_retain, double loss_forget);

// holds iff lower - slack <= actual <= upper + slack with slack 1e-12.
struct MarginBoundCheck {
    bool holds = false;
    double lower = 0.0;
    double actual = 0.0;
    double upper = 0.0;
};
MarginBoundCheck check_margin_bound(const ForwardTrace& trace, int y);

// Builds D_l = Diag(sigma'(h_l)), forms D_l W_{l+1}^T ... D_{L-1}, takes its
// minimum singular value; measures the projection of grad_z L onto the first
// right singular vector of W_L^T; reports ||a_{L-1}||.
AssumptionReport check_thm2_assumptions(const MlpParams& model, const ForwardTrace& trace, int y,
                                        int layer_l);

struct MetricSelector {
    int layer_id = 0;
    std::string component;
    std::string metric;
};

// Fires at the first record whose trailing window median of the selected
// metric exceeds factor times the metric's value in the first record.
// Windows are only evaluated once full. Returns (fired, iter of firing).
std::pair<bool, int> detect_explosion(const std::vector<TraceRecord>& history,
                                      const MetricSelector& selector, double factor, int window);

// Median of the final `window` per-record component aggregates divided by the
// first record's aggregate, where the aggregate stacks every entry of the
// component for the chosen metric (sqrt of summed squares).
double component_growth_summary(const std::vector<TraceRecord>& history, const std::string& component,
                                const std::string& metric = "adapter_fro", int window = 5);

}  // namespace bpu
