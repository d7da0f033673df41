#pragma once

#include <optional>
#include <string>
#include <vector>

namespace bpu {

// One (layer, component, metric) norm observation inside a TraceRecord.
// component is one of "attention", "classifier", "ffn"; metric is one of
// "adapter_fro", "adapter_grad_fro", "grad_fro", "weight_fro".
struct NormEntry {
    int layer_id = 0;
    std::string component;
    std::string metric;
    double value = 0.0;
};

// Theorem-2 assumption measurements on a diagnostic MLP.
struct AssumptionReport {
    double sigma_min_chain = 0.0;      // sigma_min of D_l W_{l+1}^T ... D_{L-1}
    double v1_projection_ratio = 0.0;  // ||Proj_{V1}(grad_z L)|| / ||grad_z L||
    double a_prev_norm = 0.0;          // ||a_{L-1}||
};

// Per-iteration diagnostic snapshot. Non-finite values are recorded as-is
// (the CSV layer writes explicit markers); norm entries are kept sorted by
// (layer ascending, component, metric).
struct TraceRecord {
    int iter = 0;
    double loss_retain = 0.0;
    double loss_forget = 0.0;
    double logit_norm_mean = 0.0;  // mean ||z|| over the forget batch
    double margin_mean = 0.0;
    std::vector<NormEntry> norms;
    bool guard_flag = false;
    std::optional<AssumptionReport> assumptions;
};

}  // namespace bpu
