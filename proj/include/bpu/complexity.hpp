#pragma once

#include <cstdint>
#include <string>

namespace bpu {

// Closed-form per-layer cost model for a low-rank adapter with a sine map on
// a d-input, k-output feedforward weight. All counts are exact leading-term
// operation counts with unit constants (the asymptotic expressions carry no
// constants, so this convention is stated in the CLI output).
struct CostBreakdown {
    int64_t base_ops = 0;           // dk
    int64_t lowrank_ops = 0;        // dr + kr
    int64_t sine_ops = 0;           // kd, rank-independent
    int64_t total_forward_ops = 0;  // base + lowrank + sine
    int64_t backward_extra_ops = 0; // kd(1+r)
    int64_t param_count = 0;        // (d+k)r
    double overhead_ratio = 0.0;    // kd / ((d+k)r)
};

int64_t lora_param_count(int64_t d, int64_t k, int64_t r);
CostBreakdown forward_cost(int64_t d, int64_t k, int64_t r);
int64_t backward_extra_cost(int64_t d, int64_t k, int64_t r);
double overhead_ratio(int64_t d, int64_t k, int64_t r);

// Sine overhead relative to attention cost at sequence length n: k / n^2.
double attention_ratio(int64_t k, int64_t n);

// CSV rank table (r in {4, 8, 16, 32} by default) for the CLI.
std::string complexity_table_csv(int64_t d, int64_t k);

}  // namespace bpu
