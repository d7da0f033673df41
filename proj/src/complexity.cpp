#include "bpu/complexity.hpp"

#include <sstream>

#include "bpu/errors.hpp"

namespace bpu {

int64_t lora_param_count(int64_t d, int64_t k, int64_t r) {
    require(d >= 1 && k >= 1 && r >= 1, "lora_param_count: dimensions must be >= 1");
    return (d + k) * r;
}

CostBreakdown forward_cost(int64_t d, int64_t k, int64_t r) {
    require(d >= 1 && k >= 1 && r >= 1, "forward_cost: dimensions must be >= 1");
    CostBreakdown c;
    c.base_ops = d * k;
    c.lowrank_ops = d * r + k * r;
    c.sine_ops = k * d;
    c.total_forward_ops = c.base_ops + c.lowrank_ops + c.sine_ops;
    c.backward_extra_ops = backward_extra_cost(d, k, r);
    c.param_count = lora_param_count(d, k, r);
    c.overhead_ratio = overhead_ratio(d, k, r);
    return c;
}

int64_t backward_extra_cost(int64_t d, int64_t k, int64_t r) {
    require(d >= 1 && k >= 1 && r >= 1, "backward_extra_cost: dimensions must be >= 1");
    return k * d * (1 + r);
}

double overhead_ratio(int64_t d, int64_t k, int64_t r) {
    require(d >= 1 && k >= 1 && r >= 1, "overhead_ratio: dimensions must be >= 1");
    return static_cast<double>(k * d) / static_cast<double>((d + k) * r);
}

double attention_ratio(int64_t k, int64_t n) {
    require(k >= 1 && n >= 1, "attention_ratio: dimensions must be >= 1");
    return static_cast<double>(k) / (static_cast<double>(n) * static_cast<double>(n));
}

std::string complexity_table_csv(int64_t d, int64_t k) {
    std::ostringstream os;
    os << "r,param_count,base_ops,lowrank_ops,sine_ops,total_forward_ops,backward_extra_ops,overhead_ratio\n";
    for (int64_t r : {4, 8, 16, 32}) {
        const CostBreakdown c = forward_cost(d, k, r);
        os << r << "," << c.param_count << "," << c.base_ops << "," << c.lowrank_ops << "," << c.sine_ops << ","
           << c.total_forward_ops << "," << c.backward_extra_ops << "," << c.overhead_ratio << "\n";
    }
    return os.str();
}

}  // namespace bpu
