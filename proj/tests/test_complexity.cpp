#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bpu/adapted.hpp"
#include "bpu/complexity.hpp"

using namespace bpu;

TEST_CASE("lora_param_count appendix values and unit case") {
    for (int64_t r : {4, 8, 16, 32}) CHECK(lora_param_count(4096, 11008, r) == 15104 * r);
    CHECK(lora_param_count(1, 1, 1) == 2);
    CHECK_THROWS_AS(lora_param_count(0, 1, 1), ContractViolation);
}

TEST_CASE("forward_cost appendix sine term and unit case") {
    const CostBreakdown c = forward_cost(4096, 11008, 4);
    CHECK(c.sine_ops == 45088768);
    CHECK(c.base_ops == 45088768);
    CHECK(c.lowrank_ops == (4096 + 11008) * 4);
    CHECK(c.total_forward_ops == c.base_ops + c.lowrank_ops + c.sine_ops);

    const CostBreakdown unit = forward_cost(1, 1, 1);
    CHECK(unit.base_ops == 1);
    CHECK(unit.lowrank_ops == 2);
    CHECK(unit.sine_ops == 1);
    CHECK(unit.total_forward_ops == 4);

    // Rank independence of the sine term.
    for (int64_t r : {4, 8, 16, 32}) CHECK(forward_cost(4096, 11008, r).sine_ops == 45088768);
}

TEST_CASE("backward_extra_cost") {
    CHECK(backward_extra_cost(1, 1, 1) == 2);
    CHECK(backward_extra_cost(4096, 11008, 4) == 5LL * 45088768);
    CHECK(backward_extra_cost(4096, 11008, 4) == 225443840);
    CHECK_THROWS_AS(backward_extra_cost(1, 1, 0), ContractViolation);
}

TEST_CASE("overhead_ratio appendix values and algebraic identity") {
    CHECK(std::abs(overhead_ratio(4096, 11008, 4) - 746.3) <= 0.5);
    CHECK(std::abs(overhead_ratio(4096, 11008, 32) - 93.3) <= 0.5);
    // d = k, r = d/2: kd / ((2d)(d/2)) = 1 exactly.
    CHECK(overhead_ratio(64, 64, 32) == 1.0);
}

TEST_CASE("overhead_ratio halves exactly when the rank doubles") {
    for (int64_t r : {1, 2, 4, 8, 16}) {
        const double a = overhead_ratio(4096, 11008, r);
        const double b = overhead_ratio(4096, 11008, 2 * r);
        CHECK(a / 2.0 == b);
        CHECK(b < a);
    }
}

TEST_CASE("attention_ratio appendix value and identities") {
    CHECK(std::abs(attention_ratio(11008, 512) - 0.042) <= 0.001);
    CHECK(attention_ratio(7, 1) == 7.0);
    CHECK(attention_ratio(64 * 64, 64) == 1.0);
}

TEST_CASE("no overflow at the documented extremes") {
    const int64_t d = 1 << 20, k = 1 << 20, r = 1 << 16;
    const CostBreakdown c = forward_cost(d, k, r);
    CHECK(c.base_ops == (1LL << 40));
    CHECK(c.backward_extra_ops == (1LL << 40) * ((1LL << 16) + 1));
    CHECK(c.param_count == (1LL << 21) * (1LL << 16));
    CHECK(c.base_ops > 0);
    CHECK(c.backward_extra_ops > 0);
}

TEST_CASE("trainable factor count matches lora_param_count across 50 shapes") {
    RngStream stream(83);
    for (int trial = 0; trial < 50; ++trial) {
        const int in = 2 + stream.next_index(8);
        const int h = 2 + stream.next_index(8);
        const int classes = 2 + stream.next_index(5);
        const int r = 1 + stream.next_index(2);
        const MlpParams base = make_mlp(stream, in, {h}, classes, Activation::Tanh);
        auto model = AdaptedMlp::attach(base, {"W1", "W2"}, AdapterKind::sine(100.0), r, stream);
        size_t factors = 0;
        for (const auto& p : model->trainable_params())
            if (p.decay) factors += p.size;
        CHECK(static_cast<int64_t>(factors) ==
              lora_param_count(in, h, r) + lora_param_count(h, classes, r));
    }
}

TEST_CASE("complexity_table_csv has the fixed header and four rank rows") {
    const std::string csv = complexity_table_csv(4096, 11008);
    CHECK(csv.rfind("r,param_count,base_ops,lowrank_ops,sine_ops,total_forward_ops,backward_extra_ops,overhead_ratio\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    CHECK(csv.find("45088768") != std::string::npos);
}
