#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bpu/model.hpp"

namespace bpu {

// Generator descriptor; regenerating from an identical spec is bit-identical.
struct DataSpec {
    std::string kind;  // "blobs" | "random_label"
    int n = 0;
    int num_classes = 0;
    int dim = 0;
    double noise = 1.0;
    uint64_t seed = 0;
};

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    DataSpec spec;

    size_t size() const { return inputs.size(); }
    Example example(size_t i) const { return {inputs[i], labels[i]}; }
    std::vector<Example> all_examples() const {
        std::vector<Example> out;
        out.reserve(size());
        for (size_t i = 0; i < size(); ++i) out.push_back(example(i));
        return out;
    }
};

}  // namespace bpu
