#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bpu/trace.hpp"

namespace bpu {

struct Example {
    std::span<const double> x;
    int y = 0;
};

// A view of one trainable tensor. decay marks parameters that receive AdamW
// weight decay (adapter factors; never biases, never frozen bases).
struct ParamRef {
    std::string name;
    double* data = nullptr;
    size_t size = 0;
    bool decay = false;
};

// Gradient storage parallel to trainable_params() order.
using Grads = std::vector<std::vector<double>>;

// Anything the unlearning trainer can optimize: an adapted MLP, an adapted
// toy transformer, or a fully trainable MLP.
class TrainableModel {
public:
    virtual ~TrainableModel() = default;

    virtual std::vector<ParamRef> trainable_params() = 0;
    Grads zero_grads() {
        Grads g;
        for (const auto& p : trainable_params()) g.emplace_back(p.size, 0.0);
        return g;
    }

    // Mean cross-entropy over the batch; accumulates the mean gradient into
    // grads (which must come from zero_grads()). Optionally reports the
    // per-example logits of the batch.
    virtual double batch_loss_grads(const std::vector<Example>& batch, Grads& grads,
                                    std::vector<std::vector<double>>* out_logits = nullptr) = 0;

    virtual std::vector<double> predict_logits(std::span<const double> x) const = 0;

    // Per-layer norm observations for trace records. grads may be null when
    // only weight/adapter norms are wanted.
    virtual void append_norm_entries(const Grads* grads, std::vector<NormEntry>& out) const = 0;

    virtual std::unique_ptr<TrainableModel> clone() const = 0;
};

}  // namespace bpu
