#pragma once

#include <optional>
#include <set>

#include "bpu/adapters.hpp"
#include "bpu/model.hpp"
#include "bpu/nnet.hpp"
#include "bpu/transformer.hpp"

namespace bpu {

// MLP with frozen base weights and optional per-layer adapters, or (in full
// fine-tune mode) a plainly trainable MLP. Valid adapter targets are
// "W1" .. "WL"; the last layer reports as the "classifier" component.
class AdaptedMlp : public TrainableModel {
public:
    // targets empty: fully frozen, model == base on every input.
    static std::unique_ptr<AdaptedMlp> attach(const MlpParams& base, const std::set<std::string>& targets,
                                              AdapterKind kind, int rank, RngStream& stream);
    static std::unique_ptr<AdaptedMlp> full_fine_tune(MlpParams init);

    std::vector<ParamRef> trainable_params() override;
    double batch_loss_grads(const std::vector<Example>& batch, Grads& grads,
                            std::vector<std::vector<double>>* out_logits = nullptr) override;
    std::vector<double> predict_logits(std::span<const double> x) const override;
    void append_norm_entries(const Grads* grads, std::vector<NormEntry>& out) const override;
    std::unique_ptr<TrainableModel> clone() const override;

    const MlpParams& base() const { return base_; }
    bool has_adapter(int layer) const { return adapters_[static_cast<size_t>(layer - 1)].has_value(); }
    const AdapterParams& adapter(int layer) const { return *adapters_[static_cast<size_t>(layer - 1)]; }
    bool is_full_fine_tune() const { return full_ft_; }

    // The weight the layer actually applies: base W_l, or w0 + phi(a b^T).
    Matrix effective_weight(int layer) const;
    // Forward pass with the adapters applied (same math the training path uses).
    ForwardTrace forward(std::span<const double> x) const;

private:
    AdaptedMlp() = default;
    MlpParams base_;
    std::vector<std::optional<AdapterParams>> adapters_;  // per layer
    bool full_ft_ = false;
    // Mean gradient w.r.t. each layer's effective weight over the last batch;
    // feeds the grad_fro trace metric.
    std::vector<Matrix> last_weight_grads_;
};

// Toy transformer with frozen base and adapters on W_V and/or the FFN pair
// W_1, W_2 (valid targets: "W_V", "W_1", "W_2"). Transformer adapters carry
// no bias term, matching the bias-free block. Inputs are flat vectors of
// length seq_len * d, viewed as seq_len x d token matrices.
class AdaptedTransformer : public TrainableModel {
public:
    static std::unique_ptr<AdaptedTransformer> attach(const ToyTransformerParams& base, int seq_len,
                                                      const std::set<std::string>& targets, AdapterKind kind,
                                                      int rank, RngStream& stream);
    static std::unique_ptr<AdaptedTransformer> full_fine_tune(ToyTransformerParams init, int seq_len);

    std::vector<ParamRef> trainable_params() override;
    double batch_loss_grads(const std::vector<Example>& batch, Grads& grads,
                            std::vector<std::vector<double>>* out_logits = nullptr) override;
    std::vector<double> predict_logits(std::span<const double> x) const override;
    void append_norm_entries(const Grads* grads, std::vector<NormEntry>& out) const override;
    std::unique_ptr<TrainableModel> clone() const override;

    const ToyTransformerParams& base() const { return base_; }
    int seq_len() const { return seq_len_; }
    bool has_adapter(const std::string& target) const;
    const AdapterParams& adapter(const std::string& target) const;

private:
    AdaptedTransformer() = default;
    Matrix reshape_input(std::span<const double> x) const;
    const std::optional<AdapterParams>* slot(const std::string& target) const;

    ToyTransformerParams base_;
    int seq_len_ = 0;
    bool full_ft_ = false;
    std::optional<AdapterParams> ad_v_, ad_w1_, ad_w2_;
    // Mean effective-weight gradients over the last batch, one per base
    // tensor: q, k, v, w1, w2, wc.
    std::vector<Matrix> last_weight_grads_;
};

}  // namespace bpu
