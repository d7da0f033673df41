#pragma once

#include <utility>
#include <vector>

#include "bpu/matrix.hpp"
#include "bpu/rng.hpp"

namespace bpu {

enum class Activation { Tanh, Relu, Sigmoid };

double activate(double x, Activation act);
double activate_deriv(double x, Activation act);  // derivative at pre-activation x

// L-layer MLP: h_l = W_l a_{l-1} + b_l, a_l = act(h_l) for l < L, logits
// z = W_L a_{L-1} + b_L, probabilities p = softmax(z). The final layer has no
// elementwise activation. Consecutive layer widths must chain.
struct MlpLayer {
    Matrix w;                 // d_l x d_{l-1}
    std::vector<double> b;    // d_l
};

struct MlpParams {
    std::vector<MlpLayer> layers;
    Activation hidden_activation = Activation::Tanh;

    int num_layers() const { return static_cast<int>(layers.size()); }
    int input_dim() const { return layers.front().w.cols; }
    int num_classes() const { return layers.back().w.rows; }
    void validate() const;
};

// Seeded dense init: W entries ~ N(0, scale^2 / fan_in), biases zero.
MlpParams make_mlp(RngStream& stream, int input_dim, const std::vector<int>& hidden_widths,
                   int num_classes, Activation act, double init_stddev_scale = 1.0);

// Per-example forward snapshot: a[0] is the input, a[l] = act(h[l]) for the
// hidden layers, z the logits and p the softmax probabilities.
struct ForwardTrace {
    std::vector<std::vector<double>> a;  // a_0 .. a_{L-1}
    std::vector<std::vector<double>> h;  // h_1 .. h_{L-1}
    std::vector<double> z;
    std::vector<double> p;
};

struct GradientSet {
    std::vector<Matrix> dw;                 // per layer, shape of W_l
    std::vector<std::vector<double>> db;    // per layer, shape of b_l
    std::vector<std::vector<double>> g;     // backprop vectors g_1 .. g_L
};

std::vector<double> softmax(std::span<const double> z);
// Attention rows may have a single entry (softmax of one value is 1).
std::vector<double> softmax_row(std::span<const double> z);
double cross_entropy(std::span<const double> p, int y);
std::vector<double> logit_gradient(std::span<const double> p, int y);  // p - e_y

// m = max_{j != y} (z_j - z_y); negative for confident correct predictions.
double margin(std::span<const double> z, int y);

// (m, log(1 + (C-1) e^m)) computed overflow-safely; the cross-entropy loss of
// softmax(z) against y always lies inside these bounds.
std::pair<double, double> loss_margin_bounds(std::span<const double> z, int y);

ForwardTrace mlp_forward(const MlpParams& params, std::span<const double> x);
GradientSet mlp_backward(const MlpParams& params, const ForwardTrace& trace, int y);

}  // namespace bpu
