#pragma once

#include <string>
#include <vector>

#include "bpu/matrix.hpp"
#include "bpu/rng.hpp"
#include "bpu/tape.hpp"

namespace bpu {

// Bounded elementwise map applied to the low-rank product A B^T. Sine and
// tanh are the primary variants; sigmoid, relu (the unbounded control) and
// clip are the ablation variants.
struct AdapterKind {
    enum class Variant { Plain, Sine, Tanh, Sigmoid, Relu, Clip };
    Variant variant = Variant::Plain;
    double omega = 0.0;  // Sine only, > 0
    double lo = 0.0;     // Clip only, lo < hi
    double hi = 0.0;

    static AdapterKind plain() { return {Variant::Plain}; }
    static AdapterKind sine(double omega);
    static AdapterKind tanh_map() { return {Variant::Tanh}; }
    static AdapterKind sigmoid_map() { return {Variant::Sigmoid}; }
    static AdapterKind relu_map() { return {Variant::Relu}; }
    static AdapterKind clip(double lo, double hi);

    static AdapterKind parse(const std::string& name, double omega, double lo, double hi);
    std::string name() const;

    ElemMap map() const;  // the scalar map phi (shared with the tape)
    bool bounded() const { return variant != Variant::Plain && variant != Variant::Relu; }
    // Range of phi for bounded variants; used by boundedness assertions.
    double range_lo() const;
    double range_hi() const;
};

// Low-rank adapter over a frozen base: h = w0 x + phi(a b^T) x + bias.
// a is out x r, b is in x r, so the effective update phi(a b^T) is out x in.
struct AdapterParams {
    Matrix a;
    Matrix b;
    AdapterKind kind;
    Matrix w0;                 // frozen base, out x in
    std::vector<double> bias;  // out, trainable additive bias
    int rank = 0;

    int out_dim() const { return a.rows; }
    int in_dim() const { return b.rows; }
    void validate() const;
};

// phi(a b^T), elementwise.
Matrix effective_update(const AdapterParams& ap);

std::vector<double> adapter_forward(const AdapterParams& ap, std::span<const double> x);

struct AdapterGrads {
    Matrix da;                  // out x r
    Matrix db;                  // in x r
    std::vector<double> dbias;  // out
};

// Full chain rule: with G = g_h x^T and P = G (.) phi'(a b^T),
// da = P b, db = P^T a, dbias = g_h.
AdapterGrads adapter_backward(const AdapterParams& ap, std::span<const double> x,
                              std::span<const double> g_h);

// Same factor gradients from an already-accumulated upstream gradient G
// (out x in) with respect to the effective update; shared by the batched
// model backward paths.
void adapter_factor_grads(const AdapterParams& ap, const Matrix& g_update, Matrix& da, Matrix& db);

// a ~ N(0, 1/r), b = 0, bias = 0: the initial effective update is exactly
// zero for every kind except sigmoid (sigma(0) = 1/2). w0 starts zero; attach
// points it at the frozen layer weight.
AdapterParams init_adapter(RngStream& stream, AdapterKind kind, int out, int in, int r);

}  // namespace bpu
