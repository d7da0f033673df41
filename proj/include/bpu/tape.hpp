#pragma once

#include <vector>

#include "bpu/matrix.hpp"
#include "bpu/nnet.hpp"

namespace bpu {

// Elementwise maps the tape can differentiate: hidden activations plus the
// bounded adapter maps. Identity covers the plain (linear) adapter.
enum class ElemKind { Identity, Tanh, Relu, Sigmoid, SineOmega, Clip };

struct ElemMap {
    ElemKind kind = ElemKind::Identity;
    double p0 = 0.0;  // omega for SineOmega, lo for Clip
    double p1 = 0.0;  // hi for Clip

    static ElemMap identity() { return {ElemKind::Identity}; }
    static ElemMap activation(Activation act);
    static ElemMap sine(double omega) { return {ElemKind::SineOmega, omega}; }
    static ElemMap clip(double lo, double hi) { return {ElemKind::Clip, lo, hi}; }

    double apply(double x) const;
    double deriv(double x) const;  // clip uses subgradient 0 at the boundary
};

// Minimal reverse-mode tape over a fixed op set. Values are computed eagerly
// as nodes are recorded, so building the graph is the forward pass; backward()
// then fills gradients for every node, including marked parameters.
class Tape {
public:
    int constant(Matrix v);
    int param(Matrix v);  // marked trainable

    int matmul(int a, int b);
    int matmul_nt(int a, int b);  // a * b^T
    int add(int a, int b);
    int add_bias(int a, int bias);  // bias is 1 x cols, broadcast over rows
    int elemwise(int a, ElemMap map);
    int row_softmax(int a);
    int scale_by(int a, double s);
    int mean_pool_rows(int a);  // n x d -> 1 x d column means
    // Softmax cross-entropy on a 1 x C logits row: logsumexp(z) - z_y.
    int cross_entropy_on_logits(int logits, int y);

    const Matrix& value(int id) const;
    bool is_param(int id) const;

    // Reverse sweep from a scalar (1x1) node. Must run before grad().
    void backward(int loss_id);
    const Matrix& grad(int id) const;

    int size() const { return static_cast<int>(nodes_.size()); }

private:
    enum class Op { Const, Param, Matmul, MatmulNT, Add, AddBias, Elemwise, RowSoftmax, Scale, MeanPool, CrossEntropy };

    struct Node {
        Op op;
        int a = -1;
        int b = -1;
        ElemMap map{};
        double s = 0.0;
        int label = -1;
        Matrix val;
        Matrix grad;
    };

    int push(Node n);
    const Node& node(int id) const;

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

}  // namespace bpu
