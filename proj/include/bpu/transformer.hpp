#pragma once

#include <vector>

#include "bpu/matrix.hpp"
#include "bpu/nnet.hpp"

namespace bpu {

// Single-block, single-head toy transformer with residual connections and no
// normalization: attention, FFN, column-mean pooling, then a linear
// classifier. It exists to compare attention-path vs FFN-path norm dynamics.
struct ToyTransformerParams {
    int d = 0;     // model width
    int d_ff = 0;  // FFN width
    Matrix w_q, w_k, w_v;      // d x d
    Matrix w_1;                // d_ff x d
    Matrix w_2;                // d x d_ff
    Matrix w_c;                // C x d classifier
    std::vector<double> b_c;   // C
    Activation hidden_activation = Activation::Tanh;

    int num_classes() const { return w_c.rows; }
    void validate() const;
};

ToyTransformerParams make_toy_transformer(RngStream& stream, int d, int d_ff, int num_classes,
                                          Activation act, double init_stddev_scale = 1.0);

struct TransformerTrace {
    Matrix attn;       // n x n row-softmax attention weights
    Matrix h1;         // after attention residual
    Matrix h2;         // after FFN residual
    Matrix pooled;     // 1 x d column means of h2
    std::vector<double> z;  // logits
    std::vector<double> p;
};

// scores = X W_Q (X W_K)^T / sqrt(d); H1 = X + row_softmax(scores) (X W_V);
// H2 = H1 + sigma(H1 W_1^T) W_2^T; z = W_c pooled + b_c.
TransformerTrace transformer_forward(const ToyTransformerParams& params, const Matrix& x);

}  // namespace bpu
