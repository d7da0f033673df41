#include "bpu/transformer.hpp"

#include <cmath>

namespace bpu {

void ToyTransformerParams::validate() const {
    require(d > 0 && d_ff > 0, "ToyTransformerParams: widths must be positive");
    require(w_q.rows == d && w_q.cols == d && w_k.rows == d && w_k.cols == d && w_v.rows == d && w_v.cols == d,
            "ToyTransformerParams: attention weights must be d x d");
    require(w_1.rows == d_ff && w_1.cols == d, "ToyTransformerParams: W_1 must be d_ff x d");
    require(w_2.rows == d && w_2.cols == d_ff, "ToyTransformerParams: W_2 must be d x d_ff");
    require(w_c.cols == d && w_c.rows >= 2, "ToyTransformerParams: classifier must be C x d, C >= 2");
    require(b_c.size() == static_cast<size_t>(w_c.rows), "ToyTransformerParams: classifier bias length mismatch");
}

ToyTransformerParams make_toy_transformer(RngStream& stream, int d, int d_ff, int num_classes,
                                          Activation act, double init_stddev_scale) {
    ToyTransformerParams p;
    p.d = d;
    p.d_ff = d_ff;
    p.hidden_activation = act;
    const double sd = init_stddev_scale / std::sqrt(static_cast<double>(d));
    const double sd_ff = init_stddev_scale / std::sqrt(static_cast<double>(d_ff));
    p.w_q = rng_gaussian_matrix(stream, d, d, 0.0, sd);
    p.w_k = rng_gaussian_matrix(stream, d, d, 0.0, sd);
    p.w_v = rng_gaussian_matrix(stream, d, d, 0.0, sd);
    p.w_1 = rng_gaussian_matrix(stream, d_ff, d, 0.0, sd);
    p.w_2 = rng_gaussian_matrix(stream, d, d_ff, 0.0, sd_ff);
    p.w_c = rng_gaussian_matrix(stream, num_classes, d, 0.0, sd);
    p.b_c.assign(static_cast<size_t>(num_classes), 0.0);
    p.validate();
    return p;
}

TransformerTrace transformer_forward(const ToyTransformerParams& params, const Matrix& x) {
    params.validate();
    require(x.rows >= 1 && x.cols == params.d,
            "transformer_forward: input must be n x d with n >= 1, got " + x.shape_str());

    TransformerTrace tr;
    const Matrix q = matmul(x, params.w_q);
    const Matrix k = matmul(x, params.w_k);
    Matrix scores = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(params.d)));
    tr.attn = Matrix(scores.rows, scores.cols);
    for (int i = 0; i < scores.rows; ++i) {
        auto p = softmax_row(scores.row(i));
        for (int j = 0; j < scores.cols; ++j) tr.attn.at(i, j) = p[static_cast<size_t>(j)];
    }
    tr.h1 = add(x, matmul(tr.attn, matmul(x, params.w_v)));

    Matrix hidden = matmul_nt(tr.h1, params.w_1);  // n x d_ff
    for (double& v : hidden.values) v = activate(v, params.hidden_activation);
    tr.h2 = add(tr.h1, matmul_nt(hidden, params.w_2));

    tr.pooled = Matrix(1, params.d);
    for (int j = 0; j < params.d; ++j) {
        double s = 0.0;
        for (int i = 0; i < tr.h2.rows; ++i) s += tr.h2.at(i, j);
        tr.pooled.at(0, j) = s / tr.h2.rows;
    }

    tr.z = matvec(params.w_c, tr.pooled.row(0));
    for (size_t i = 0; i < tr.z.size(); ++i) tr.z[i] += params.b_c[i];
    for (double v : tr.z)
        if (!std::isfinite(v)) throw NumericEvent("transformer_forward: non-finite logits");
    tr.p = softmax(tr.z);
    return tr;
}

}  // namespace bpu
