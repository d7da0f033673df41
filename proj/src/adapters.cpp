#include "bpu/adapters.hpp"

#include <cmath>

namespace bpu {

AdapterKind AdapterKind::sine(double omega) {
    require(omega > 0.0, "AdapterKind: sine requires omega > 0");
    AdapterKind k;
    k.variant = Variant::Sine;
    k.omega = omega;
    return k;
}

AdapterKind AdapterKind::clip(double lo, double hi) {
    require(lo < hi, "AdapterKind: clip requires lo < hi");
    AdapterKind k;
    k.variant = Variant::Clip;
    k.lo = lo;
    k.hi = hi;
    return k;
}

AdapterKind AdapterKind::parse(const std::string& name, double omega, double lo, double hi) {
    if (name == "plain") return plain();
    if (name == "sine") return sine(omega);
    if (name == "tanh") return tanh_map();
    if (name == "sigmoid") return sigmoid_map();
    if (name == "relu") return relu_map();
    if (name == "clip") return clip(lo, hi);
    throw ContractViolation("AdapterKind: unknown variant '" + name +
                            "', expected one of plain|sine|tanh|sigmoid|relu|clip");
}

std::string AdapterKind::name() const {
    switch (variant) {
        case Variant::Plain: return "plain";
        case Variant::Sine: return "sine";
        case Variant::Tanh: return "tanh";
        case Variant::Sigmoid: return "sigmoid";
        case Variant::Relu: return "relu";
        case Variant::Clip: return "clip";
    }
    return "?";
}

ElemMap AdapterKind::map() const {
    switch (variant) {
        case Variant::Plain: return ElemMap::identity();
        case Variant::Sine: return ElemMap::sine(omega);
        case Variant::Tanh: return ElemMap::activation(Activation::Tanh);
        case Variant::Sigmoid: return ElemMap::activation(Activation::Sigmoid);
        case Variant::Relu: return ElemMap::activation(Activation::Relu);
        case Variant::Clip: return ElemMap::clip(lo, hi);
    }
    return ElemMap::identity();
}

double AdapterKind::range_lo() const {
    switch (variant) {
        case Variant::Sine:
        case Variant::Tanh: return -1.0;
        case Variant::Sigmoid: return 0.0;
        case Variant::Clip: return lo;
        default: require(false, "range_lo: unbounded kind " + name());
    }
    return 0.0;
}

double AdapterKind::range_hi() const {
    switch (variant) {
        case Variant::Sine:
        case Variant::Tanh:
        case Variant::Sigmoid: return 1.0;
        case Variant::Clip: return hi;
        default: require(false, "range_hi: unbounded kind " + name());
    }
    return 0.0;
}

void AdapterParams::validate() const {
    require(rank >= 1, "AdapterParams: rank must be >= 1");
    require(a.rows >= 1 && b.rows >= 1, "AdapterParams: empty factor");
    require(a.cols == rank && b.cols == rank, "AdapterParams: factor rank mismatch");
    require(rank <= std::min(a.rows, b.rows), "AdapterParams: rank exceeds min(out, in)");
    require(w0.rows == a.rows && w0.cols == b.rows,
            "AdapterParams: w0 must be out x in = " + std::to_string(a.rows) + "x" + std::to_string(b.rows));
    require(bias.size() == static_cast<size_t>(a.rows), "AdapterParams: bias length mismatch");
}

Matrix effective_update(const AdapterParams& ap) {
    Matrix u = matmul_nt(ap.a, ap.b);
    const ElemMap phi = ap.kind.map();
    for (double& v : u.values) v = phi.apply(v);
    return u;
}

std::vector<double> adapter_forward(const AdapterParams& ap, std::span<const double> x) {
    require(x.size() == static_cast<size_t>(ap.in_dim()), "adapter_forward: input width mismatch");
    std::vector<double> h = matvec(ap.w0, x);
    const Matrix u = effective_update(ap);
    const std::vector<double> hu = matvec(u, x);
    for (size_t i = 0; i < h.size(); ++i) h[i] += hu[i] + ap.bias[i];
    return h;
}

void adapter_factor_grads(const AdapterParams& ap, const Matrix& g_update, Matrix& da, Matrix& db) {
    require(g_update.rows == ap.out_dim() && g_update.cols == ap.in_dim(),
            "adapter_factor_grads: upstream gradient shape mismatch");
    Matrix p = matmul_nt(ap.a, ap.b);
    const ElemMap phi = ap.kind.map();
    for (size_t i = 0; i < p.values.size(); ++i)
        p.values[i] = g_update.values[i] * phi.deriv(p.values[i]);
    da = matmul(p, ap.b);       // out x in * in x r
    db = matmul_tn(p, ap.a);    // (out x in)^T * out x r
}

AdapterGrads adapter_backward(const AdapterParams& ap, std::span<const double> x,
                              std::span<const double> g_h) {
    require(x.size() == static_cast<size_t>(ap.in_dim()), "adapter_backward: input width mismatch");
    require(g_h.size() == static_cast<size_t>(ap.out_dim()), "adapter_backward: upstream width mismatch");
    Matrix g_update(ap.out_dim(), ap.in_dim());
    for (int i = 0; i < g_update.rows; ++i)
        for (int j = 0; j < g_update.cols; ++j)
            g_update.at(i, j) = g_h[static_cast<size_t>(i)] * x[static_cast<size_t>(j)];
    AdapterGrads grads;
    adapter_factor_grads(ap, g_update, grads.da, grads.db);
    grads.dbias.assign(g_h.begin(), g_h.end());
    return grads;
}

AdapterParams init_adapter(RngStream& stream, AdapterKind kind, int out, int in, int r) {
    require(r >= 1, "init_adapter: rank must be >= 1");
    require(r <= std::min(out, in), "init_adapter: rank exceeds min(out, in)");
    AdapterParams ap;
    ap.kind = kind;
    ap.rank = r;
    ap.a = rng_gaussian_matrix(stream, out, r, 0.0, 1.0 / std::sqrt(static_cast<double>(r)));
    ap.b = Matrix(in, r, 0.0);
    ap.w0 = Matrix(out, in, 0.0);
    ap.bias.assign(static_cast<size_t>(out), 0.0);
    ap.validate();
    return ap;
}

}  // namespace bpu
