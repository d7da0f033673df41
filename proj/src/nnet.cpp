#include "bpu/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bpu {

double activate(double x, Activation act) {
    switch (act) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return 0.0;
}

double activate_deriv(double x, Activation act) {
    switch (act) {
        case Activation::Tanh: {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        }
        case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: {
            const double s = 1.0 / (1.0 + std::exp(-x));
            return s * (1.0 - s);
        }
    }
    return 0.0;
}

void MlpParams::validate() const {
    require(!layers.empty(), "MlpParams: at least one layer required");
    for (size_t l = 0; l < layers.size(); ++l) {
        require(layers[l].w.rows == static_cast<int>(layers[l].b.size()),
                "MlpParams: bias length mismatch at layer " + std::to_string(l + 1));
        if (l > 0)
            require(layers[l].w.cols == layers[l - 1].w.rows,
                    "MlpParams: layer widths do not chain at layer " + std::to_string(l + 1));
    }
}

MlpParams make_mlp(RngStream& stream, int input_dim, const std::vector<int>& hidden_widths,
                   int num_classes, Activation act, double init_stddev_scale) {
    require(input_dim > 0 && num_classes >= 2, "make_mlp: need input_dim > 0 and num_classes >= 2");
    MlpParams params;
    params.hidden_activation = act;
    int prev = input_dim;
    auto push_layer = [&](int width) {
        const double stddev = init_stddev_scale / std::sqrt(static_cast<double>(prev));
        MlpLayer layer;
        layer.w = rng_gaussian_matrix(stream, width, prev, 0.0, stddev);
        layer.b.assign(static_cast<size_t>(width), 0.0);
        params.layers.push_back(std::move(layer));
        prev = width;
    };
    for (int w : hidden_widths) push_layer(w);
    push_layer(num_classes);
    params.validate();
    return params;
}

std::vector<double> softmax_row(std::span<const double> z) {
    require(!z.empty(), "softmax_row: empty input");
    double zmax = -std::numeric_limits<double>::infinity();
    for (double v : z) zmax = std::max(zmax, v);
    std::vector<double> p(z.size());
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - zmax);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> softmax(std::span<const double> z) {
    require(z.size() >= 2, "softmax: need at least two logits");
    return softmax_row(z);
}

double cross_entropy(std::span<const double> p, int y) {
    require(y >= 0 && static_cast<size_t>(y) < p.size(), "cross_entropy: label out of range");
    const double py = p[static_cast<size_t>(y)];
    if (py <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(py);
}

std::vector<double> logit_gradient(std::span<const double> p, int y) {
    require(y >= 0 && static_cast<size_t>(y) < p.size(), "logit_gradient: label out of range");
    std::vector<double> g(p.begin(), p.end());
    g[static_cast<size_t>(y)] -= 1.0;
    return g;
}

double margin(std::span<const double> z, int y) {
    require(z.size() >= 2, "margin: need at least two logits");
    require(y >= 0 && static_cast<size_t>(y) < z.size(), "margin: label out of range");
    const double zy = z[static_cast<size_t>(y)];
    double m = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < z.size(); ++j) {
        if (static_cast<int>(j) == y) continue;
        m = std::max(m, z[j] - zy);
    }
    return m;
}

std::pair<double, double> loss_margin_bounds(std::span<const double> z, int y) {
    const double m = margin(z, y);
    const double cm1 = static_cast<double>(z.size() - 1);
    // log(1 + (C-1) e^m) in log-sum-exp form so large m cannot overflow.
    double upper;
    if (m > 30.0) {
        upper = m + std::log(cm1) + std::log1p(std::exp(-m) / cm1);
    } else {
        upper = std::log1p(cm1 * std::exp(m));
    }
    return {m, upper};
}

ForwardTrace mlp_forward(const MlpParams& params, std::span<const double> x) {
    require(static_cast<size_t>(params.input_dim()) == x.size(),
            "mlp_forward: input width mismatch, expected " + std::to_string(params.input_dim()));
    const int L = params.num_layers();
    ForwardTrace trace;
    trace.a.reserve(static_cast<size_t>(L));
    trace.a.emplace_back(x.begin(), x.end());
    trace.h.reserve(static_cast<size_t>(L - 1));
    for (int l = 0; l < L; ++l) {
        std::vector<double> h = matvec(params.layers[static_cast<size_t>(l)].w, trace.a.back());
        const auto& b = params.layers[static_cast<size_t>(l)].b;
        for (size_t i = 0; i < h.size(); ++i) h[i] += b[i];
        for (double v : h)
            if (!std::isfinite(v)) throw NumericEvent("mlp_forward: non-finite pre-activation", l + 1);
        if (l + 1 < L) {
            std::vector<double> a(h.size());
            for (size_t i = 0; i < h.size(); ++i) a[i] = activate(h[i], params.hidden_activation);
            trace.h.push_back(std::move(h));
            trace.a.push_back(std::move(a));
        } else {
            trace.z = std::move(h);
        }
    }
    trace.p = softmax(trace.z);
    return trace;
}

GradientSet mlp_backward(const MlpParams& params, const ForwardTrace& trace, int y) {
    const int L = params.num_layers();
    GradientSet grads;
    grads.dw.resize(static_cast<size_t>(L));
    grads.db.resize(static_cast<size_t>(L));
    grads.g.assign(static_cast<size_t>(L), {});

    // g_L = p - e_y; g_l = D_l W_{l+1}^T g_{l+1}; grad W_l = g_l a_{l-1}^T.
    std::vector<double> g = logit_gradient(trace.p, y);
    for (int l = L; l >= 1; --l) {
        const size_t li = static_cast<size_t>(l - 1);
        grads.g[li] = g;
        const auto& a_prev = trace.a[li];
        Matrix dw(params.layers[li].w.rows, params.layers[li].w.cols);
        for (int i = 0; i < dw.rows; ++i)
            for (int j = 0; j < dw.cols; ++j)
                dw.at(i, j) = g[static_cast<size_t>(i)] * a_prev[static_cast<size_t>(j)];
        grads.dw[li] = std::move(dw);
        grads.db[li] = g;
        if (l > 1) {
            std::vector<double> back = matvec_t(params.layers[li].w, g);
            const auto& h_prev = trace.h[static_cast<size_t>(l - 2)];
            for (size_t i = 0; i < back.size(); ++i)
                back[i] *= activate_deriv(h_prev[i], params.hidden_activation);
            g = std::move(back);
        }
    }
    return grads;
}

}  // namespace bpu
