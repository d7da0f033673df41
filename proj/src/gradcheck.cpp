#include "bpu/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "bpu/adapted.hpp"
#include "bpu/nnet.hpp"
#include "bpu/transformer.hpp"

namespace bpu {

namespace {

double rel_err(std::span<const double> analytic, std::span<const double> fd) {
    double diff = 0.0, scale = 1.0;
    for (size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - fd[i]));
        scale = std::max({scale, std::abs(analytic[i]), std::abs(fd[i])});
    }
    return diff / scale;
}

double mlp_loss(const MlpParams& params, std::span<const double> x, int y) {
    return cross_entropy(mlp_forward(params, x).p, y);
}

bool mlp_near_kink(const MlpParams& params, const ForwardTrace& tr, double band) {
    if (params.hidden_activation != Activation::Relu) return false;
    for (const auto& h : tr.h)
        for (double v : h)
            if (std::abs(v) < band) return true;
    return false;
}

}  // namespace

double mlp_gradcheck_max_rel_err(const GradCheckOptions& opts) {
    RngStream stream(opts.seed);
    double worst = 0.0;
    for (int trial = 0; trial < opts.cases; ++trial) {
        MlpParams params;
        std::vector<double> x;
        int y = 0;
        ForwardTrace tr;
        for (int attempt = 0;; ++attempt) {
            const int in = 2 + stream.next_index(4);
            const int h1 = 2 + stream.next_index(5);
            const int h2 = 2 + stream.next_index(5);
            const int classes = 2 + stream.next_index(4);
            const Activation act = static_cast<Activation>(stream.next_index(3));
            params = make_mlp(stream, in, {h1, h2}, classes, act);
            x.assign(static_cast<size_t>(in), 0.0);
            for (double& v : x) v = stream.next_gaussian();
            y = stream.next_index(classes);
            tr = mlp_forward(params, x);
            if (!mlp_near_kink(params, tr, opts.kink_band)) break;
            require(attempt < 100, "mlp_gradcheck: no kink-free case after 100 draws");
        }

        const GradientSet gs = mlp_backward(params, tr, y);
        for (size_t l = 0; l < params.layers.size(); ++l) {
            std::vector<double> fd_w(params.layers[l].w.values.size());
            for (size_t i = 0; i < fd_w.size(); ++i) {
                MlpParams pp = params;
                pp.layers[l].w.values[i] += opts.fd_step;
                const double lp = mlp_loss(pp, x, y);
                pp.layers[l].w.values[i] -= 2.0 * opts.fd_step;
                const double lm = mlp_loss(pp, x, y);
                fd_w[i] = (lp - lm) / (2.0 * opts.fd_step);
            }
            worst = std::max(worst, rel_err(gs.dw[l].values, fd_w));

            std::vector<double> fd_b(params.layers[l].b.size());
            for (size_t i = 0; i < fd_b.size(); ++i) {
                MlpParams pp = params;
                pp.layers[l].b[i] += opts.fd_step;
                const double lp = mlp_loss(pp, x, y);
                pp.layers[l].b[i] -= 2.0 * opts.fd_step;
                const double lm = mlp_loss(pp, x, y);
                fd_b[i] = (lp - lm) / (2.0 * opts.fd_step);
            }
            worst = std::max(worst, rel_err(gs.db[l], fd_b));
        }
    }
    return worst;
}

namespace {

// Scalar loss downstream of the adapter output: a fixed quadratic in h so the
// upstream gradient g_h = c + d (.) h varies with the parameters.
struct AdapterProbe {
    AdapterParams ap;
    std::vector<double> x;
    std::vector<double> c, d;

    double loss() const {
        const auto h = adapter_forward(ap, x);
        double s = 0.0;
        for (size_t i = 0; i < h.size(); ++i) s += c[i] * h[i] + 0.5 * d[i] * h[i] * h[i];
        return s;
    }
    std::vector<double> g_h() const {
        const auto h = adapter_forward(ap, x);
        std::vector<double> g(h.size());
        for (size_t i = 0; i < h.size(); ++i) g[i] = c[i] + d[i] * h[i];
        return g;
    }
};

bool adapter_near_kink(const AdapterParams& ap, double band) {
    double lo = 0.0, hi = 0.0;
    if (ap.kind.variant == AdapterKind::Variant::Clip) {
        lo = ap.kind.lo;
        hi = ap.kind.hi;
    } else if (ap.kind.variant == AdapterKind::Variant::Relu) {
        lo = hi = 0.0;
    } else {
        return false;
    }
    const Matrix prod = matmul_nt(ap.a, ap.b);
    for (double v : prod.values)
        if (std::abs(v - lo) < band || std::abs(v - hi) < band) return true;
    return false;
}

}  // namespace

double adapter_gradcheck_max_rel_err(AdapterKind kind, const GradCheckOptions& opts) {
    RngStream stream(opts.seed);
    double worst = 0.0;
    for (int trial = 0; trial < opts.cases; ++trial) {
        AdapterProbe probe;
        for (int attempt = 0;; ++attempt) {
            const int out = 2 + stream.next_index(5);
            const int in = 2 + stream.next_index(5);
            const int r = 1 + stream.next_index(std::min(out, in));
            probe.ap = init_adapter(stream, kind, out, in, r);
            // Move off the zero init so phi' is exercised at generic points.
            probe.ap.b = rng_gaussian_matrix(stream, in, r, 0.0, 1.0 / std::sqrt(static_cast<double>(r)));
            probe.ap.w0 = rng_gaussian_matrix(stream, out, in, 0.0, 0.5);
            for (double& v : probe.ap.bias) v = 0.1 * stream.next_gaussian();
            probe.x.assign(static_cast<size_t>(in), 0.0);
            for (double& v : probe.x) v = stream.next_gaussian();
            probe.c.assign(static_cast<size_t>(out), 0.0);
            probe.d.assign(static_cast<size_t>(out), 0.0);
            for (double& v : probe.c) v = stream.next_gaussian();
            for (double& v : probe.d) v = 0.5 + 0.25 * stream.next_unit();
            if (!adapter_near_kink(probe.ap, opts.kink_band)) break;
            require(attempt < 200, "adapter_gradcheck: no kink-free case after 200 draws");
        }

        const AdapterGrads grads = adapter_backward(probe.ap, probe.x, probe.g_h());

        auto fd_tensor = [&](std::vector<double>& target, size_t n) {
            std::vector<double> fd(n);
            for (size_t i = 0; i < n; ++i) {
                const double keep = target[i];
                target[i] = keep + opts.fd_step;
                const double lp = probe.loss();
                target[i] = keep - opts.fd_step;
                const double lm = probe.loss();
                target[i] = keep;
                fd[i] = (lp - lm) / (2.0 * opts.fd_step);
            }
            return fd;
        };
        worst = std::max(worst, rel_err(grads.da.values, fd_tensor(probe.ap.a.values, probe.ap.a.values.size())));
        worst = std::max(worst, rel_err(grads.db.values, fd_tensor(probe.ap.b.values, probe.ap.b.values.size())));
        worst = std::max(worst, rel_err(grads.dbias, fd_tensor(probe.ap.bias, probe.ap.bias.size())));
    }
    return worst;
}

namespace {

double transformer_loss(const ToyTransformerParams& params, const Matrix& x, int y) {
    return cross_entropy(transformer_forward(params, x).p, y);
}

}  // namespace

double transformer_gradcheck_max_rel_err(const GradCheckOptions& opts) {
    RngStream stream(opts.seed);
    double worst = 0.0;
    for (int trial = 0; trial < opts.cases; ++trial) {
        const int d = 3 + stream.next_index(3);
        const int d_ff = 4 + stream.next_index(4);
        const int classes = 2 + stream.next_index(3);
        const int n = 2 + stream.next_index(3);
        // tanh hidden keeps the toy loss kink-free.
        ToyTransformerParams params = make_toy_transformer(stream, d, d_ff, classes, Activation::Tanh);
        for (double& v : params.b_c) v = 0.1 * stream.next_gaussian();
        const Matrix x = rng_gaussian_matrix(stream, n, d, 0.0, 1.0);
        const int y = stream.next_index(classes);

        auto model = AdaptedTransformer::full_fine_tune(params, n);
        Grads grads = model->zero_grads();
        std::vector<double> flat(x.values);
        std::vector<Example> batch{{flat, y}};
        model->batch_loss_grads(batch, grads);
        const auto refs = model->trainable_params();

        Matrix* tensors[] = {&params.w_q, &params.w_k, &params.w_v, &params.w_1, &params.w_2, &params.w_c};
        for (size_t t = 0; t < 6; ++t) {
            std::vector<double> fd(tensors[t]->values.size());
            for (size_t i = 0; i < fd.size(); ++i) {
                ToyTransformerParams pp = params;
                Matrix* mats[] = {&pp.w_q, &pp.w_k, &pp.w_v, &pp.w_1, &pp.w_2, &pp.w_c};
                mats[t]->values[i] += opts.fd_step;
                const double lp = transformer_loss(pp, x, y);
                mats[t]->values[i] -= 2.0 * opts.fd_step;
                const double lm = transformer_loss(pp, x, y);
                fd[i] = (lp - lm) / (2.0 * opts.fd_step);
            }
            worst = std::max(worst, rel_err(grads[t], fd));
        }
        std::vector<double> fd_b(params.b_c.size());
        for (size_t i = 0; i < fd_b.size(); ++i) {
            ToyTransformerParams pp = params;
            pp.b_c[i] += opts.fd_step;
            const double lp = transformer_loss(pp, x, y);
            pp.b_c[i] -= 2.0 * opts.fd_step;
            const double lm = transformer_loss(pp, x, y);
            fd_b[i] = (lp - lm) / (2.0 * opts.fd_step);
        }
        worst = std::max(worst, rel_err(grads[6], fd_b));
        (void)refs;
    }
    return worst;
}

}  // namespace bpu
