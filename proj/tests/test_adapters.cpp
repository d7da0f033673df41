#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bpu/adapted.hpp"
#include "bpu/adapters.hpp"
#include "bpu/gradcheck.hpp"

using namespace bpu;

namespace {

AdapterParams seeded_adapter(AdapterKind kind, int out, int in, int r, uint64_t seed) {
    RngStream stream(seed);
    AdapterParams ap = init_adapter(stream, kind, out, in, r);
    ap.b = rng_gaussian_matrix(stream, in, r, 0.0, 0.4);
    ap.w0 = rng_gaussian_matrix(stream, out, in, 0.0, 0.5);
    return ap;
}

}  // namespace

TEST_CASE("AdapterKind construction constraints") {
    CHECK_THROWS_AS(AdapterKind::sine(0.0), ContractViolation);
    CHECK_THROWS_AS(AdapterKind::sine(-3.0), ContractViolation);
    CHECK_THROWS_AS(AdapterKind::clip(1.0, 1.0), ContractViolation);
    CHECK_NOTHROW(AdapterKind::clip(-1.5, 1.5));
    CHECK_THROWS_AS(AdapterKind::parse("banana", 0, 0, 0), ContractViolation);
    CHECK(AdapterKind::parse("sine", 100.0, 0, 0).omega == 100.0);
}

TEST_CASE("effective_update zero-factor cases") {
    for (auto kind : {AdapterKind::plain(), AdapterKind::sine(100.0), AdapterKind::tanh_map(),
                      AdapterKind::relu_map(), AdapterKind::clip(-1.5, 1.5)}) {
        RngStream stream(5);
        const AdapterParams ap = init_adapter(stream, kind, 4, 3, 2);  // b = 0 at init
        const Matrix u = effective_update(ap);
        for (double v : u.values) CHECK(v == 0.0);
    }
    RngStream stream(5);
    const AdapterParams sig = init_adapter(stream, AdapterKind::sigmoid_map(), 4, 3, 2);
    for (double v : effective_update(sig).values) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("effective_update sine exact point and Taylor bound") {
    const double omega = 2.5;
    AdapterParams ap;
    ap.kind = AdapterKind::sine(omega);
    ap.rank = 1;
    ap.a = Matrix(1, 1, std::numbers::pi / (2.0 * omega));
    ap.b = Matrix(1, 1, 1.0);
    ap.w0 = Matrix(1, 1, 0.0);
    ap.bias = {0.0};
    CHECK(effective_update(ap).at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    // Small-argument regime: |sin(w p) - w p| <= (0.1)^3 / 6 when |w p| <= 0.1.
    RngStream stream(17);
    AdapterParams small = seeded_adapter(AdapterKind::sine(0.05), 3, 3, 2, 17);
    Matrix prod = matmul_nt(small.a, small.b);
    double maxabs = 0.0;
    for (double v : prod.values) maxabs = std::max(maxabs, std::abs(0.05 * v));
    REQUIRE(maxabs <= 0.1);
    const Matrix u = effective_update(small);
    for (size_t i = 0; i < u.values.size(); ++i)
        CHECK(std::abs(u.values[i] - 0.05 * prod.values[i]) <= 0.1 * 0.1 * 0.1 / 6.0);
}

TEST_CASE("adapter_forward inactive and plain equivalence") {
    RngStream stream(23);
    AdapterParams ap = init_adapter(stream, AdapterKind::sine(100.0), 5, 4, 2);
    ap.w0 = rng_gaussian_matrix(stream, 5, 4, 0.0, 1.0);
    std::vector<double> x(4);
    for (double& v : x) v = stream.next_gaussian();
    const auto h = adapter_forward(ap, x);  // b = 0, bias = 0
    const auto w0x = matvec(ap.w0, x);
    for (size_t i = 0; i < h.size(); ++i) CHECK(h[i] == w0x[i]);

    AdapterParams plain = seeded_adapter(AdapterKind::plain(), 5, 4, 2, 29);
    for (double& v : plain.bias) v = stream.next_gaussian();
    std::vector<double> x2(4);
    for (double& v : x2) v = stream.next_gaussian();
    const auto h1 = adapter_forward(plain, x2);
    const Matrix weff = add(plain.w0, matmul_nt(plain.a, plain.b));
    auto h2 = matvec(weff, x2);
    for (size_t i = 0; i < h2.size(); ++i) h2[i] += plain.bias[i];
    for (size_t i = 0; i < h1.size(); ++i) CHECK(std::abs(h1[i] - h2[i]) < 1e-12);
}

TEST_CASE("adapter_forward sine omega=100 vs high-precision dense oracle") {
    AdapterParams ap = seeded_adapter(AdapterKind::sine(100.0), 8, 6, 3, 31);
    std::vector<double> x(6);
    RngStream stream(37);
    for (double& v : x) v = stream.next_gaussian();
    const auto h = adapter_forward(ap, x);

    // Oracle: long double accumulation throughout, sin materialized entrywise.
    std::vector<long double> oracle(8, 0.0L);
    for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 6; ++j) {
            long double prod = 0.0L;
            for (int k = 0; k < 3; ++k)
                prod += static_cast<long double>(ap.a.at(i, k)) * static_cast<long double>(ap.b.at(j, k));
            const long double entry =
                static_cast<long double>(ap.w0.at(i, j)) + sinl(100.0L * prod);
            oracle[static_cast<size_t>(i)] += entry * static_cast<long double>(x[static_cast<size_t>(j)]);
        }
        oracle[static_cast<size_t>(i)] += ap.bias[static_cast<size_t>(i)];
    }
    // sin(100 * p) amplifies rounding of p by 100, so compare at 1e-9.
    for (size_t i = 0; i < h.size(); ++i)
        CHECK(h[i] == doctest::Approx(static_cast<double>(oracle[i])).epsilon(1e-9));
}

TEST_CASE("adapter_backward zero upstream and plain chain rule") {
    AdapterParams ap = seeded_adapter(AdapterKind::tanh_map(), 4, 5, 2, 41);
    std::vector<double> x(5, 0.7);
    const std::vector<double> zero(4, 0.0);
    const AdapterGrads g = adapter_backward(ap, x, zero);
    for (double v : g.da.values) CHECK(v == 0.0);
    for (double v : g.db.values) CHECK(v == 0.0);
    for (double v : g.dbias) CHECK(v == 0.0);

    AdapterParams plain = seeded_adapter(AdapterKind::plain(), 4, 5, 2, 43);
    RngStream stream(47);
    std::vector<double> gh(4);
    for (double& v : gh) v = stream.next_gaussian();
    std::vector<double> x2(5);
    for (double& v : x2) v = stream.next_gaussian();
    const AdapterGrads gp = adapter_backward(plain, x2, gh);
    Matrix g_update(4, 5);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j) g_update.at(i, j) = gh[static_cast<size_t>(i)] * x2[static_cast<size_t>(j)];
    const Matrix da_ref = matmul(g_update, plain.b);
    const Matrix db_ref = matmul_tn(g_update, plain.a);
    for (size_t i = 0; i < da_ref.values.size(); ++i) CHECK(gp.da.values[i] == doctest::Approx(da_ref.values[i]));
    for (size_t i = 0; i < db_ref.values.size(); ++i) CHECK(gp.db.values[i] == doctest::Approx(db_ref.values[i]));
}

TEST_CASE("adapter_backward matches finite differences for every kind") {
    const AdapterKind kinds[] = {AdapterKind::plain(),       AdapterKind::sine(100.0),
                                 AdapterKind::tanh_map(),    AdapterKind::sigmoid_map(),
                                 AdapterKind::relu_map(),    AdapterKind::clip(-1.5, 1.5)};
    for (const AdapterKind& kind : kinds) {
        GradCheckOptions opts;
        opts.cases = 100;
        opts.seed = 777;
        const double err = adapter_gradcheck_max_rel_err(kind, opts);
        INFO("kind = ", kind.name());
        CHECK(err < 1e-5);
    }
}

TEST_CASE("adapter_backward consistent with the generic tape within 1e-10") {
    const AdapterKind kinds[] = {AdapterKind::plain(), AdapterKind::sine(50.0), AdapterKind::tanh_map(),
                                 AdapterKind::sigmoid_map(), AdapterKind::clip(-1.0, 1.0)};
    RngStream stream(53);
    for (const AdapterKind& kind : kinds) {
        for (int trial = 0; trial < 10; ++trial) {
            AdapterParams ap = seeded_adapter(kind, 4, 3, 2, 100 + static_cast<uint64_t>(trial));
            std::vector<double> x(3), c(4);
            for (double& v : x) v = stream.next_gaussian();
            for (double& v : c) v = stream.next_gaussian();

            // Tape route: loss = c^T (w0 x + phi(a b^T) x + bias).
            Tape tape;
            const int an = tape.param(ap.a);
            const int bn = tape.param(ap.b);
            Matrix xcol(3, 1);
            for (int i = 0; i < 3; ++i) xcol.at(i, 0) = x[static_cast<size_t>(i)];
            Matrix biascol(4, 1);
            for (int i = 0; i < 4; ++i) biascol.at(i, 0) = ap.bias[static_cast<size_t>(i)];
            Matrix crow(1, 4);
            for (int i = 0; i < 4; ++i) crow.at(0, i) = c[static_cast<size_t>(i)];
            const int u = tape.elemwise(tape.matmul_nt(an, bn), kind.map());
            const int biasn = tape.param(biascol);
            const int h = tape.add(tape.add(tape.matmul(tape.constant(ap.w0), tape.constant(xcol)),
                                            tape.matmul(u, tape.constant(xcol))),
                                   biasn);
            const int loss = tape.matmul(tape.constant(crow), h);
            tape.backward(loss);

            const AdapterGrads grads = adapter_backward(ap, x, c);  // g_h = c for this loss
            double worst = 0.0;
            for (size_t i = 0; i < grads.da.values.size(); ++i)
                worst = std::max(worst, std::abs(grads.da.values[i] - tape.grad(an).values[i]));
            for (size_t i = 0; i < grads.db.values.size(); ++i)
                worst = std::max(worst, std::abs(grads.db.values[i] - tape.grad(bn).values[i]));
            for (size_t i = 0; i < grads.dbias.size(); ++i)
                worst = std::max(worst, std::abs(grads.dbias[i] - tape.grad(biasn).values[i]));
            INFO("kind = ", kind.name());
            CHECK(worst < 1e-10);
        }
    }
}

TEST_CASE("init_adapter golden factors and neutrality") {
    RngStream stream(7);
    const AdapterParams ap = init_adapter(stream, AdapterKind::sine(100.0), 2, 3, 1);
    // r = 1: stddev 1, so the factors are the raw stream gaussians.
    CHECK(ap.a.at(0, 0) == doctest::Approx(1.3649922974572279).epsilon(1e-14));
    CHECK(ap.a.at(1, 0) == doctest::Approx(0.14452122126941588).epsilon(1e-14));
    for (double v : ap.b.values) CHECK(v == 0.0);
    for (double v : ap.bias) CHECK(v == 0.0);
}

TEST_CASE("attach: empty targets equals the frozen base everywhere") {
    RngStream stream(61);
    const MlpParams base = make_mlp(stream, 4, {6}, 3, Activation::Tanh);
    auto model = AdaptedMlp::attach(base, {}, AdapterKind::sine(100.0), 2, stream);
    CHECK(model->trainable_params().empty());
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<double> x(4);
        for (double& v : x) v = stream.next_gaussian();
        const auto z1 = model->predict_logits(x);
        const auto z2 = mlp_forward(base, x).z;
        for (size_t i = 0; i < z1.size(); ++i) CHECK(z1[i] == z2[i]);
    }
}

TEST_CASE("attach: unknown target reports the valid identifiers") {
    RngStream stream(67);
    const MlpParams base = make_mlp(stream, 4, {6}, 3, Activation::Tanh);
    try {
        AdaptedMlp::attach(base, {"W9"}, AdapterKind::plain(), 1, stream);
        CHECK(false);
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        CHECK(msg.find("W9") != std::string::npos);
        CHECK(msg.find("W1") != std::string::npos);
        CHECK(msg.find("W2") != std::string::npos);
    }

    const ToyTransformerParams tbase = make_toy_transformer(stream, 4, 6, 3, Activation::Tanh);
    try {
        AdaptedTransformer::attach(tbase, 2, {"W_Q"}, AdapterKind::plain(), 1, stream);
        CHECK(false);
    } catch (const ContractViolation& e) {
        const std::string msg = e.what();
        CHECK(msg.find("W_V") != std::string::npos);
    }
}

TEST_CASE("attach: zero-init neutrality for non-sigmoid kinds") {
    RngStream stream(71);
    const MlpParams base = make_mlp(stream, 5, {8, 8}, 4, Activation::Tanh);
    for (auto kind : {AdapterKind::plain(), AdapterKind::sine(100.0), AdapterKind::tanh_map(),
                      AdapterKind::relu_map(), AdapterKind::clip(-1.5, 1.5)}) {
        RngStream attach_stream(72);
        auto model = AdaptedMlp::attach(base, {"W1", "W2", "W3"}, kind, 2, attach_stream);
        std::vector<double> x(5);
        for (double& v : x) v = stream.next_gaussian();
        const auto z1 = model->predict_logits(x);
        const auto z2 = mlp_forward(base, x).z;
        for (size_t i = 0; i < z1.size(); ++i) CHECK(z1[i] == z2[i]);
    }
}

TEST_CASE("attach: trainable factor count matches (out+in)*r per target") {
    RngStream stream(73);
    for (int trial = 0; trial < 50; ++trial) {
        const int in = 2 + stream.next_index(6);
        const int h = 2 + stream.next_index(6);
        const int classes = 2 + stream.next_index(4);
        const int r = 1 + stream.next_index(2);
        const MlpParams base = make_mlp(stream, in, {h}, classes, Activation::Tanh);
        auto model = AdaptedMlp::attach(base, {"W1", "W2"}, AdapterKind::sine(100.0), r, stream);
        size_t factor_count = 0;
        for (const auto& p : model->trainable_params())
            if (p.decay) factor_count += p.size;  // decay marks exactly the A/B factors
        const size_t expect = static_cast<size_t>((h + in) * r) + static_cast<size_t>((classes + h) * r);
        CHECK(factor_count == expect);
    }
}

TEST_CASE("attach: full-rank plain adapters span any fine-tune delta (dimension count)") {
    RngStream stream(79);
    const MlpParams base = make_mlp(stream, 4, {5}, 3, Activation::Tanh);
    const int r = 4;  // full rank for the 5x4 and 3x5 layers is min(out, in)
    auto model = AdaptedMlp::attach(base, {"W1"}, AdapterKind::plain(), r, stream);
    const auto& ad = model->adapter(1);
    CHECK(ad.a.rows * ad.b.rows <= ad.a.rows * ad.a.cols + ad.b.rows * ad.b.cols);
    CHECK(ad.rank == std::min(ad.a.rows, ad.b.rows));  // saturated rank
}

TEST_CASE("frozen base is bit-identical after parameter updates") {
    RngStream stream(83);
    const MlpParams base = make_mlp(stream, 4, {6}, 3, Activation::Tanh);
    auto model = AdaptedMlp::attach(base, {"W1", "W2"}, AdapterKind::sine(100.0), 2, stream);
    const std::vector<double> w0_before = model->adapter(1).w0.values;

    // Scribble on every trainable parameter.
    for (auto& p : model->trainable_params())
        for (size_t i = 0; i < p.size; ++i) p.data[i] += 0.37 * static_cast<double>(i % 5);

    CHECK(model->adapter(1).w0.values == w0_before);
    CHECK(model->base().layers[0].w.values == base.layers[0].w.values);
    CHECK(model->base().layers[1].w.values == base.layers[1].w.values);
}

TEST_CASE("adapted MLP batch gradients match finite differences through the adapters") {
    RngStream stream(89);
    const MlpParams base = make_mlp(stream, 3, {5}, 3, Activation::Tanh);
    auto model = AdaptedMlp::attach(base, {"W1", "W2"}, AdapterKind::sine(25.0), 2, stream);
    // Move b off zero so phi' is generic.
    for (auto& p : model->trainable_params())
        for (size_t i = 0; i < p.size; ++i) p.data[i] += 0.05 * stream.next_gaussian();

    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> x(3);
        for (double& v : x) v = stream.next_gaussian();
        xs.push_back(x);
        ys.push_back(stream.next_index(3));
    }
    std::vector<Example> batch;
    for (size_t i = 0; i < xs.size(); ++i) batch.push_back({xs[i], ys[i]});

    Grads grads = model->zero_grads();
    model->batch_loss_grads(batch, grads);

    auto batch_loss = [&]() {
        double s = 0.0;
        for (const auto& ex : batch) {
            const auto z = model->predict_logits(ex.x);
            s += cross_entropy(softmax(z), ex.y);
        }
        return s / static_cast<double>(batch.size());
    };
    auto refs = model->trainable_params();
    double worst = 0.0;
    for (size_t p = 0; p < refs.size(); ++p) {
        for (size_t i = 0; i < refs[p].size; ++i) {
            const double keep = refs[p].data[i];
            refs[p].data[i] = keep + 1e-6;
            const double lp = batch_loss();
            refs[p].data[i] = keep - 1e-6;
            const double lm = batch_loss();
            refs[p].data[i] = keep;
            const double fd = (lp - lm) / 2e-6;
            worst = std::max(worst, std::abs(fd - grads[p][i]) / std::max({1.0, std::abs(fd), std::abs(grads[p][i])}));
        }
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("adapted transformer gradcheck via tape, 20 seeded cases") {
    GradCheckOptions opts;
    opts.cases = 20;
    opts.seed = 424242;
    CHECK(transformer_gradcheck_max_rel_err(opts) < 1e-4);
}

TEST_CASE("adapted transformer: adapter factors get finite-difference-correct gradients") {
    RngStream stream(97);
    const ToyTransformerParams base = make_toy_transformer(stream, 4, 6, 3, Activation::Tanh);
    auto model = AdaptedTransformer::attach(base, 3, {"W_V", "W_1", "W_2"}, AdapterKind::sine(10.0), 2, stream);
    for (auto& p : model->trainable_params())
        for (size_t i = 0; i < p.size; ++i) p.data[i] += 0.05 * stream.next_gaussian();

    std::vector<double> x(12);
    for (double& v : x) v = stream.next_gaussian();
    std::vector<Example> batch{{x, 1}};
    Grads grads = model->zero_grads();
    model->batch_loss_grads(batch, grads);

    auto loss_now = [&]() {
        const auto z = model->predict_logits(x);
        return cross_entropy(softmax(z), 1);
    };
    auto refs = model->trainable_params();
    double worst = 0.0;
    for (size_t p = 0; p < refs.size(); ++p) {
        for (size_t i = 0; i < refs[p].size; ++i) {
            const double keep = refs[p].data[i];
            refs[p].data[i] = keep + 1e-6;
            const double lp = loss_now();
            refs[p].data[i] = keep - 1e-6;
            const double lm = loss_now();
            refs[p].data[i] = keep;
            const double fd = (lp - lm) / 2e-6;
            worst = std::max(worst, std::abs(fd - grads[p][i]) / std::max({1.0, std::abs(fd), std::abs(grads[p][i])}));
        }
    }
    CHECK(worst < 1e-5);
}
