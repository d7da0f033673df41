#include "bpu/adapted.hpp"

#include <algorithm>
#include <cmath>

namespace bpu {

namespace {

std::string join_targets(const std::vector<std::string>& ids) {
    std::string out;
    for (size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    return out;
}

double sq_sum(const Matrix& m) {
    double s = 0.0;
    for (double v : m.values) s += v * v;
    return s;
}

double sq_sum(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// AdaptedMlp
// ---------------------------------------------------------------------------

std::unique_ptr<AdaptedMlp> AdaptedMlp::attach(const MlpParams& base, const std::set<std::string>& targets,
                                               AdapterKind kind, int rank, RngStream& stream) {
    base.validate();
    const int L = base.num_layers();
    std::vector<std::string> valid;
    for (int l = 1; l <= L; ++l) valid.push_back("W" + std::to_string(l));
    for (const auto& t : targets) {
        if (std::find(valid.begin(), valid.end(), t) == valid.end())
            throw ContractViolation("attach_adapters: unknown target '" + t + "', valid targets: " +
                                    join_targets(valid));
    }

    auto model = std::unique_ptr<AdaptedMlp>(new AdaptedMlp());
    model->base_ = base;
    model->adapters_.resize(static_cast<size_t>(L));
    for (int l = 1; l <= L; ++l) {
        if (!targets.count("W" + std::to_string(l))) continue;
        const Matrix& w = base.layers[static_cast<size_t>(l - 1)].w;
        AdapterParams ap = init_adapter(stream, kind, w.rows, w.cols, rank);
        ap.w0 = w;  // frozen copy of the base weight
        model->adapters_[static_cast<size_t>(l - 1)] = std::move(ap);
    }
    model->last_weight_grads_.resize(static_cast<size_t>(L));
    return model;
}

std::unique_ptr<AdaptedMlp> AdaptedMlp::full_fine_tune(MlpParams init) {
    init.validate();
    auto model = std::unique_ptr<AdaptedMlp>(new AdaptedMlp());
    model->adapters_.resize(init.layers.size());
    model->last_weight_grads_.resize(init.layers.size());
    model->base_ = std::move(init);
    model->full_ft_ = true;
    return model;
}

std::vector<ParamRef> AdaptedMlp::trainable_params() {
    std::vector<ParamRef> out;
    const int L = base_.num_layers();
    for (int l = 1; l <= L; ++l) {
        const std::string id = "W" + std::to_string(l);
        if (full_ft_) {
            auto& layer = base_.layers[static_cast<size_t>(l - 1)];
            out.push_back({id + ".W", layer.w.values.data(), layer.w.values.size(), true});
            out.push_back({id + ".b", layer.b.data(), layer.b.size(), false});
        } else if (auto& ad = adapters_[static_cast<size_t>(l - 1)]) {
            out.push_back({id + ".A", ad->a.values.data(), ad->a.values.size(), true});
            out.push_back({id + ".B", ad->b.values.data(), ad->b.values.size(), true});
            out.push_back({id + ".bias", ad->bias.data(), ad->bias.size(), false});
        }
    }
    return out;
}

Matrix AdaptedMlp::effective_weight(int layer) const {
    const auto& ad = adapters_[static_cast<size_t>(layer - 1)];
    const Matrix& w = base_.layers[static_cast<size_t>(layer - 1)].w;
    if (!ad) return w;
    return add(ad->w0, effective_update(*ad));
}

ForwardTrace AdaptedMlp::forward(std::span<const double> x) const {
    // Same computation as the batch path; materializes effective weights
    // per call, which is fine at diagnostic sizes.
    MlpParams eff = base_;
    for (int l = 1; l <= base_.num_layers(); ++l) {
        const auto& ad = adapters_[static_cast<size_t>(l - 1)];
        if (!ad) continue;
        auto& layer = eff.layers[static_cast<size_t>(l - 1)];
        layer.w = add(ad->w0, effective_update(*ad));
        for (size_t i = 0; i < layer.b.size(); ++i) layer.b[i] += ad->bias[i];
    }
    return mlp_forward(eff, x);
}

std::vector<double> AdaptedMlp::predict_logits(std::span<const double> x) const {
    return forward(x).z;
}

double AdaptedMlp::batch_loss_grads(const std::vector<Example>& batch, Grads& grads,
                                    std::vector<std::vector<double>>* out_logits) {
    require(!batch.empty(), "batch_loss_grads: empty batch");
    const int L = base_.num_layers();

    // Effective network for this step (parameters are fixed within a batch).
    MlpParams eff = base_;
    for (int l = 1; l <= L; ++l) {
        const auto& ad = adapters_[static_cast<size_t>(l - 1)];
        if (!ad) continue;
        auto& layer = eff.layers[static_cast<size_t>(l - 1)];
        layer.w = add(ad->w0, effective_update(*ad));
        for (size_t i = 0; i < layer.b.size(); ++i) layer.b[i] += ad->bias[i];
    }

    std::vector<Matrix> g_weight;  // mean gradient w.r.t. each effective weight
    std::vector<std::vector<double>> g_bias;
    for (int l = 0; l < L; ++l) {
        g_weight.emplace_back(eff.layers[static_cast<size_t>(l)].w.rows, eff.layers[static_cast<size_t>(l)].w.cols);
        g_bias.emplace_back(eff.layers[static_cast<size_t>(l)].b.size(), 0.0);
    }

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss_sum = 0.0;
    if (out_logits) out_logits->clear();
    for (const Example& ex : batch) {
        ForwardTrace trace = mlp_forward(eff, ex.x);
        loss_sum += cross_entropy(trace.p, ex.y);
        if (out_logits) out_logits->push_back(trace.z);
        GradientSet gs = mlp_backward(eff, trace, ex.y);
        for (int l = 0; l < L; ++l) {
            Matrix& acc = g_weight[static_cast<size_t>(l)];
            for (size_t i = 0; i < acc.values.size(); ++i)
                acc.values[i] += inv_n * gs.dw[static_cast<size_t>(l)].values[i];
            auto& accb = g_bias[static_cast<size_t>(l)];
            for (size_t i = 0; i < accb.size(); ++i) accb[i] += inv_n * gs.db[static_cast<size_t>(l)][i];
        }
    }
    last_weight_grads_ = g_weight;

    // Route the mean effective-weight gradients into the trainable layout.
    size_t slot = 0;
    for (int l = 1; l <= L; ++l) {
        const size_t li = static_cast<size_t>(l - 1);
        if (full_ft_) {
            auto& gw = grads[slot++];
            for (size_t i = 0; i < gw.size(); ++i) gw[i] += g_weight[li].values[i];
            auto& gb = grads[slot++];
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += g_bias[li][i];
        } else if (const auto& ad = adapters_[li]) {
            Matrix da, db;
            adapter_factor_grads(*ad, g_weight[li], da, db);
            auto& ga = grads[slot++];
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += da.values[i];
            auto& gb = grads[slot++];
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += db.values[i];
            auto& gbias = grads[slot++];
            for (size_t i = 0; i < gbias.size(); ++i) gbias[i] += g_bias[li][i];
        }
    }
    return loss_sum * inv_n;
}

void AdaptedMlp::append_norm_entries(const Grads* grads, std::vector<NormEntry>& out) const {
    const int L = base_.num_layers();
    size_t slot = 0;
    for (int l = 1; l <= L; ++l) {
        const size_t li = static_cast<size_t>(l - 1);
        const std::string comp = (l == L) ? "classifier" : "ffn";
        out.push_back({l, comp, "weight_fro", frobenius_norm(effective_weight(l))});
        if (grads && !last_weight_grads_[li].values.empty())
            out.push_back({l, comp, "grad_fro", frobenius_norm(last_weight_grads_[li])});
        if (full_ft_) {
            if (grads) slot += 2;
            continue;
        }
        if (const auto& ad = adapters_[li]) {
            out.push_back({l, comp, "adapter_fro", frobenius_norm(effective_update(*ad))});
            if (grads) {
                const double s = sq_sum((*grads)[slot]) + sq_sum((*grads)[slot + 1]) + sq_sum((*grads)[slot + 2]);
                out.push_back({l, comp, "adapter_grad_fro", std::sqrt(s)});
                slot += 3;
            }
        }
    }
}

std::unique_ptr<TrainableModel> AdaptedMlp::clone() const {
    return std::unique_ptr<AdaptedMlp>(new AdaptedMlp(*this));
}

// ---------------------------------------------------------------------------
// AdaptedTransformer
// ---------------------------------------------------------------------------

std::unique_ptr<AdaptedTransformer> AdaptedTransformer::attach(const ToyTransformerParams& base, int seq_len,
                                                               const std::set<std::string>& targets,
                                                               AdapterKind kind, int rank, RngStream& stream) {
    base.validate();
    require(seq_len >= 1, "AdaptedTransformer: seq_len must be >= 1");
    const std::vector<std::string> valid = {"W_V", "W_1", "W_2"};
    for (const auto& t : targets) {
        if (std::find(valid.begin(), valid.end(), t) == valid.end())
            throw ContractViolation("attach_adapters: unknown target '" + t + "', valid targets: " +
                                    join_targets(valid));
    }
    auto model = std::unique_ptr<AdaptedTransformer>(new AdaptedTransformer());
    model->base_ = base;
    model->seq_len_ = seq_len;
    auto make = [&](const Matrix& w) {
        AdapterParams ap = init_adapter(stream, kind, w.rows, w.cols, rank);
        ap.w0 = w;
        return ap;
    };
    if (targets.count("W_V")) model->ad_v_ = make(base.w_v);
    if (targets.count("W_1")) model->ad_w1_ = make(base.w_1);
    if (targets.count("W_2")) model->ad_w2_ = make(base.w_2);
    return model;
}

std::unique_ptr<AdaptedTransformer> AdaptedTransformer::full_fine_tune(ToyTransformerParams init, int seq_len) {
    init.validate();
    require(seq_len >= 1, "AdaptedTransformer: seq_len must be >= 1");
    auto model = std::unique_ptr<AdaptedTransformer>(new AdaptedTransformer());
    model->base_ = std::move(init);
    model->seq_len_ = seq_len;
    model->full_ft_ = true;
    return model;
}

const std::optional<AdapterParams>* AdaptedTransformer::slot(const std::string& target) const {
    if (target == "W_V") return &ad_v_;
    if (target == "W_1") return &ad_w1_;
    if (target == "W_2") return &ad_w2_;
    return nullptr;
}

bool AdaptedTransformer::has_adapter(const std::string& target) const {
    const auto* s = slot(target);
    return s && s->has_value();
}

const AdapterParams& AdaptedTransformer::adapter(const std::string& target) const {
    const auto* s = slot(target);
    require(s && s->has_value(), "AdaptedTransformer: no adapter on '" + target + "'");
    return **s;
}

std::vector<ParamRef> AdaptedTransformer::trainable_params() {
    std::vector<ParamRef> out;
    if (full_ft_) {
        auto push = [&](const std::string& name, Matrix& m) {
            out.push_back({name, m.values.data(), m.values.size(), true});
        };
        push("W_Q", base_.w_q);
        push("W_K", base_.w_k);
        push("W_V", base_.w_v);
        push("W_1", base_.w_1);
        push("W_2", base_.w_2);
        push("W_c", base_.w_c);
        out.push_back({"b_c", base_.b_c.data(), base_.b_c.size(), false});
        return out;
    }
    auto push_adapter = [&](const std::string& name, std::optional<AdapterParams>& ad) {
        if (!ad) return;
        out.push_back({name + ".A", ad->a.values.data(), ad->a.values.size(), true});
        out.push_back({name + ".B", ad->b.values.data(), ad->b.values.size(), true});
    };
    push_adapter("W_V", ad_v_);
    push_adapter("W_1", ad_w1_);
    push_adapter("W_2", ad_w2_);
    return out;
}

Matrix AdaptedTransformer::reshape_input(std::span<const double> x) const {
    require(x.size() == static_cast<size_t>(seq_len_) * base_.d,
            "AdaptedTransformer: input length must be seq_len * d = " +
                std::to_string(static_cast<size_t>(seq_len_) * base_.d));
    Matrix m(seq_len_, base_.d);
    std::copy(x.begin(), x.end(), m.values.begin());
    return m;
}

std::vector<double> AdaptedTransformer::predict_logits(std::span<const double> x) const {
    ToyTransformerParams eff = base_;
    if (ad_v_) eff.w_v = add(ad_v_->w0, effective_update(*ad_v_));
    if (ad_w1_) eff.w_1 = add(ad_w1_->w0, effective_update(*ad_w1_));
    if (ad_w2_) eff.w_2 = add(ad_w2_->w0, effective_update(*ad_w2_));
    return transformer_forward(eff, reshape_input(x)).z;
}

double AdaptedTransformer::batch_loss_grads(const std::vector<Example>& batch, Grads& grads,
                                            std::vector<std::vector<double>>* out_logits) {
    require(!batch.empty(), "batch_loss_grads: empty batch");
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    double loss_sum = 0.0;
    if (out_logits) out_logits->clear();

    // Mean gradients w.r.t. the six effective weights, for trace metrics.
    std::vector<Matrix> wgrads;
    wgrads.emplace_back(base_.w_q.rows, base_.w_q.cols);
    wgrads.emplace_back(base_.w_k.rows, base_.w_k.cols);
    wgrads.emplace_back(base_.w_v.rows, base_.w_v.cols);
    wgrads.emplace_back(base_.w_1.rows, base_.w_1.cols);
    wgrads.emplace_back(base_.w_2.rows, base_.w_2.cols);
    wgrads.emplace_back(base_.w_c.rows, base_.w_c.cols);

    for (const Example& ex : batch) {
        Tape tape;
        const int x_node = tape.constant(reshape_input(ex.x));

        struct WeightNode {
            int eff = -1;
            int a = -1, b = -1;
        };
        auto weight_node = [&](const Matrix& w, std::optional<AdapterParams>& ad) {
            WeightNode wn;
            if (full_ft_) {
                wn.eff = tape.param(w);
            } else if (ad) {
                wn.a = tape.param(ad->a);
                wn.b = tape.param(ad->b);
                const int u = tape.elemwise(tape.matmul_nt(wn.a, wn.b), ad->kind.map());
                wn.eff = tape.add(tape.constant(ad->w0), u);
            } else {
                wn.eff = tape.constant(w);
            }
            return wn;
        };
        std::optional<AdapterParams> none;
        WeightNode nq = weight_node(base_.w_q, none);
        WeightNode nk = weight_node(base_.w_k, none);
        WeightNode nv = weight_node(base_.w_v, ad_v_);
        WeightNode n1 = weight_node(base_.w_1, ad_w1_);
        WeightNode n2 = weight_node(base_.w_2, ad_w2_);
        WeightNode nc = weight_node(base_.w_c, none);
        Matrix bc_row(1, base_.num_classes());
        for (int j = 0; j < base_.num_classes(); ++j) bc_row.at(0, j) = base_.b_c[static_cast<size_t>(j)];
        const int bc = full_ft_ ? tape.param(bc_row) : tape.constant(bc_row);

        const int q = tape.matmul(x_node, nq.eff);
        const int k = tape.matmul(x_node, nk.eff);
        const int scores = tape.scale_by(tape.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(base_.d)));
        const int attn = tape.row_softmax(scores);
        const int h1 = tape.add(x_node, tape.matmul(attn, tape.matmul(x_node, nv.eff)));
        const int hidden = tape.elemwise(tape.matmul_nt(h1, n1.eff), ElemMap::activation(base_.hidden_activation));
        const int h2 = tape.add(h1, tape.matmul_nt(hidden, n2.eff));
        const int pooled = tape.mean_pool_rows(h2);
        const int zrow = tape.add_bias(tape.matmul_nt(pooled, nc.eff), bc);
        const int loss = tape.cross_entropy_on_logits(zrow, ex.y);

        const double loss_val = tape.value(loss).at(0, 0);
        if (!std::isfinite(loss_val)) throw NumericEvent("transformer loss non-finite");
        loss_sum += loss_val;
        if (out_logits) {
            const Matrix& zv = tape.value(zrow);
            out_logits->emplace_back(zv.values);
        }

        tape.backward(loss);

        size_t slot = 0;
        auto accum_adapter = [&](const WeightNode& wn) {
            if (wn.a < 0) return;
            const Matrix& da = tape.grad(wn.a);
            const Matrix& db = tape.grad(wn.b);
            auto& ga = grads[slot++];
            for (size_t i = 0; i < ga.size(); ++i) ga[i] += inv_n * da.values[i];
            auto& gb = grads[slot++];
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += inv_n * db.values[i];
        };
        if (full_ft_) {
            const WeightNode* nodes[] = {&nq, &nk, &nv, &n1, &n2, &nc};
            for (const WeightNode* wn : nodes) {
                auto& g = grads[slot++];
                const Matrix& gm = tape.grad(wn->eff);
                for (size_t i = 0; i < g.size(); ++i) g[i] += inv_n * gm.values[i];
            }
            auto& gb = grads[slot++];
            const Matrix& gbc = tape.grad(bc);
            for (size_t i = 0; i < gb.size(); ++i) gb[i] += inv_n * gbc.values[i];
        } else {
            accum_adapter(nv);
            accum_adapter(n1);
            accum_adapter(n2);
        }

        const WeightNode* all[] = {&nq, &nk, &nv, &n1, &n2, &nc};
        for (size_t wi = 0; wi < 6; ++wi) {
            const Matrix& gm = tape.grad(all[wi]->eff);
            for (size_t i = 0; i < wgrads[wi].values.size(); ++i)
                wgrads[wi].values[i] += inv_n * gm.values[i];
        }
    }
    last_weight_grads_ = std::move(wgrads);
    return loss_sum * inv_n;
}

void AdaptedTransformer::append_norm_entries(const Grads* grads, std::vector<NormEntry>& out) const {
    auto eff = [&](const Matrix& w, const std::optional<AdapterParams>& ad) {
        return ad ? add(ad->w0, effective_update(*ad)) : w;
    };
    const Matrix wv = eff(base_.w_v, ad_v_);
    const Matrix w1 = eff(base_.w_1, ad_w1_);
    const Matrix w2 = eff(base_.w_2, ad_w2_);

    // Per-component aggregates (single block: layer_id 1 throughout).
    out.push_back({1, "attention", "weight_fro",
                   std::sqrt(sq_sum(base_.w_q) + sq_sum(base_.w_k) + sq_sum(wv))});
    out.push_back({1, "ffn", "weight_fro", std::sqrt(sq_sum(w1) + sq_sum(w2))});
    out.push_back({1, "classifier", "weight_fro", frobenius_norm(base_.w_c)});

    if (grads && last_weight_grads_.size() == 6) {
        out.push_back({1, "attention", "grad_fro",
                       std::sqrt(sq_sum(last_weight_grads_[0]) + sq_sum(last_weight_grads_[1]) +
                                 sq_sum(last_weight_grads_[2]))});
        out.push_back({1, "ffn", "grad_fro",
                       std::sqrt(sq_sum(last_weight_grads_[3]) + sq_sum(last_weight_grads_[4]))});
        out.push_back({1, "classifier", "grad_fro", frobenius_norm(last_weight_grads_[5])});
    }

    if (ad_v_)
        out.push_back({1, "attention", "adapter_fro", frobenius_norm(effective_update(*ad_v_))});
    if (ad_w1_ || ad_w2_) {
        double s = 0.0;
        if (ad_w1_) s += sq_sum(effective_update(*ad_w1_));
        if (ad_w2_) s += sq_sum(effective_update(*ad_w2_));
        out.push_back({1, "ffn", "adapter_fro", std::sqrt(s)});
    }
    if (grads && !full_ft_) {
        size_t slot = 0;
        auto factor_sq = [&](const std::optional<AdapterParams>& ad) {
            if (!ad) return 0.0;
            const double s = sq_sum((*grads)[slot]) + sq_sum((*grads)[slot + 1]);
            slot += 2;
            return s;
        };
        const double sv = factor_sq(ad_v_);
        const double s1 = factor_sq(ad_w1_);
        const double s2 = factor_sq(ad_w2_);
        if (ad_v_) out.push_back({1, "attention", "adapter_grad_fro", std::sqrt(sv)});
        if (ad_w1_ || ad_w2_) out.push_back({1, "ffn", "adapter_grad_fro", std::sqrt(s1 + s2)});
    }
}

std::unique_ptr<TrainableModel> AdaptedTransformer::clone() const {
    return std::unique_ptr<AdaptedTransformer>(new AdaptedTransformer(*this));
}

}  // namespace bpu
