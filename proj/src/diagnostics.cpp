#include "bpu/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bpu {

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double select_metric(const TraceRecord& rec, const MetricSelector& sel) {
    for (const NormEntry& e : rec.norms)
        if (e.layer_id == sel.layer_id && e.component == sel.component && e.metric == sel.metric)
            return e.value;
    throw ContractViolation("detect_explosion: metric (" + std::to_string(sel.layer_id) + ", " +
                            sel.component + ", " + sel.metric + ") not present in record");
}

double component_aggregate(const TraceRecord& rec, const std::string& component, const std::string& metric,
                           bool* found) {
    double s = 0.0;
    *found = false;
    for (const NormEntry& e : rec.norms) {
        if (e.component == component && e.metric == metric) {
            s += e.value * e.value;
            *found = true;
        }
    }
    return std::sqrt(s);
}

}  // namespace

TraceRecord record_iteration(TrainableModel& model, const Grads& grads,
                             const std::vector<std::vector<double>>& forget_logits,
                             const std::vector<int>& forget_labels, int iter,
                             double loss_retain, double loss_forget) {
    TraceRecord rec;
    rec.iter = iter;
    rec.loss_retain = loss_retain;
    rec.loss_forget = loss_forget;
    if (forget_logits.empty()) {
        rec.logit_norm_mean = std::numeric_limits<double>::quiet_NaN();
        rec.margin_mean = std::numeric_limits<double>::quiet_NaN();
    } else {
        double zsum = 0.0, msum = 0.0;
        for (size_t i = 0; i < forget_logits.size(); ++i) {
            zsum += norm2(forget_logits[i]);
            msum += margin(forget_logits[i], forget_labels[i]);
        }
        rec.logit_norm_mean = zsum / static_cast<double>(forget_logits.size());
        rec.margin_mean = msum / static_cast<double>(forget_logits.size());
    }
    model.append_norm_entries(&grads, rec.norms);
    std::sort(rec.norms.begin(), rec.norms.end(), [](const NormEntry& a, const NormEntry& b) {
        if (a.layer_id != b.layer_id) return a.layer_id < b.layer_id;
        if (a.component != b.component) return a.component < b.component;
        return a.metric < b.metric;
    });
    return rec;
}

MarginBoundCheck check_margin_bound(const ForwardTrace& trace, int y) {
    MarginBoundCheck res;
    const auto [lower, upper] = loss_margin_bounds(trace.z, y);
    res.lower = lower;
    res.upper = upper;
    res.actual = cross_entropy(trace.p, y);
    res.holds = (res.actual >= lower - 1e-12) && (res.actual <= upper + 1e-12);
    return res;
}

AssumptionReport check_thm2_assumptions(const MlpParams& model, const ForwardTrace& trace, int y,
                                        int layer_l) {
    const int L = model.num_layers();
    require(layer_l >= 1 && layer_l <= L - 1, "check_thm2_assumptions: need 1 <= layer_l <= L-1");
    for (const auto& layer : model.layers)
        require(std::min(layer.w.rows, layer.w.cols) <= 256,
                "check_thm2_assumptions: layer width exceeds the SVD diagnostic cap");

    auto diag_of = [&](int l) {  // D_l = Diag(sigma'(h_l)), 1-based hidden layer index
        const auto& h = trace.h[static_cast<size_t>(l - 1)];
        Matrix d(static_cast<int>(h.size()), static_cast<int>(h.size()));
        for (size_t i = 0; i < h.size(); ++i)
            d.at(static_cast<int>(i), static_cast<int>(i)) = activate_deriv(h[i], model.hidden_activation);
        return d;
    };

    // D_l W_{l+1}^T D_{l+1} ... D_{L-1}
    Matrix chain = diag_of(layer_l);
    for (int l = layer_l + 1; l <= L - 1; ++l) {
        chain = matmul_nt(chain, model.layers[static_cast<size_t>(l - 1)].w);  // * W_l^T
        chain = matmul(chain, diag_of(l));
    }

    AssumptionReport rep;
    const SvdResult chain_svd = svd_small(chain);
    rep.sigma_min_chain = chain_svd.s.back();

    // First right singular vector of W_L^T and the projection ratio of
    // grad_z L onto it.
    const SvdResult wl_svd = svd_small(transpose(model.layers[static_cast<size_t>(L - 1)].w));
    std::vector<double> v1(static_cast<size_t>(wl_svd.v.rows));
    for (int i = 0; i < wl_svd.v.rows; ++i) v1[static_cast<size_t>(i)] = wl_svd.v.at(i, 0);

    const std::vector<double> gz = logit_gradient(trace.p, y);
    const double gz_norm = norm2(gz);
    if (gz_norm > 0.0) {
        const std::vector<double> proj = project_onto(gz, v1);
        rep.v1_projection_ratio = norm2(proj) / gz_norm;
    } else {
        rep.v1_projection_ratio = 0.0;
    }
    rep.a_prev_norm = norm2(trace.a.back());
    return rep;
}

std::pair<bool, int> detect_explosion(const std::vector<TraceRecord>& history,
                                      const MetricSelector& selector, double factor, int window) {
    require(!history.empty(), "detect_explosion: empty history");
    require(factor > 1.0, "detect_explosion: factor must be > 1");
    require(window >= 1, "detect_explosion: window must be >= 1");

    const double baseline = select_metric(history.front(), selector);
    std::vector<double> series;
    series.reserve(history.size());
    for (const TraceRecord& rec : history) series.push_back(select_metric(rec, selector));

    for (size_t i = static_cast<size_t>(window) - 1; i < series.size(); ++i) {
        std::vector<double> win(series.begin() + static_cast<long>(i) - window + 1,
                                series.begin() + static_cast<long>(i) + 1);
        if (median_of(std::move(win)) > factor * baseline)
            return {true, history[i].iter};
    }
    return {false, -1};
}

double component_growth_summary(const std::vector<TraceRecord>& history, const std::string& component,
                                const std::string& metric, int window) {
    require(!history.empty(), "component_growth_summary: empty history");
    require(window >= 1, "component_growth_summary: window must be >= 1");

    std::vector<double> series;
    series.reserve(history.size());
    for (const TraceRecord& rec : history) {
        bool found = false;
        const double v = component_aggregate(rec, component, metric, &found);
        if (!found)
            throw ContractViolation("component_growth_summary: component '" + component + "' with metric '" +
                                    metric + "' not present");
        series.push_back(v);
    }
    const double initial = series.front();
    require(initial > 0.0, "component_growth_summary: initial value is zero");
    const size_t w = std::min(static_cast<size_t>(window), series.size());
    std::vector<double> tail(series.end() - static_cast<long>(w), series.end());
    return median_of(std::move(tail)) / initial;
}

}  // namespace bpu
