#include "bpu/unlearn.hpp"

#include <cmath>
#include <limits>

#include "bpu/adapted.hpp"

namespace bpu {

void TrainConfig::validate() const {
    require(alpha_r >= 0.0 && alpha_f >= 0.0, "TrainConfig: alpha_r and alpha_f must be >= 0");
    require(lambda > 0.0, "TrainConfig: lambda must be > 0");
    require(learning_rate > 0.0, "TrainConfig: learning_rate must be > 0");
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(iterations >= 0, "TrainConfig: iterations must be >= 0");
    require(guard.norm_factor > 1.0, "TrainConfig: guard norm_factor must be > 1");
}

OptState OptState::for_model(TrainableModel& model) {
    OptState st;
    st.m = model.zero_grads();
    st.v = model.zero_grads();
    st.step = 0;
    return st;
}

void sgd_step(std::span<double> theta, std::span<const double> direction, double lr) {
    require(theta.size() == direction.size(), "sgd_step: size mismatch");
    for (size_t i = 0; i < theta.size(); ++i) theta[i] += lr * direction[i];
}

void adamw_step(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                std::span<double> v, long long t, double lr, double beta1, double beta2, double eps,
                double weight_decay) {
    require(theta.size() == grad.size() && theta.size() == m.size() && theta.size() == v.size(),
            "adamw_step: size mismatch");
    require(t >= 1, "adamw_step: step counter must be >= 1");
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < theta.size(); ++i) {
        if (weight_decay != 0.0) theta[i] *= 1.0 - lr * weight_decay;
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
}

void grad_difference_step(std::vector<ParamRef>& params, const Grads& grad_r, const Grads& grad_f,
                          double alpha_r, double alpha_f) {
    require(grad_r.size() == params.size() && grad_f.size() == params.size(),
            "grad_difference_step: gradient count mismatch");
    for (size_t p = 0; p < params.size(); ++p) {
        require(grad_r[p].size() == params[p].size && grad_f[p].size() == params[p].size,
                "grad_difference_step: gradient shape mismatch at " + params[p].name);
        double* theta = params[p].data;
        for (size_t i = 0; i < params[p].size; ++i)
            theta[i] += -alpha_r * grad_r[p][i] + alpha_f * grad_f[p][i];
    }
}

ObjectiveGrads::ObjectiveGrads()
    : loss_retain(std::numeric_limits<double>::quiet_NaN()),
      loss_forget(std::numeric_limits<double>::quiet_NaN()) {}

ObjectiveGrads compute_objective_grads(TrainableModel& model, const std::vector<Example>& retain_batch,
                                       const std::vector<Example>& forget_batch, ObjectiveMode mode,
                                       double lambda, double alpha_r, double alpha_f) {
    ObjectiveGrads out;
    const bool needs_retain =
        mode == ObjectiveMode::Combined || (mode == ObjectiveMode::GradientDifference && alpha_r > 0.0);
    const bool needs_forget = mode == ObjectiveMode::PureAscent || mode == ObjectiveMode::Combined ||
                              (mode == ObjectiveMode::GradientDifference && alpha_f > 0.0);
    if (needs_retain) require(!retain_batch.empty(), "compute_objective_grads: retain batch required but empty");
    if (needs_forget) require(!forget_batch.empty(), "compute_objective_grads: forget batch required but empty");

    if (needs_retain) {
        out.grad_r = model.zero_grads();
        out.loss_retain = model.batch_loss_grads(retain_batch, out.grad_r);
    }
    if (needs_forget) {
        out.grad_f = model.zero_grads();
        out.loss_forget = model.batch_loss_grads(forget_batch, out.grad_f, &out.forget_logits);
        out.forget_labels.reserve(forget_batch.size());
        for (const Example& ex : forget_batch) out.forget_labels.push_back(ex.y);
    }
    if (mode == ObjectiveMode::Combined) {
        out.grad_combined = out.grad_r;
        for (size_t p = 0; p < out.grad_combined.size(); ++p)
            for (size_t i = 0; i < out.grad_combined[p].size(); ++i)
                out.grad_combined[p][i] -= lambda * out.grad_f[p][i];
    }
    return out;
}

namespace {

std::vector<Example> sample_batch(const Dataset& ds, RngStream& stream, int batch_size) {
    std::vector<Example> batch;
    batch.reserve(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i)
        batch.push_back(ds.example(static_cast<size_t>(stream.next_index(static_cast<int>(ds.size())))));
    return batch;
}

double total_grad_norm(const Grads& grads) {
    double s = 0.0;
    for (const auto& g : grads)
        for (double v : g) s += v * v;
    return std::sqrt(s);
}

bool all_finite(const Grads& grads) {
    for (const auto& g : grads)
        for (double v : g)
            if (!std::isfinite(v)) return false;
    return true;
}

bool params_finite(const std::vector<ParamRef>& params) {
    for (const auto& p : params)
        for (size_t i = 0; i < p.size; ++i)
            if (!std::isfinite(p.data[i])) return false;
    return true;
}

// Signed effective gradient fed to AdamW: a single optimizer state over one
// effective objective. In gradient-difference mode the combined direction is
// normalized by alpha = alpha_r so the retain term keeps unit scale.
Grads effective_gradient(const ObjectiveGrads& og, const TrainConfig& cfg, TrainableModel& model) {
    Grads eff = model.zero_grads();
    switch (cfg.objective_mode) {
        case ObjectiveMode::GradientDifference: {
            const double alpha = cfg.alpha_r > 0.0 ? cfg.alpha_r : 1.0;
            for (size_t p = 0; p < eff.size(); ++p)
                for (size_t i = 0; i < eff[p].size(); ++i) {
                    double g = 0.0;
                    if (!og.grad_r.empty()) g += (cfg.alpha_r / alpha) * og.grad_r[p][i];
                    if (!og.grad_f.empty()) g -= (cfg.alpha_f / alpha) * og.grad_f[p][i];
                    eff[p][i] = g;
                }
            break;
        }
        case ObjectiveMode::PureAscent:
            if (og.grad_f.empty()) break;
            for (size_t p = 0; p < eff.size(); ++p)
                for (size_t i = 0; i < eff[p].size(); ++i) eff[p][i] = -og.grad_f[p][i];
            break;
        case ObjectiveMode::Combined:
            if (!og.grad_combined.empty()) eff = og.grad_combined;
            break;
    }
    return eff;
}

}  // namespace

UnlearnResult run_unlearning(UnlearnSession& session) {
    session.config.validate();
    require(session.model != nullptr, "run_unlearning: no model");
    TrainableModel& model = *session.model;
    const TrainConfig& cfg = session.config;

    const bool needs_retain =
        cfg.objective_mode != ObjectiveMode::PureAscent && (cfg.objective_mode != ObjectiveMode::GradientDifference || cfg.alpha_r > 0.0);
    const bool needs_forget = cfg.objective_mode == ObjectiveMode::PureAscent ||
                              cfg.objective_mode == ObjectiveMode::Combined ||
                              (cfg.objective_mode == ObjectiveMode::GradientDifference && cfg.alpha_f > 0.0);
    if (needs_retain)
        require(session.retain && session.retain->size() > 0, "run_unlearning: retain dataset required");
    if (needs_forget)
        require(session.forget && session.forget->size() > 0, "run_unlearning: forget dataset required");

    RngStream retain_stream = RngStream::substream(cfg.seed, 1);
    RngStream forget_stream = RngStream::substream(cfg.seed, 2);

    std::vector<ParamRef> params = model.trainable_params();
    if (cfg.optimizer.kind == OptimizerKind::AdamW && session.opt_state.m.empty())
        session.opt_state = OptState::for_model(model);

    UnlearnResult result;
    double guard_baseline = -1.0;

    for (int iter = 1; iter <= cfg.iterations; ++iter) {
        std::vector<Example> retain_batch, forget_batch;
        if (needs_retain) retain_batch = sample_batch(*session.retain, retain_stream, cfg.batch_size);
        if (needs_forget) forget_batch = sample_batch(*session.forget, forget_stream, cfg.batch_size);

        ObjectiveGrads og;
        bool numeric_event = false;
        try {
            og = compute_objective_grads(model, retain_batch, forget_batch, cfg.objective_mode, cfg.lambda,
                                         cfg.alpha_r, cfg.alpha_f);
        } catch (const NumericEvent&) {
            numeric_event = true;
        }

        if (!numeric_event) {
            // Apply the configured step.
            if (cfg.optimizer.kind == OptimizerKind::Sgd) {
                if (cfg.objective_mode == ObjectiveMode::Combined) {
                    for (size_t p = 0; p < params.size(); ++p)
                        for (size_t i = 0; i < params[p].size; ++i)
                            params[p].data[i] -= cfg.learning_rate * og.grad_combined[p][i];
                } else {
                    const Grads zero = og.grad_r.empty() || og.grad_f.empty() ? model.zero_grads() : Grads{};
                    const Grads& gr = og.grad_r.empty() ? zero : og.grad_r;
                    const Grads& gf = og.grad_f.empty() ? zero : og.grad_f;
                    grad_difference_step(params, gr, gf, cfg.alpha_r, cfg.alpha_f);
                }
            } else {
                const Grads eff = effective_gradient(og, cfg, model);
                session.opt_state.step += 1;
                for (size_t p = 0; p < params.size(); ++p) {
                    const double wd = params[p].decay ? cfg.optimizer.weight_decay : 0.0;
                    adamw_step({params[p].data, params[p].size}, eff[p], session.opt_state.m[p],
                               session.opt_state.v[p], session.opt_state.step, cfg.learning_rate,
                               cfg.optimizer.beta1, cfg.optimizer.beta2, cfg.optimizer.eps, wd);
                }
            }
        }

        // Trace record for this iteration: post-update state, this step's
        // signed effective gradient. Per-weight grad_fro entries trace the
        // most recent batch gradient, which in gradient-difference mode is
        // the forget-side gradient (the component the instability concerns).
        const Grads trace_grads = effective_gradient(og, cfg, model);
        TraceRecord rec = record_iteration(model, trace_grads, og.forget_logits, og.forget_labels, iter,
                                           og.loss_retain, og.loss_forget);

        // Theorem-2 checks on small adapted MLPs, every check_every iterations.
        if (session.diagnostics.theorem_checks && iter % std::max(1, session.diagnostics.check_every) == 0) {
            if (auto* mlp = dynamic_cast<AdaptedMlp*>(&model); mlp && !og.forget_logits.empty()) {
                MlpParams eff_mlp = mlp->base();
                for (int l = 1; l <= eff_mlp.num_layers(); ++l)
                    eff_mlp.layers[static_cast<size_t>(l - 1)].w = mlp->effective_weight(l);
                if (eff_mlp.num_layers() >= 2) {
                    const Example& ex = forget_batch.front();
                    try {
                        ForwardTrace tr = mlp_forward(eff_mlp, ex.x);
                        rec.assumptions = check_thm2_assumptions(eff_mlp, tr, ex.y, 1);
                    } catch (const NumericEvent&) {
                        // leave assumptions unset for this record
                    }
                }
            }
        }

        // Guard evaluation: explosion factor on the total trainable-gradient
        // norm, plus any non-finite value in losses, gradients or parameters.
        const double gnorm = total_grad_norm(trace_grads);
        bool guard_fired = numeric_event;
        if (!numeric_event) {
            const bool finite = std::isfinite(gnorm) && all_finite(trace_grads) && params_finite(params) &&
                                (!needs_retain || std::isfinite(og.loss_retain)) &&
                                (!needs_forget || std::isfinite(og.loss_forget));
            if (!finite) {
                numeric_event = true;
                guard_fired = true;
            } else {
                if (guard_baseline < 0.0) guard_baseline = gnorm;
                if (guard_baseline > 0.0 && gnorm > cfg.guard.norm_factor * guard_baseline) guard_fired = true;
            }
        }
        rec.guard_flag = guard_fired;
        session.history.push_back(std::move(rec));
        result.iterations_run = iter;

        if (numeric_event) {
            result.outcome = RunOutcome::NumericDivergence;
            result.event_iter = iter;
            return result;
        }
        if (guard_fired && result.event_iter < 0) result.event_iter = iter;
        if (guard_fired && cfg.guard.mode == GuardMode::Halt) {
            result.outcome = RunOutcome::GuardHalt;
            return result;
        }
    }
    result.outcome = RunOutcome::Completed;
    return result;
}

}  // namespace bpu
