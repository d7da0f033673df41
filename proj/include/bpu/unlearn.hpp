#pragma once

#include <cstdint>

#include "bpu/dataset.hpp"
#include "bpu/diagnostics.hpp"
#include "bpu/model.hpp"
#include "bpu/rng.hpp"

namespace bpu {

enum class OptimizerKind { Sgd, AdamW };
enum class ObjectiveMode { GradientDifference, PureAscent, Combined };
enum class GuardMode { Halt, Record };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::AdamW;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

struct GuardConfig {
    double norm_factor = 1e3;  // fire at norm_factor x the iteration-1 gradient norm
    GuardMode mode = GuardMode::Record;
};

struct TrainConfig {
    double alpha_r = 1.0;  // retain step scale (SGD path uses it directly)
    double alpha_f = 1.0;  // forget ascent scale
    double lambda = 1.0;   // combined-mode forgetting strength
    OptimizerConfig optimizer;
    double learning_rate = 5e-5;
    int batch_size = 8;
    int iterations = 1000;
    uint64_t seed = 42;
    GuardConfig guard;
    ObjectiveMode objective_mode = ObjectiveMode::GradientDifference;

    void validate() const;
};

// AdamW first/second moments per trainable tensor; empty for SGD.
struct OptState {
    Grads m;
    Grads v;
    long long step = 0;

    static OptState for_model(TrainableModel& model);
};

// theta += lr * direction (the direction already carries its signs).
void sgd_step(std::span<double> theta, std::span<const double> direction, double lr);

// Decoupled-weight-decay AdamW with bias correction; t is the 1-based step.
void adamw_step(std::span<double> theta, std::span<const double> grad, std::span<double> m,
                std::span<double> v, long long t, double lr, double beta1, double beta2, double eps,
                double weight_decay);

// theta <- theta - alpha_r grad_r + alpha_f grad_f across a parameter set.
void grad_difference_step(std::vector<ParamRef>& params, const Grads& grad_r, const Grads& grad_f,
                          double alpha_r, double alpha_f);

struct ObjectiveGrads {
    Grads grad_r;         // gradient_difference (alpha_r > 0) and combined ingredients
    Grads grad_f;         // gradient_difference (alpha_f > 0) and pure ascent
    Grads grad_combined;  // combined mode: grad(L_r - lambda L_f)
    double loss_retain;
    double loss_forget;
    std::vector<std::vector<double>> forget_logits;
    std::vector<int> forget_labels;

    ObjectiveGrads();
};

// Mean cross-entropy gradients over each batch the mode uses. Batches the
// mode requires must be non-empty.
ObjectiveGrads compute_objective_grads(TrainableModel& model, const std::vector<Example>& retain_batch,
                                       const std::vector<Example>& forget_batch, ObjectiveMode mode,
                                       double lambda, double alpha_r, double alpha_f);

enum class RunOutcome { Completed, GuardHalt, NumericDivergence };

struct UnlearnSession {
    TrainableModel* model = nullptr;  // not owned
    const Dataset* retain = nullptr;
    const Dataset* forget = nullptr;  // may be null when the mode never samples it
    TrainConfig config;
    DiagnosticsConfig diagnostics;
    OptState opt_state;
    std::vector<TraceRecord> history;
};

struct UnlearnResult {
    RunOutcome outcome = RunOutcome::Completed;
    int iterations_run = 0;
    int event_iter = -1;  // guard/numeric event iteration, -1 if none
};

// Seeded batches with replacement (retain and forget from independent
// substreams), gradient computation, the configured optimizer step, a trace
// record per iteration, and the divergence guard.
UnlearnResult run_unlearning(UnlearnSession& session);

}  // namespace bpu
