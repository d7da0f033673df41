#pragma once

#include <tuple>

#include "bpu/dataset.hpp"
#include "bpu/nnet.hpp"
#include "bpu/unlearn.hpp"

namespace bpu {

struct SplitSpec {
    double forget_fraction = 0.1;
    double holdout_fraction = 0.2;
    uint64_t seed = 0;
};

// Desk-scale stand-ins for the benchmark metrics of one unlearning run.
struct EvalReport {
    double forget_quality_proxy = 0.0;   // KS p-value in [0, 1]
    double model_utility_proxy = 0.0;    // harmonic mean of retain/holdout acc
    double membership_attack_acc = 0.5;  // in [0.5, 1] after flipping
    double retain_acc = 0.0;
    double forget_acc = 0.0;
    double holdout_acc = 0.0;
    double forget_loss_mean = 0.0;
};

// C Gaussian clusters with seeded centers on a sphere of radius 4*spread and
// per-cluster stddev spread; labels balanced round-robin.
Dataset gen_blobs(RngStream& stream, int n, int num_classes, int dim, double spread);

// Pure-memorization task: standard Gaussian inputs, labels uniform and
// independent of the inputs.
Dataset gen_random_label(RngStream& stream, int n, int num_classes, int dim);

// Seeded permutation, then a contiguous cut: first floor(n*forget) examples
// to forget, next floor(n*holdout) to holdout, the remainder to retain.
std::tuple<Dataset, Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec);

// Plain supervised training on the retain set only (the retain-only reference
// the forget-quality proxy compares against). config must have alpha_f == 0.
// Results are cached per (data spec, config, model seed); cache hits return a
// clone of the cached parameters.
std::unique_ptr<TrainableModel> train_reference(const Dataset& retain, const TrainableModel& model_template,
                                                const TrainConfig& config);
void clear_reference_cache();

// sup |ECDF1 - ECDF2| via the sorted two-pointer sweep; ties advance both
// pointers through equal values before measuring.
double ks_statistic(std::span<const double> s1, std::span<const double> s2);

// Asymptotic two-sample p-value: lambda = d (sqrt(m) + 0.12 + 0.11/sqrt(m))
// with m = n1 n2/(n1+n2); p = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2),
// truncated at terms < 1e-12 and clamped to [0, 1].
double ks_pvalue(double d, int n1, int n2);

// KS p-value between the two models' per-example log p_y on the forget set;
// high means the unlearned model is indistinguishable from the reference.
double forget_quality_proxy(const TrainableModel& unlearned, const TrainableModel& reference,
                            const Dataset& forget);

double accuracy(const TrainableModel& model, const Dataset& ds);

// Harmonic mean of retain and holdout accuracy; 0 if either is 0.
double model_utility_proxy(const TrainableModel& model, const Dataset& retain, const Dataset& holdout);

// Best balanced accuracy over all loss thresholds, taken against its
// label-flipped complement so the result lies in [0.5, 1].
double membership_attack_acc(const TrainableModel& model, const Dataset& forget_members,
                             const Dataset& holdout_nonmembers);

EvalReport make_eval_report(const TrainableModel& model, const TrainableModel& reference,
                            const Dataset& retain, const Dataset& forget, const Dataset& holdout);

}  // namespace bpu
