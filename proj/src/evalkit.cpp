#include "bpu/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace bpu {

Dataset gen_blobs(RngStream& stream, int n, int num_classes, int dim, double spread) {
    require(n >= num_classes, "gen_blobs: need n >= num_classes");
    require(num_classes >= 2 && dim >= 1, "gen_blobs: need num_classes >= 2 and dim >= 1");
    require(spread > 0.0, "gen_blobs: spread must be > 0");

    Dataset ds;
    ds.spec = {"blobs", n, num_classes, dim, spread, stream.state()};

    // Seeded centers on a sphere of radius 4*spread.
    std::vector<std::vector<double>> centers;
    for (int c = 0; c < num_classes; ++c) {
        std::vector<double> dir(static_cast<size_t>(dim));
        for (double& v : dir) v = stream.next_gaussian();
        double nrm = norm2(dir);
        if (nrm == 0.0) {
            dir[0] = 1.0;
            nrm = 1.0;
        }
        for (double& v : dir) v *= 4.0 * spread / nrm;
        centers.push_back(std::move(dir));
    }

    ds.inputs.reserve(static_cast<size_t>(n));
    ds.labels.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int label = i % num_classes;  // balanced round-robin
        std::vector<double> x(static_cast<size_t>(dim));
        for (size_t j = 0; j < x.size(); ++j)
            x[j] = centers[static_cast<size_t>(label)][j] + spread * stream.next_gaussian();
        ds.inputs.push_back(std::move(x));
        ds.labels.push_back(label);
    }
    return ds;
}

Dataset gen_random_label(RngStream& stream, int n, int num_classes, int dim) {
    require(n >= 1, "gen_random_label: need n >= 1");
    require(num_classes >= 2 && dim >= 1, "gen_random_label: need num_classes >= 2 and dim >= 1");
    Dataset ds;
    ds.spec = {"random_label", n, num_classes, dim, 1.0, stream.state()};
    ds.inputs.reserve(static_cast<size_t>(n));
    ds.labels.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::vector<double> x(static_cast<size_t>(dim));
        for (double& v : x) v = stream.next_gaussian();
        ds.inputs.push_back(std::move(x));
        ds.labels.push_back(stream.next_index(num_classes));
    }
    return ds;
}

std::tuple<Dataset, Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
    require(spec.forget_fraction > 0.0 && spec.forget_fraction < 1.0, "split: forget_fraction out of (0,1)");
    require(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0, "split: holdout_fraction out of (0,1)");
    require(spec.forget_fraction + spec.holdout_fraction < 1.0, "split: fractions must sum below 1");

    const size_t n = dataset.size();
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream stream = RngStream::substream(spec.seed, 0x5B117);
    for (size_t i = n; i > 1; --i) {  // Fisher-Yates with the seeded stream
        const size_t j = static_cast<size_t>(stream.next_index(static_cast<int>(i)));
        std::swap(perm[i - 1], perm[j]);
    }

    const size_t n_forget = static_cast<size_t>(std::floor(static_cast<double>(n) * spec.forget_fraction));
    const size_t n_holdout = static_cast<size_t>(std::floor(static_cast<double>(n) * spec.holdout_fraction));

    auto take = [&](size_t begin, size_t count, const char* tag) {
        Dataset out;
        out.spec = dataset.spec;
        out.spec.kind += std::string(".") + tag;
        out.inputs.reserve(count);
        out.labels.reserve(count);
        for (size_t i = begin; i < begin + count; ++i) {
            out.inputs.push_back(dataset.inputs[perm[i]]);
            out.labels.push_back(dataset.labels[perm[i]]);
        }
        return out;
    };

    Dataset forget = take(0, n_forget, "forget");
    Dataset holdout = take(n_forget, n_holdout, "holdout");
    Dataset retain = take(n_forget + n_holdout, n - n_forget - n_holdout, "retain");
    return {std::move(retain), std::move(forget), std::move(holdout)};
}

namespace {

std::map<std::string, std::unique_ptr<TrainableModel>>& reference_cache() {
    static std::map<std::string, std::unique_ptr<TrainableModel>> cache;
    return cache;
}

std::string reference_key(const Dataset& retain, const TrainConfig& cfg) {
    std::ostringstream os;
    os << retain.spec.kind << "|" << retain.spec.n << "|" << retain.spec.num_classes << "|" << retain.spec.dim
       << "|" << retain.spec.noise << "|" << retain.spec.seed << "|" << retain.size() << "|" << cfg.seed << "|"
       << cfg.learning_rate << "|" << cfg.batch_size << "|" << cfg.iterations << "|"
       << static_cast<int>(cfg.optimizer.kind) << "|" << cfg.optimizer.weight_decay;
    return os.str();
}

double example_loss(const TrainableModel& model, const Example& ex) {
    const auto z = model.predict_logits(ex.x);
    return cross_entropy(softmax(z), ex.y);
}

double log_prob_true_class(const TrainableModel& model, const Example& ex) {
    const auto z = model.predict_logits(ex.x);
    return -cross_entropy(softmax(z), ex.y);
}

double balanced_accuracy_at(const std::vector<double>& member_losses,
                            const std::vector<double>& nonmember_losses, double threshold) {
    // Rule: predict "member" when loss <= threshold (members memorized, low loss).
    double tp = 0.0, tn = 0.0;
    for (double v : member_losses) tp += (v <= threshold) ? 1.0 : 0.0;
    for (double v : nonmember_losses) tn += (v > threshold) ? 1.0 : 0.0;
    return 0.5 * (tp / static_cast<double>(member_losses.size()) +
                  tn / static_cast<double>(nonmember_losses.size()));
}

}  // namespace

std::unique_ptr<TrainableModel> train_reference(const Dataset& retain, const TrainableModel& model_template,
                                                const TrainConfig& config) {
    require(config.alpha_f == 0.0, "train_reference: config must be plain supervised (alpha_f == 0)");
    require(retain.size() > 0, "train_reference: empty retain set");

    const std::string key = reference_key(retain, config);
    auto& cache = reference_cache();
    if (auto it = cache.find(key); it != cache.end()) return it->second->clone();

    std::unique_ptr<TrainableModel> model = model_template.clone();
    UnlearnSession session;
    session.model = model.get();
    session.retain = &retain;
    session.forget = nullptr;  // the reference never sees forget data
    session.config = config;
    const UnlearnResult result = run_unlearning(session);
    if (result.outcome != RunOutcome::Completed)
        throw NumericEvent("train_reference: reference training diverged", result.event_iter);

    cache[key] = model->clone();
    return model;
}

void clear_reference_cache() { reference_cache().clear(); }

double ks_statistic(std::span<const double> s1, std::span<const double> s2) {
    require(!s1.empty() && !s2.empty(), "ks_statistic: empty sample");
    std::vector<double> a(s1.begin(), s1.end());
    std::vector<double> b(s2.begin(), s2.end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());

    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;  // advance through ties on both sides
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_pvalue(double d, int n1, int n2) {
    require(d >= 0.0 && d <= 1.0, "ks_pvalue: d must lie in [0,1]");
    require(n1 >= 1 && n2 >= 1, "ks_pvalue: sample sizes must be >= 1");
    const double m = static_cast<double>(n1) * n2 / (static_cast<double>(n1) + n2);
    const double sm = std::sqrt(m);
    const double lambda = d * (sm + 0.12 + 0.11 / sm);
    double p = 0.0;
    double sign = 1.0;
    for (int j = 1; j <= 1000; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        p += sign * term;
        if (term < 1e-12) break;
        sign = -sign;
    }
    p *= 2.0;
    return std::clamp(p, 0.0, 1.0);
}

double forget_quality_proxy(const TrainableModel& unlearned, const TrainableModel& reference,
                            const Dataset& forget) {
    require(forget.size() > 0, "forget_quality_proxy: empty forget set");
    std::vector<double> s1, s2;
    s1.reserve(forget.size());
    s2.reserve(forget.size());
    for (size_t i = 0; i < forget.size(); ++i) {
        s1.push_back(log_prob_true_class(unlearned, forget.example(i)));
        s2.push_back(log_prob_true_class(reference, forget.example(i)));
    }
    const double d = ks_statistic(s1, s2);
    return ks_pvalue(d, static_cast<int>(forget.size()), static_cast<int>(forget.size()));
}

double accuracy(const TrainableModel& model, const Dataset& ds) {
    require(ds.size() > 0, "accuracy: empty dataset");
    size_t correct = 0;
    for (size_t i = 0; i < ds.size(); ++i) {
        const auto z = model.predict_logits(ds.inputs[i]);
        const auto it = std::max_element(z.begin(), z.end());
        if (static_cast<int>(it - z.begin()) == ds.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

double model_utility_proxy(const TrainableModel& model, const Dataset& retain, const Dataset& holdout) {
    const double ra = accuracy(model, retain);
    const double ha = accuracy(model, holdout);
    if (ra == 0.0 || ha == 0.0) return 0.0;
    return 2.0 * ra * ha / (ra + ha);
}

double membership_attack_acc(const TrainableModel& model, const Dataset& forget_members,
                             const Dataset& holdout_nonmembers) {
    require(forget_members.size() > 0 && holdout_nonmembers.size() > 0,
            "membership_attack_acc: empty member or nonmember set");
    std::vector<double> member_losses, nonmember_losses;
    for (size_t i = 0; i < forget_members.size(); ++i)
        member_losses.push_back(example_loss(model, forget_members.example(i)));
    for (size_t i = 0; i < holdout_nonmembers.size(); ++i)
        nonmember_losses.push_back(example_loss(model, holdout_nonmembers.example(i)));

    // Candidate thresholds: below everything, every distinct loss value, and
    // the result is flip-symmetrized so it always lands in [0.5, 1].
    std::vector<double> merged = member_losses;
    merged.insert(merged.end(), nonmember_losses.begin(), nonmember_losses.end());
    std::sort(merged.begin(), merged.end());
    merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

    double best = 0.5;
    auto consider = [&](double threshold) {
        const double acc = balanced_accuracy_at(member_losses, nonmember_losses, threshold);
        best = std::max(best, std::max(acc, 1.0 - acc));
    };
    consider(-std::numeric_limits<double>::infinity());
    for (double v : merged) consider(v);
    return best;
}

EvalReport make_eval_report(const TrainableModel& model, const TrainableModel& reference,
                            const Dataset& retain, const Dataset& forget, const Dataset& holdout) {
    EvalReport rep;
    rep.retain_acc = accuracy(model, retain);
    rep.forget_acc = accuracy(model, forget);
    rep.holdout_acc = accuracy(model, holdout);
    rep.model_utility_proxy = model_utility_proxy(model, retain, holdout);
    rep.forget_quality_proxy = forget_quality_proxy(model, reference, forget);
    rep.membership_attack_acc = membership_attack_acc(model, forget, holdout);
    double loss_sum = 0.0;
    for (size_t i = 0; i < forget.size(); ++i) loss_sum += example_loss(model, forget.example(i));
    rep.forget_loss_mean = loss_sum / static_cast<double>(forget.size());
    return rep;
}

}  // namespace bpu
