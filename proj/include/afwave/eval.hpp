// Confusion-matrix bookkeeping, the five classification metrics, and the
// k-fold / leave-one-subject-out split protocols. AF is the positive class.
#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "afwave/common.hpp"

namespace afwave {

struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    void add(bool predicted_positive, bool actually_positive) {
        if (predicted_positive && actually_positive)
            ++tp;
        else if (predicted_positive && !actually_positive)
            ++fp;
        else if (!predicted_positive && actually_positive)
            ++fn;
        else
            ++tn;
    }

    std::uint64_t total() const { return tp + fp + tn + fn; }

    ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
        tp += o.tp;
        fp += o.fp;
        tn += o.tn;
        fn += o.fn;
        return *this;
    }
};

// Metrics with zero denominators are reported as absent, never as 0 or 1.
struct Metrics {
    std::optional<double> accuracy;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> specificity;
    std::optional<double> f1;
};

inline Metrics metrics(const ConfusionMatrix& cm) {
    Metrics m;
    const double tp = static_cast<double>(cm.tp), fp = static_cast<double>(cm.fp);
    const double tn = static_cast<double>(cm.tn), fn = static_cast<double>(cm.fn);
    if (cm.total() > 0) m.accuracy = (tp + tn) / (tp + tn + fp + fn);
    if (cm.tp + cm.fp > 0) m.precision = tp / (tp + fp);
    if (cm.tp + cm.fn > 0) m.recall = tp / (tp + fn);
    if (cm.tn + cm.fp > 0) m.specificity = tn / (tn + fp);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
        m.f1 = 2.0 * (*m.precision) * (*m.recall) / (*m.precision + *m.recall);
    return m;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
    return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

inline nlohmann::json to_json(const Metrics& m) {
    auto field = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json();
    };
    return {{"accuracy", field(m.accuracy)},
            {"precision", field(m.precision)},
            {"recall", field(m.recall)},
            {"specificity", field(m.specificity)},
            {"f1", field(m.f1)}};
}

inline std::string metric_text(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", *v);
    return buf;
}

enum class FoldMode { RecordKFold, LeaveOneSubjectOut };

struct FoldPlan {
    int k = 0;
    FoldMode mode = FoldMode::RecordKFold;
    std::uint64_t seed = 0;
    std::vector<int> assignment; // record index -> fold id
};

// Stratified-by-label record-level folds: labels are shuffled within class
// and dealt round-robin, so fold sizes differ by at most one and no fold
// collapses to a single class (when both classes have >= k records).
inline FoldPlan kfold_plan(const std::vector<int>& labels, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold: k must be >= 2");
    if (static_cast<std::size_t>(k) > labels.size())
        throw ConfigError("kfold: k exceeds dataset size");
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.assign(labels.size(), -1);

    std::map<int, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

    Rng rng = fork_rng(seed, 0xf01d5u);
    int next_fold = 0;
    for (auto& [label, idx] : by_label) {
        (void)label;
        for (std::size_t i = idx.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
            std::swap(idx[i - 1], idx[j]);
        }
        for (std::size_t i = 0; i < idx.size(); ++i) {
            plan.assignment[idx[i]] = next_fold;
            next_fold = (next_fold + 1) % k;
        }
    }
    return plan;
}

// Subject-atomic folds: every record of a subject lands in the same fold.
inline FoldPlan subject_fold_plan(const std::vector<std::string>& subjects,
                                  std::uint64_t seed) {
    FoldPlan plan;
    plan.mode = FoldMode::LeaveOneSubjectOut;
    plan.seed = seed;
    plan.assignment.assign(subjects.size(), -1);
    std::map<std::string, int> fold_of;
    int next = 0;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        auto [it, inserted] = fold_of.try_emplace(subjects[i], next);
        if (inserted) ++next;
        plan.assignment[i] = it->second;
    }
    plan.k = next;
    return plan;
}

struct FoldOutcome {
    ConfusionMatrix per_fold_cm;
    int fold = 0;
};

struct EvaluationSummary {
    std::vector<FoldOutcome> folds;
    ConfusionMatrix accumulated;
    Metrics accumulated_metrics;
};

inline EvaluationSummary summarize(std::vector<FoldOutcome> folds) {
    EvaluationSummary s;
    s.folds = std::move(folds);
    for (const auto& f : s.folds) s.accumulated += f.per_fold_cm;
    s.accumulated_metrics = metrics(s.accumulated);
    return s;
}

} // namespace afwave
