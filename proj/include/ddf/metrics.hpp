#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddf/tensor.hpp"

namespace ddf {

struct ClassificationMetrics {
    double accuracy = 0.0;
    double f1_macro = 0.0;
    double f1_weighted = 0.0;
    double auc_macro = std::numeric_limits<double>::quiet_NaN();  // NaN when undefined
    std::vector<double> f1_per_class;
    std::vector<std::vector<long long>> confusion;  // entry (t, p)
};

struct RegressionMetrics {
    double mae = 0.0;
    double mse = 0.0;
    double rmse = 0.0;
    double smape = 0.0;
    double r2 = std::numeric_limits<double>::quiet_NaN();  // NaN when SS_tot = 0 or N < 2
};

inline std::vector<int> argmax_rows(const Tensor& probs) {
    if (probs.ndim() != 2) throw std::runtime_error("argmax_rows: expected [N,C]");
    std::vector<int> out;
    out.reserve(probs.shape[0]);
    for (int i = 0; i < probs.shape[0]; ++i) {
        int best = 0;
        for (int j = 1; j < probs.shape[1]; ++j) {
            if (probs.at(i, j) > probs.at(i, best)) best = j;
        }
        out.push_back(best);
    }
    return out;
}

inline std::vector<std::vector<long long>> confusion_counts(const std::vector<int>& preds, const std::vector<int>& targets, int num_classes) {
    if (preds.size() != targets.size()) throw std::runtime_error("confusion_counts: length mismatch");
    std::vector<std::vector<long long>> m(num_classes, std::vector<long long>(num_classes, 0));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (targets[i] < 0 || targets[i] >= num_classes || preds[i] < 0 || preds[i] >= num_classes) {
            throw std::runtime_error("confusion_counts: class id out of range");
        }
        ++m[targets[i]][preds[i]];
    }
    return m;
}

// argmax predictions; per-class F1 with 0/0 -> 0; macro = unweighted mean,
// weighted = support-weighted mean. auc_macro is filled separately.
inline ClassificationMetrics classification_report(const Tensor& pred_probs, const std::vector<int>& targets) {
    if (pred_probs.ndim() != 2 || static_cast<int>(targets.size()) != pred_probs.shape[0]) {
        throw std::runtime_error("classification_report: need one target per probability row");
    }
    for (int i = 0; i < pred_probs.shape[0]; ++i) {
        double s = 0.0;
        for (int j = 0; j < pred_probs.shape[1]; ++j) s += pred_probs.at(i, j);
        if (std::abs(s - 1.0) > 1e-6) throw std::runtime_error("classification_report: probability row does not sum to 1");
    }
    const int c = pred_probs.shape[1];
    const std::vector<int> preds = argmax_rows(pred_probs);

    ClassificationMetrics r;
    r.confusion = confusion_counts(preds, targets, c);

    long long correct = 0;
    const long long n = static_cast<long long>(targets.size());
    for (int k = 0; k < c; ++k) correct += r.confusion[k][k];
    r.accuracy = static_cast<double>(correct) / static_cast<double>(n);

    double macro = 0.0, weighted = 0.0;
    for (int k = 0; k < c; ++k) {
        long long tp = r.confusion[k][k], support = 0, predicted = 0;
        for (int j = 0; j < c; ++j) {
            support += r.confusion[k][j];
            predicted += r.confusion[j][k];
        }
        const double precision = predicted > 0 ? static_cast<double>(tp) / predicted : 0.0;
        const double recall = support > 0 ? static_cast<double>(tp) / support : 0.0;
        const double f1 = (precision + recall) > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        r.f1_per_class.push_back(f1);
        macro += f1;
        weighted += f1 * static_cast<double>(support);
    }
    r.f1_macro = macro / c;
    r.f1_weighted = weighted / static_cast<double>(n);
    return r;
}

// One-vs-rest AUC per class by the pairwise ranking count (ties 0.5),
// macro-averaged. Classes lacking a positive or a negative are skipped and
// collected into `skipped` when provided.
inline double auc_macro(const Tensor& scores, const std::vector<int>& targets, std::vector<int>* skipped = nullptr) {
    if (scores.ndim() != 2 || static_cast<int>(targets.size()) != scores.shape[0]) {
        throw std::runtime_error("auc_macro: need one target per score row");
    }
    const int n = scores.shape[0], c = scores.shape[1];
    double total = 0.0;
    int used = 0;
    for (int k = 0; k < c; ++k) {
        std::vector<double> pos, neg;
        for (int i = 0; i < n; ++i) (targets[i] == k ? pos : neg).push_back(scores.at(i, k));
        if (pos.empty() || neg.empty()) {
            if (skipped) skipped->push_back(k);
            continue;
        }
        double wins = 0.0;
        for (double p : pos) {
            for (double q : neg) {
                if (p > q) wins += 1.0;
                else if (p == q) wins += 0.5;
            }
        }
        total += wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
        ++used;
    }
    if (used == 0) throw std::runtime_error("auc_macro: all classes degenerate");
    return total / used;
}

inline ClassificationMetrics full_classification_report(const Tensor& pred_probs, const std::vector<int>& targets) {
    ClassificationMetrics r = classification_report(pred_probs, targets);
    try {
        r.auc_macro = auc_macro(pred_probs, targets);
    } catch (const std::runtime_error&) {
        // degenerate label set; auc stays NaN
    }
    return r;
}

inline RegressionMetrics regression_report(const std::vector<double>& pred, const std::vector<double>& target) {
    if (pred.size() != target.size()) throw std::runtime_error("regression_report: length mismatch");
    if (pred.empty()) throw std::runtime_error("regression_report: empty input");
    const std::size_t n = pred.size();

    RegressionMetrics r;
    double abs_sum = 0.0, sq_sum = 0.0, smape_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = pred[i] - target[i];
        abs_sum += std::abs(e);
        sq_sum += e * e;
        const double denom = (std::abs(target[i]) + std::abs(pred[i])) / 2.0;
        if (denom > 0.0) smape_sum += std::abs(e) / denom;  // 0/0 counts as 0
    }
    r.mae = abs_sum / n;
    r.mse = sq_sum / n;
    r.rmse = std::sqrt(r.mse);
    r.smape = 100.0 * smape_sum / n;

    if (n >= 2) {
        double mean = 0.0;
        for (double t : target) mean += t;
        mean /= static_cast<double>(n);
        double ss_tot = 0.0;
        for (double t : target) ss_tot += (t - mean) * (t - mean);
        if (ss_tot > 0.0) r.r2 = 1.0 - sq_sum / ss_tot;
    }
    return r;
}

// Largest pairwise difference per metric across groups, NaN entries ignored.
inline std::map<std::string, double> metric_gaps(const std::map<std::string, std::map<std::string, double>>& per_group) {
    std::map<std::string, double> gaps;
    std::map<std::string, std::pair<double, double>> ranges;  // metric -> (min, max)
    for (const auto& [group, metrics] : per_group) {
        for (const auto& [name, value] : metrics) {
            if (std::isnan(value)) continue;
            auto it = ranges.find(name);
            if (it == ranges.end()) {
                ranges[name] = {value, value};
            } else {
                it->second.first = std::min(it->second.first, value);
                it->second.second = std::max(it->second.second, value);
            }
        }
    }
    for (const auto& [name, mm] : ranges) gaps[name] = mm.second - mm.first;
    return gaps;
}

struct GroupedClassification {
    std::map<std::string, ClassificationMetrics> by_group;
    std::map<std::string, double> max_gap;
    std::vector<std::string> skipped_groups;  // fewer than 2 samples
};

struct GroupedRegression {
    std::map<std::string, RegressionMetrics> by_group;
    std::map<std::string, double> max_gap;
    std::vector<std::string> skipped_groups;
};

namespace detail {
inline std::map<std::string, std::vector<int>> group_indices(const std::vector<std::string>& groups, std::size_t n, std::vector<std::string>* skipped) {
    if (groups.size() != n) throw std::runtime_error("group_report: group ids not aligned with samples");
    std::map<std::string, std::vector<int>> by;
    for (std::size_t i = 0; i < n; ++i) by[groups[i]].push_back(static_cast<int>(i));
    for (auto it = by.begin(); it != by.end();) {
        if (it->second.size() < 2) {
            if (skipped) skipped->push_back(it->first);
            it = by.erase(it);
        } else {
            ++it;
        }
    }
    return by;
}
}  // namespace detail

inline GroupedClassification group_classification_report(const Tensor& pred_probs, const std::vector<int>& targets, const std::vector<std::string>& groups) {
    GroupedClassification out;
    auto by = detail::group_indices(groups, targets.size(), &out.skipped_groups);
    std::map<std::string, std::map<std::string, double>> flat;
    for (const auto& [g, idx] : by) {
        Tensor sub = Tensor::zeros({static_cast<int>(idx.size()), pred_probs.shape[1]});
        std::vector<int> sub_t;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (int j = 0; j < pred_probs.shape[1]; ++j) sub.set(static_cast<int>(i), j, pred_probs.at(idx[i], j));
            sub_t.push_back(targets[idx[i]]);
        }
        ClassificationMetrics m = full_classification_report(sub, sub_t);
        out.by_group[g] = m;
        flat[g] = {{"accuracy", m.accuracy}, {"f1_macro", m.f1_macro}, {"f1_weighted", m.f1_weighted}, {"auc_macro", m.auc_macro}};
    }
    out.max_gap = metric_gaps(flat);
    return out;
}

inline GroupedRegression group_regression_report(const std::vector<double>& pred, const std::vector<double>& target, const std::vector<std::string>& groups) {
    GroupedRegression out;
    auto by = detail::group_indices(groups, target.size(), &out.skipped_groups);
    std::map<std::string, std::map<std::string, double>> flat;
    for (const auto& [g, idx] : by) {
        std::vector<double> p, t;
        for (int i : idx) {
            p.push_back(pred[i]);
            t.push_back(target[i]);
        }
        RegressionMetrics m = regression_report(p, t);
        out.by_group[g] = m;
        flat[g] = {{"mae", m.mae}, {"mse", m.mse}, {"rmse", m.rmse}, {"smape", m.smape}, {"r2", m.r2}};
    }
    out.max_gap = metric_gaps(flat);
    return out;
}

}  // namespace ddf
