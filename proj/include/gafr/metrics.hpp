#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "gafr/array.hpp"
#include "gafr/errors.hpp"

namespace gafr {

// Binary problems fix class 1 as the positive class (the benign-0 /
// malignant-1 convention); multiclass metrics macro-average one-vs-rest.

namespace detail {

inline std::vector<std::vector<long long>> confusion_matrix(const std::vector<int>& pred,
                                                            const std::vector<int>& labels,
                                                            int num_classes) {
    if (pred.size() != labels.size())
        throw DimensionError("confusion: pred/labels size mismatch");
    std::vector<std::vector<long long>> m(num_classes, std::vector<long long>(num_classes, 0));
    for (size_t i = 0; i < pred.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes || pred[i] < 0 || pred[i] >= num_classes)
            throw ConfigError("confusion: class index out of range");
        ++m[labels[i]][pred[i]];
    }
    return m;
}

// Mann-Whitney AUC for one one-vs-rest problem via midranks; ties count half.
inline double auc_binary(const std::vector<double>& score, const std::vector<bool>& positive) {
    size_t n = score.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return score[a] < score[b]; });
    std::vector<double> rank(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && score[order[j + 1]] == score[order[i]]) ++j;
        double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double rank_pos = 0.0;
    long long p = 0, q = 0;
    for (size_t k = 0; k < n; ++k) {
        if (positive[k]) {
            rank_pos += rank[k];
            ++p;
        } else {
            ++q;
        }
    }
    if (p == 0 || q == 0) throw ConfigError("auc: need at least one positive and one negative");
    return (rank_pos - 0.5 * static_cast<double>(p) * (p + 1)) /
           (static_cast<double>(p) * static_cast<double>(q));
}

}  // namespace detail

// scores: N x num_classes (class score/probability columns). Binary uses the
// class-1 column; multiclass macro-averages one-vs-rest AUCs, skipping (with
// a warning) classes absent from the labels.
inline double auc_roc(const Array2& scores, const std::vector<int>& labels, int num_classes,
                      std::vector<std::string>* warnings = nullptr) {
    if (scores.rows != static_cast<int>(labels.size()))
        throw DimensionError("auc_roc: scores/labels size mismatch");
    if (scores.cols < num_classes)
        throw DimensionError("auc_roc: scores must have one column per class");
    int n = scores.rows;
    if (num_classes == 2) {
        std::vector<double> s(n);
        std::vector<bool> pos(n);
        for (int i = 0; i < n; ++i) {
            s[i] = scores.at(i, 1);
            pos[i] = labels[i] == 1;
        }
        return detail::auc_binary(s, pos);
    }
    double total = 0.0;
    int evaluated = 0;
    for (int c = 0; c < num_classes; ++c) {
        long long present = std::count(labels.begin(), labels.end(), c);
        if (present == 0 || present == n) {
            if (warnings)
                warnings->push_back("auc_roc: class " + std::to_string(c) +
                                    (present == 0 ? " absent from labels, skipped"
                                                  : " has no negatives, skipped"));
            continue;
        }
        std::vector<double> s(n);
        std::vector<bool> pos(n);
        for (int i = 0; i < n; ++i) {
            s[i] = scores.at(i, c);
            pos[i] = labels[i] == c;
        }
        total += detail::auc_binary(s, pos);
        ++evaluated;
    }
    if (evaluated == 0) throw ConfigError("auc_roc: no class is evaluable");
    return total / evaluated;
}

// Unweighted mean of per-class recall over classes present in the labels.
inline double balanced_accuracy(const std::vector<int>& pred, const std::vector<int>& labels,
                                int num_classes) {
    auto m = detail::confusion_matrix(pred, labels, num_classes);
    double total = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        long long support = std::accumulate(m[c].begin(), m[c].end(), 0LL);
        if (support == 0) continue;
        total += static_cast<double>(m[c][c]) / static_cast<double>(support);
        ++present;
    }
    if (present == 0) throw ConfigError("balanced_accuracy: empty evaluation set");
    return total / present;
}

// Binary: F1 of class 1. Multiclass: macro average over all classes, with
// zero-denominator per-class F1 defined as 0.
inline double f1_score(const std::vector<int>& pred, const std::vector<int>& labels,
                       int num_classes) {
    auto m = detail::confusion_matrix(pred, labels, num_classes);
    auto class_f1 = [&](int c) {
        long long tp = m[c][c], fp = 0, fn = 0;
        for (int o = 0; o < num_classes; ++o)
            if (o != c) {
                fp += m[o][c];
                fn += m[c][o];
            }
        long long denom = 2 * tp + fp + fn;
        if (denom == 0) return 0.0;
        return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    };
    if (num_classes == 2) return class_f1(1);
    double total = 0.0;
    for (int c = 0; c < num_classes; ++c) total += class_f1(c);
    return total / num_classes;
}

// Cohen's kappa from the marginals; the degenerate p_e = 1 case is 1.0 under
// total agreement and 0.0 otherwise.
inline double kappa(const std::vector<int>& pred, const std::vector<int>& labels) {
    int num_classes = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        num_classes = std::max({num_classes, pred[i] + 1, labels[i] + 1});
    auto m = detail::confusion_matrix(pred, labels, num_classes);
    double n = static_cast<double>(pred.size());
    if (n == 0.0) throw ConfigError("kappa: empty evaluation set");
    double po = 0.0, pe = 0.0;
    for (int c = 0; c < num_classes; ++c) {
        po += static_cast<double>(m[c][c]);
        long long row = std::accumulate(m[c].begin(), m[c].end(), 0LL);
        long long col = 0;
        for (int o = 0; o < num_classes; ++o) col += m[o][c];
        pe += static_cast<double>(row) * static_cast<double>(col);
    }
    po /= n;
    pe /= n * n;
    if (pe == 1.0) return po == 1.0 ? 1.0 : 0.0;
    return (po - pe) / (1.0 - pe);
}

// Binary: TPR and TNR of class 1. Multiclass: macro one-vs-rest averages of
// recall and true-negative rate over classes present in the labels.
inline std::pair<double, double> sens_spec(const std::vector<int>& pred,
                                           const std::vector<int>& labels, int num_classes) {
    auto m = detail::confusion_matrix(pred, labels, num_classes);
    long long n = static_cast<long long>(pred.size());
    auto rates = [&](int c) -> std::pair<double, double> {
        long long tp = m[c][c];
        long long support = std::accumulate(m[c].begin(), m[c].end(), 0LL);
        long long fn = support - tp;
        long long fp = 0;
        for (int o = 0; o < num_classes; ++o)
            if (o != c) fp += m[o][c];
        long long tn = n - tp - fn - fp;
        double sens = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
        double spec = (tn + fp) == 0 ? 0.0 : static_cast<double>(tn) / static_cast<double>(tn + fp);
        return {sens, spec};
    };
    if (num_classes == 2) return rates(1);
    double sens = 0.0, spec = 0.0;
    int present = 0;
    for (int c = 0; c < num_classes; ++c) {
        long long support = std::accumulate(m[c].begin(), m[c].end(), 0LL);
        if (support == 0) continue;
        auto [se, sp] = rates(c);
        sens += se;
        spec += sp;
        ++present;
    }
    if (present == 0) throw ConfigError("sens_spec: empty evaluation set");
    return {sens / present, spec / present};
}

struct PerClassStats {
    int cls = 0;
    long long support = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct EvalReport {
    double auc_roc = 0.0;
    double balanced_accuracy = 0.0;
    double f1 = 0.0;
    double kappa = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    std::vector<std::vector<long long>> confusion;  // [label][pred]
    std::vector<PerClassStats> per_class;
    std::vector<std::string> warnings;
};

inline EvalReport evaluate(const Array2& scores, const std::vector<int>& pred,
                           const std::vector<int>& labels, int num_classes) {
    EvalReport r;
    r.auc_roc = auc_roc(scores, labels, num_classes, &r.warnings);
    r.balanced_accuracy = balanced_accuracy(pred, labels, num_classes);
    r.f1 = f1_score(pred, labels, num_classes);
    r.kappa = kappa(pred, labels);
    std::tie(r.sensitivity, r.specificity) = sens_spec(pred, labels, num_classes);
    r.confusion = detail::confusion_matrix(pred, labels, num_classes);
    for (int c = 0; c < num_classes; ++c) {
        PerClassStats pc;
        pc.cls = c;
        pc.support = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), 0LL);
        long long tp = r.confusion[c][c], fp = 0;
        for (int o = 0; o < num_classes; ++o)
            if (o != c) fp += r.confusion[o][c];
        pc.recall = pc.support == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pc.support);
        pc.precision = (tp + fp) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        pc.f1 = (2 * tp + fp + (pc.support - tp)) == 0
                    ? 0.0
                    : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + (pc.support - tp));
        r.per_class.push_back(pc);
    }
    return r;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // population
};

inline MeanStd aggregate(const std::vector<double>& xs) {
    MeanStd out;
    if (xs.empty()) return out;
    for (double x : xs) out.mean += x;
    out.mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(var / static_cast<double>(xs.size()));
    return out;
}

}  // namespace gafr
