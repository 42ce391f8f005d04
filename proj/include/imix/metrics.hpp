#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "imix/error.hpp"
#include "imix/tensor.hpp"
#include "imix/types.hpp"

namespace imix {

struct Metrics {
    double accuracy = 0.0;
    double auroc = 0.0;   // binary: standard; multiclass: one-vs-rest macro
    double micro_f1 = 0.0;
    double macro_f1 = 0.0;
    double mse = 0.0;     // regression only
    std::vector<std::size_t> per_class_counts;
};

// Probability that a random positive outranks a random negative, with
// average ranks on ties. Returns 0.5 when one class is absent.
inline double auroc_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw ContractError("auroc: length mismatch");
    std::vector<std::size_t> idx(scores.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::size_t npos = 0, nneg = 0;
    for (int l : labels) (l ? npos : nneg)++;
    if (npos == 0 || nneg == 0) return 0.5;
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + j + 1);  // 1-based
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]]) rank_sum_pos += avg_rank;
        i = j;
    }
    return (rank_sum_pos - 0.5 * static_cast<double>(npos) * static_cast<double>(npos + 1)) /
           (static_cast<double>(npos) * static_cast<double>(nneg));
}

namespace detail {

struct Confusion {
    std::vector<double> tp, fp, fn;
    explicit Confusion(std::size_t c) : tp(c, 0.0), fp(c, 0.0), fn(c, 0.0) {}

    double micro_f1() const {
        double stp = 0.0, sfp = 0.0, sfn = 0.0;
        for (std::size_t c = 0; c < tp.size(); ++c) {
            stp += tp[c];
            sfp += fp[c];
            sfn += fn[c];
        }
        const double den = 2.0 * stp + sfp + sfn;
        return den > 0.0 ? 2.0 * stp / den : 0.0;
    }

    double macro_f1() const {
        double s = 0.0;
        for (std::size_t c = 0; c < tp.size(); ++c) {
            const double den = 2.0 * tp[c] + fp[c] + fn[c];
            s += den > 0.0 ? 2.0 * tp[c] / den : 0.0;
        }
        return s / static_cast<double>(tp.size());
    }
};

}  // namespace detail

// Scores: [n x C] logits (classification) or [n x 1] predictions
// (regression). Targets: class index / 0-1 matrix / real value per row.
inline Metrics compute_metrics(TaskKind task, const Tensor& scores, const Tensor& targets) {
    if (scores.rows() == 0) throw ContractError("metrics: empty split");
    if (scores.rows() != targets.rows()) throw ContractError("metrics: row mismatch");
    Metrics m;
    const std::size_t n = scores.rows();

    if (task == TaskKind::Regression) {
        double s = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            const double d = scores.at(r, 0) - targets.at(r, 0);
            s += d * d;
        }
        m.mse = s / static_cast<double>(n);
        return m;
    }

    const std::size_t C = scores.cols();
    m.per_class_counts.assign(C, 0);
    detail::Confusion conf(C);

    if (task == TaskKind::Multiclass) {
        std::size_t correct = 0;
        for (std::size_t r = 0; r < n; ++r) {
            std::size_t pred = 0;
            for (std::size_t c = 1; c < C; ++c)
                if (scores.at(r, c) > scores.at(r, pred)) pred = c;
            const std::size_t truth =
                targets.cols() == 1 ? static_cast<std::size_t>(targets.at(r, 0))
                                    : [&] {
                                          std::size_t t = 0;
                                          for (std::size_t c = 1; c < C; ++c)
                                              if (targets.at(r, c) > targets.at(r, t)) t = c;
                                          return t;
                                      }();
            m.per_class_counts[truth]++;
            if (pred == truth) {
                ++correct;
                conf.tp[truth] += 1.0;
            } else {
                conf.fp[pred] += 1.0;
                conf.fn[truth] += 1.0;
            }
        }
        m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
        // One-vs-rest macro AUROC over classes present in the split.
        double auc_sum = 0.0;
        std::size_t auc_classes = 0;
        for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> sc(n);
            std::vector<int> lb(n);
            std::size_t pos = 0;
            for (std::size_t r = 0; r < n; ++r) {
                sc[r] = scores.at(r, c);
                const std::size_t truth =
                    targets.cols() == 1 ? static_cast<std::size_t>(targets.at(r, 0)) : 0;
                lb[r] = truth == c ? 1 : 0;
                pos += static_cast<std::size_t>(lb[r]);
            }
            if (pos == 0 || pos == n) continue;
            auc_sum += auroc_binary(sc, lb);
            ++auc_classes;
        }
        m.auroc = auc_classes > 0 ? auc_sum / static_cast<double>(auc_classes) : 0.5;
        // Binary classification reports the single positive-class AUROC.
        if (C == 2 && auc_classes == 2) {
            std::vector<double> sc(n);
            std::vector<int> lb(n);
            for (std::size_t r = 0; r < n; ++r) {
                sc[r] = scores.at(r, 1);
                lb[r] = static_cast<std::size_t>(targets.at(r, 0)) == 1 ? 1 : 0;
            }
            m.auroc = auroc_binary(sc, lb);
        }
    } else {  // multilabel, threshold logits at 0
        std::size_t exact = 0;
        double auc_sum = 0.0;
        std::size_t auc_classes = 0;
        for (std::size_t c = 0; c < C; ++c) {
            std::vector<double> sc(n);
            std::vector<int> lb(n);
            std::size_t pos = 0;
            for (std::size_t r = 0; r < n; ++r) {
                const bool pred = scores.at(r, c) > 0.0;
                const bool truth = targets.at(r, c) > 0.5;
                if (pred && truth) conf.tp[c] += 1.0;
                else if (pred) conf.fp[c] += 1.0;
                else if (truth) conf.fn[c] += 1.0;
                if (truth) m.per_class_counts[c]++;
                sc[r] = scores.at(r, c);
                lb[r] = truth ? 1 : 0;
                pos += static_cast<std::size_t>(truth);
            }
            if (pos > 0 && pos < n) {
                auc_sum += auroc_binary(sc, lb);
                ++auc_classes;
            }
        }
        for (std::size_t r = 0; r < n; ++r) {
            bool ok = true;
            for (std::size_t c = 0; c < C; ++c)
                if ((scores.at(r, c) > 0.0) != (targets.at(r, c) > 0.5)) ok = false;
            if (ok) ++exact;
        }
        m.accuracy = static_cast<double>(exact) / static_cast<double>(n);
        m.auroc = auc_classes > 0 ? auc_sum / static_cast<double>(auc_classes) : 0.5;
    }
    m.micro_f1 = conf.micro_f1();
    m.macro_f1 = conf.macro_f1();
    return m;
}

}  // namespace imix
