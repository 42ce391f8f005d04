#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "imix/dataset.hpp"
#include "imix/error.hpp"
#include "imix/metrics.hpp"
#include "imix/model.hpp"
#include "imix/trainer.hpp"
#include "imix/types.hpp"

namespace imix {

// Per-sample view of the ensemble decision: expert outputs, importance
// weights and the weighted contributions that sum to the final logits.
struct LocalRecord {
    std::size_t sample = 0;
    std::vector<double> weights;                     // E, on the simplex
    std::vector<std::vector<double>> expert_logits;  // E x output_dim
    std::vector<std::vector<double>> contributions;  // E x output_dim, w_i * y_i
    std::vector<double> final_logits;                // output_dim
    std::vector<double> label;                       // target row
    bool correct = false;
};

struct WeightStats {
    std::string expert;
    double mean = 0.0, median = 0.0, min = 0.0, max = 0.0, stddev = 0.0;
};

struct GlobalReport {
    std::vector<WeightStats> per_expert;
    std::size_t n_samples = 0;
    std::vector<std::vector<double>> raw_weights;  // n x E, for external plotting
};

// Percentages over the four (all-experts-agree?, ensemble-correct?) cells.
struct AgreementTable {
    double disagree_correct = 0.0;
    double disagree_incorrect = 0.0;
    double agree_correct = 0.0;
    double agree_incorrect = 0.0;

    double sum() const {
        return disagree_correct + disagree_incorrect + agree_correct + agree_incorrect;
    }
};

struct ExpertScore {
    std::string expert;  // kind label, or "ensemble"
    Metrics metrics;
};

namespace detail {

inline bool row_correct(TaskKind task, const std::vector<double>& scores,
                        const std::vector<double>& label) {
    if (task == TaskKind::Multiclass) {
        std::size_t pred = 0;
        for (std::size_t c = 1; c < scores.size(); ++c)
            if (scores[c] > scores[pred]) pred = c;
        return pred == static_cast<std::size_t>(label[0]);
    }
    if (task == TaskKind::Multilabel) {
        for (std::size_t c = 0; c < scores.size(); ++c)
            if ((scores[c] > 0.0) != (label[c] > 0.5)) return false;
        return true;
    }
    throw ContractError("row_correct: correctness is undefined for regression");
}

// Thresholded prediction set of one expert row, for agreement checks.
inline std::vector<int> row_decision(TaskKind task, const std::vector<double>& scores) {
    if (task == TaskKind::Multiclass) {
        std::size_t pred = 0;
        for (std::size_t c = 1; c < scores.size(); ++c)
            if (scores[c] > scores[pred]) pred = c;
        return {static_cast<int>(pred)};
    }
    std::vector<int> set(scores.size());
    for (std::size_t c = 0; c < scores.size(); ++c) set[c] = scores[c] > 0.0 ? 1 : 0;
    return set;
}

}  // namespace detail

inline std::vector<LocalRecord> local_report(const MoeModel& model, const MultimodalDataset& ds,
                                             const std::vector<std::size_t>& rows) {
    const EvalOutput ev = evaluate(model, ds, rows);
    const std::size_t E = model.n_experts();
    const std::size_t od = model.config().output_dim;
    const Tensor targets = ds.batch_targets(rows);
    std::vector<LocalRecord> out;
    out.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        LocalRecord rec;
        rec.sample = rows[r];
        rec.weights.resize(E);
        rec.expert_logits.assign(E, std::vector<double>(od));
        rec.contributions.assign(E, std::vector<double>(od));
        rec.final_logits.resize(od);
        for (std::size_t e = 0; e < E; ++e) {
            rec.weights[e] = ev.weights.at(r, e);
            for (std::size_t c = 0; c < od; ++c) {
                rec.expert_logits[e][c] = ev.expert_scores[e].at(r, c);
                rec.contributions[e][c] = rec.weights[e] * rec.expert_logits[e][c];
            }
        }
        for (std::size_t c = 0; c < od; ++c) rec.final_logits[c] = ev.scores.at(r, c);
        rec.label.resize(targets.cols());
        for (std::size_t c = 0; c < targets.cols(); ++c) rec.label[c] = targets.at(r, c);
        if (ds.task == TaskKind::Multiclass) {
            // batch_targets one-hot encodes; recover the class index.
            std::size_t t = 0;
            for (std::size_t c = 1; c < targets.cols(); ++c)
                if (targets.at(r, c) > targets.at(r, t)) t = c;
            rec.correct = detail::row_correct(ds.task, rec.final_logits,
                                              {static_cast<double>(t)});
            rec.label = {static_cast<double>(t)};
        } else if (ds.task == TaskKind::Multilabel) {
            rec.correct = detail::row_correct(ds.task, rec.final_logits, rec.label);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

inline GlobalReport global_report(const std::vector<LocalRecord>& records) {
    if (records.empty()) throw ContractError("global_report: no records");
    const std::size_t E = records[0].weights.size();
    GlobalReport rep;
    rep.n_samples = records.size();
    for (const auto& r : records) {
        if (r.weights.size() != E) throw ContractError("global_report: ragged weight vectors");
        rep.raw_weights.push_back(r.weights);
    }
    for (std::size_t e = 0; e < E; ++e) {
        std::vector<double> ws;
        ws.reserve(records.size());
        for (const auto& r : records) ws.push_back(r.weights[e]);
        std::sort(ws.begin(), ws.end());
        WeightStats s;
        s.min = ws.front();
        s.max = ws.back();
        s.median = ws.size() % 2 ? ws[ws.size() / 2]
                                 : 0.5 * (ws[ws.size() / 2 - 1] + ws[ws.size() / 2]);
        for (double w : ws) s.mean += w;
        s.mean /= static_cast<double>(ws.size());
        for (double w : ws) s.stddev += (w - s.mean) * (w - s.mean);
        s.stddev = std::sqrt(s.stddev / static_cast<double>(ws.size()));
        rep.per_expert.push_back(std::move(s));
    }
    return rep;
}

// Names the per-expert rows of a report from the model's roster.
inline void name_report_experts(GlobalReport& rep, const MoeModel& model) {
    for (std::size_t e = 0; e < rep.per_expert.size() && e < model.n_experts(); ++e)
        rep.per_expert[e].expert = model.experts()[e].id.label();
}

inline AgreementTable agreement_analysis(const MoeModel& model, const MultimodalDataset& ds,
                                         const std::vector<std::size_t>& rows) {
    if (ds.task == TaskKind::Regression)
        throw ContractError("agreement_analysis: unsupported for regression tasks");
    const auto records = local_report(model, ds, rows);
    std::size_t cells[2][2] = {{0, 0}, {0, 0}};  // [agree][correct]
    for (const auto& r : records) {
        const auto first = detail::row_decision(ds.task, r.expert_logits[0]);
        bool agree = true;
        for (std::size_t e = 1; e < r.expert_logits.size() && agree; ++e)
            agree = detail::row_decision(ds.task, r.expert_logits[e]) == first;
        cells[agree ? 1 : 0][r.correct ? 1 : 0]++;
    }
    const double n = static_cast<double>(records.size());
    AgreementTable t;
    t.disagree_correct = 100.0 * static_cast<double>(cells[0][1]) / n;
    t.disagree_incorrect = 100.0 * static_cast<double>(cells[0][0]) / n;
    t.agree_correct = 100.0 * static_cast<double>(cells[1][1]) / n;
    t.agree_incorrect = 100.0 * static_cast<double>(cells[1][0]) / n;
    return t;
}

// Each expert scored standalone on its own logits, plus the ensemble.
inline std::vector<ExpertScore> expert_accuracy_comparison(const MoeModel& model,
                                                           const MultimodalDataset& ds,
                                                           const std::vector<std::size_t>& rows) {
    const EvalOutput ev = evaluate(model, ds, rows);
    const Tensor targets = ds.batch_targets(rows);
    std::vector<ExpertScore> out;
    for (std::size_t e = 0; e < model.n_experts(); ++e)
        out.push_back({model.experts()[e].id.label(),
                       compute_metrics(ds.task, ev.expert_scores[e], targets)});
    out.push_back({"ensemble", ev.metrics});
    return out;
}

// ---------------------------------------------------------------------
// Report files.
// ---------------------------------------------------------------------

inline void write_local_jsonl(const std::vector<LocalRecord>& records,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& r : records) {
        nlohmann::json j;
        j["sample"] = r.sample;
        j["weights"] = r.weights;
        j["expert_logits"] = r.expert_logits;
        j["contributions"] = r.contributions;
        j["final_logits"] = r.final_logits;
        j["label"] = r.label;
        j["correct"] = r.correct;
        out << j.dump() << "\n";
    }
}

inline void write_global_json(const GlobalReport& rep, const std::filesystem::path& path) {
    nlohmann::json j;
    j["n_samples"] = rep.n_samples;
    j["per_expert"] = nlohmann::json::array();
    for (const auto& s : rep.per_expert)
        j["per_expert"].push_back({{"expert", s.expert},
                                   {"mean", s.mean},
                                   {"median", s.median},
                                   {"min", s.min},
                                   {"max", s.max},
                                   {"std", s.stddev}});
    j["raw_weights"] = rep.raw_weights;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline void write_agreement_json(const AgreementTable& t, const std::filesystem::path& path) {
    nlohmann::json j;
    j["disagree_correct_pct"] = t.disagree_correct;
    j["disagree_incorrect_pct"] = t.disagree_incorrect;
    j["agree_correct_pct"] = t.agree_correct;
    j["agree_incorrect_pct"] = t.agree_incorrect;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

inline void write_experts_csv(const std::vector<ExpertScore>& scores, TaskKind task,
                              const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "expert,accuracy,auroc,micro_f1,macro_f1,mse\n";
    for (const auto& s : scores) {
        out << s.expert << "," << detail::fmt17(s.metrics.accuracy) << ","
            << detail::fmt17(s.metrics.auroc) << "," << detail::fmt17(s.metrics.micro_f1) << ","
            << detail::fmt17(s.metrics.macro_f1) << "," << detail::fmt17(s.metrics.mse) << "\n";
    }
    (void)task;
}

}  // namespace imix
