#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "imix/dataset.hpp"
#include "imix/error.hpp"
#include "imix/interaction.hpp"
#include "imix/metrics.hpp"
#include "imix/model.hpp"
#include "imix/nn.hpp"
#include "imix/optim.hpp"
#include "imix/rng.hpp"
#include "imix/tape.hpp"
#include "imix/types.hpp"

namespace imix {

enum class AblationVariant {
    None,
    NoInteraction,      // (1) lambda_int = 0
    LatentContrastive,  // (2) losses on fused embeddings instead of outputs
    SimpleWeight,       // (3) global learnable weight vector
    LessForward,        // (4) only 2 masked passes per batch
    SynergyRedundancy,  // (5) experts restricted to {syn, red}
};

inline std::string to_string(AblationVariant v) {
    switch (v) {
        case AblationVariant::None: return "none";
        case AblationVariant::NoInteraction: return "no-interaction";
        case AblationVariant::LatentContrastive: return "latent-contrastive";
        case AblationVariant::SimpleWeight: return "simple-weight";
        case AblationVariant::LessForward: return "less-forward";
        case AblationVariant::SynergyRedundancy: return "synergy-redundancy";
    }
    return "?";
}

inline AblationVariant ablation_from_string(const std::string& s) {
    if (s == "none") return AblationVariant::None;
    if (s == "no-interaction") return AblationVariant::NoInteraction;
    if (s == "latent-contrastive") return AblationVariant::LatentContrastive;
    if (s == "simple-weight") return AblationVariant::SimpleWeight;
    if (s == "less-forward") return AblationVariant::LessForward;
    if (s == "synergy-redundancy") return AblationVariant::SynergyRedundancy;
    throw ConfigError("unknown ablation variant: " + s);
}

enum class BaselineKind { None, EarlyFusion, LateFusion };

inline BaselineKind baseline_from_string(const std::string& s) {
    if (s == "none") return BaselineKind::None;
    if (s == "early-fusion") return BaselineKind::EarlyFusion;
    if (s == "late-fusion") return BaselineKind::LateFusion;
    throw ConfigError("unknown baseline: " + s);
}

// Hyperparameter names mirror the published configuration tables so that
// settings paste straight onto the CLI.
struct TrainConfig {
    double lr = 0.003;
    std::size_t train_epochs = 30;
    std::size_t batch_size = 32;
    double lambda_int = 0.5;  // interaction_loss_weight
    double temperature_rw = 1.0;
    std::size_t hidden_dim_rw = 16;
    std::size_t num_layer_rw = 2;
    std::size_t hidden_dim = 16;
    std::size_t num_layers_enc = 1;
    std::size_t num_layers_fus = 2;
    std::size_t num_layers_pred = 1;
    std::size_t num_heads = 2;
    FusionKind fusion = FusionKind::Mlp;
    MaskStrategy mask_strategy = MaskStrategy::Random;
    double triplet_margin = 1.0;
    double synergy_mse_margin = 1.0;
    bool triplet_on_normalized = false;
    std::uint64_t seed = 0;
    AblationVariant ablation = AblationVariant::None;
    BaselineKind baseline = BaselineKind::None;

    // Non-user knobs used by tests and the overhead harness.
    bool single_expert = false;            // one synergy expert, weight pinned to 1
    bool skip_interaction_graph = false;   // masked passes run, losses never built

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("train: lr must be > 0");
        if (train_epochs < 1) throw ConfigError("train: train_epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (lambda_int < 0.0) throw ConfigError("train: interaction_loss_weight must be >= 0");
        if (!(temperature_rw > 0.0)) throw ConfigError("train: temperature_rw must be > 0");
        if (!(triplet_margin > 0.0)) throw ConfigError("train: triplet_margin must be > 0");
    }

    ModelConfig model_config(const MultimodalDataset& ds) const {
        ModelConfig mc;
        mc.input_dims = ds.input_dims();
        mc.task = ds.task;
        mc.output_dim = ds.task == TaskKind::Regression ? 1 : ds.num_classes;
        mc.hidden_dim = hidden_dim;
        mc.num_layers_enc = num_layers_enc;
        mc.num_layers_fus = num_layers_fus;
        mc.num_layers_pred = num_layers_pred;
        mc.num_heads = num_heads;
        mc.fusion = fusion;
        mc.hidden_dim_rw = hidden_dim_rw;
        mc.num_layer_rw = num_layer_rw;
        mc.temperature_rw = temperature_rw;
        mc.simple_weight = single_expert || ablation == AblationVariant::SimpleWeight;
        if (single_expert) {
            mc.experts = {ExpertId::synergy()};
        } else if (ablation == AblationVariant::SynergyRedundancy) {
            mc.experts = {ExpertId::synergy(), ExpertId::redundancy()};
        }
        return mc;
    }

    LossWeights loss_weights() const {
        LossWeights lw;
        lw.lambda_int = ablation == AblationVariant::NoInteraction ? 0.0 : lambda_int;
        lw.triplet_margin = triplet_margin;
        lw.synergy_mse_margin = synergy_mse_margin;
        lw.triplet_on_normalized = triplet_on_normalized;
        return lw;
    }
};

struct Split {
    std::vector<std::size_t> train, val, test;
};

// 70 / 15 / 15 shuffled split: floor(0.7N), floor(0.15N), remainder.
inline Split split_dataset(const MultimodalDataset& ds, std::uint64_t seed) {
    const std::size_t n = ds.n_samples();
    if (n < 10) throw ConfigError("split: need >= 10 samples, got " + std::to_string(n));
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_stream(seed, RngStream::Shuffle);
    for (std::size_t i = n - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.below(i + 1)]);  // Fisher-Yates
    const std::size_t ntr = static_cast<std::size_t>(0.7 * static_cast<double>(n));
    const std::size_t nva = static_cast<std::size_t>(0.15 * static_cast<double>(n));
    Split s;
    s.train.assign(idx.begin(), idx.begin() + ntr);
    s.val.assign(idx.begin() + ntr, idx.begin() + ntr + nva);
    s.test.assign(idx.begin() + ntr + nva, idx.end());
    return s;
}

struct EpochLog {
    std::size_t epoch = 0;
    double task_loss = 0.0;
    std::vector<double> int_losses;  // per expert, epoch mean
    double train_acc = 0.0;          // mse for regression
    double val_acc = 0.0;
    double seconds = 0.0;
};

struct EvalOutput {
    Metrics metrics;
    Tensor scores;                      // [n x output_dim] combined logits
    Tensor weights;                     // [n x E] reweighter outputs
    std::vector<Tensor> expert_scores;  // per expert [n x output_dim]
    PassCounter passes;
};

// Clean forward passes over a row subset; the inference procedure.
inline EvalOutput evaluate(const MoeModel& model, const MultimodalDataset& ds,
                           const std::vector<std::size_t>& rows, std::size_t batch_size = 256) {
    if (rows.empty()) throw ContractError("evaluate: empty split");
    const std::size_t E = model.n_experts();
    const std::size_t od = model.config().output_dim;
    EvalOutput out;
    out.scores = Tensor(rows.size(), od);
    out.weights = Tensor(rows.size(), E);
    out.expert_scores.assign(E, Tensor(rows.size(), od));
    for (std::size_t start = 0; start < rows.size(); start += batch_size) {
        const std::size_t stop = std::min(rows.size(), start + batch_size);
        std::vector<std::size_t> brows(rows.begin() + start, rows.begin() + stop);
        std::vector<Tensor> inputs;
        for (std::size_t m = 0; m < ds.modalities.size(); ++m)
            inputs.push_back(ds.batch_features(m, brows));
        Tape tape;
        ParamBinding bind(tape, model.params(), false);
        auto pred = model.predict(tape, bind, inputs, &out.passes);
        const Tensor& combined = tape.val(pred.combined);
        const Tensor& w = tape.val(pred.weights);
        for (std::size_t r = 0; r < brows.size(); ++r) {
            for (std::size_t c = 0; c < od; ++c) out.scores.at(start + r, c) = combined.at(r, c);
            for (std::size_t e = 0; e < E; ++e)
                out.weights.at(start + r, e) = w.rows() == 1 ? w.at(0, e) : w.at(r, e);
        }
        for (std::size_t e = 0; e < E; ++e) {
            const Tensor& ylog = tape.val(pred.expert_logits[e]);
            for (std::size_t r = 0; r < brows.size(); ++r)
                for (std::size_t c = 0; c < od; ++c)
                    out.expert_scores[e].at(start + r, c) = ylog.at(r, c);
        }
    }
    out.metrics = compute_metrics(ds.task, out.scores, ds.batch_targets(rows));
    return out;
}

struct TrainResult {
    MoeModel model;
    TrainConfig config;
    Split split;
    std::vector<EpochLog> log;
    Metrics val_metrics;
    Metrics test_metrics;
    std::size_t best_epoch = 0;  // by validation accuracy (negated mse for regression)
    double best_val = 0.0;
    bool diverged = false;
    PassCounter train_passes;
};

namespace detail {

inline NodeId task_loss_node(Tape& t, TaskKind task, NodeId combined, const Tensor& targets) {
    const NodeId y = t.leaf(targets);
    switch (task) {
        case TaskKind::Multiclass: return t.cross_entropy_with_logits(combined, y);
        case TaskKind::Multilabel: return t.bce_with_logits(combined, y);
        case TaskKind::Regression: return t.mse(combined, y);
    }
    throw ContractError("task_loss: unknown task kind");
}

inline double fitness(TaskKind task, const Metrics& m) {
    return task == TaskKind::Regression ? -m.mse : m.accuracy;
}

}  // namespace detail

// One full training run realizing the masked-forward training procedure.
inline TrainResult train_run(const TrainConfig& cfg, const MultimodalDataset& ds) {
    cfg.validate();
    ds.validate();
    TrainResult res{MoeModel::create(cfg.model_config(ds), cfg.seed), cfg};
    res.split = split_dataset(ds, cfg.seed);
    MoeModel& model = res.model;
    const std::size_t n_mod = model.n_modalities();
    const std::size_t E = model.n_experts();
    const LossWeights lw = cfg.loss_weights();

    Adam opt(cfg.lr);
    Rng shuffle_rng(cfg.seed, 100 + static_cast<std::uint64_t>(RngStream::Shuffle));
    Rng mask_rng = make_stream(cfg.seed, RngStream::Mask);
    Rng select_rng = make_stream(cfg.seed, RngStream::Select);

    std::vector<std::size_t> order = res.split.train;
    double best = -1e300;

    for (std::size_t epoch = 0; epoch < cfg.train_epochs && !res.diverged; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        double task_sum = 0.0;
        std::vector<double> int_sums(E, 0.0);
        std::size_t batches = 0;

        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::size_t> brows(order.begin() + start, order.begin() + stop);
            std::vector<Tensor> inputs;
            for (std::size_t m = 0; m < n_mod; ++m) inputs.push_back(ds.batch_features(m, brows));

            Tape tape;
            ParamBinding bind(tape, model.params(), true);
            auto embeddings = model.encode(tape, bind, inputs);

            ForwardOptions fopts;
            if (cfg.ablation == AblationVariant::LessForward && n_mod > 2) {
                const std::size_t a = 1 + select_rng.below(n_mod);
                std::size_t b = 1 + select_rng.below(n_mod - 1);
                if (b >= a) ++b;
                fopts.restrict_masks = {a, b};
            }
            auto bundle = forward_multiple(tape, model, bind, embeddings, cfg.mask_strategy,
                                           mask_rng, &res.train_passes, fopts);

            NodeId weights = model.reweight(tape, bind, embeddings);
            std::vector<NodeId> clean_logits;
            for (std::size_t e = 0; e < E; ++e) clean_logits.push_back(bundle.logits[e][0]);
            NodeId combined = MoeModel::combined_prediction(tape, weights, clean_logits);
            NodeId task = detail::task_loss_node(tape, ds.task, combined, ds.batch_targets(brows));

            NodeId total = task;
            std::vector<NodeId> int_nodes;
            if (!cfg.skip_interaction_graph) {
                const bool latent = cfg.ablation == AblationVariant::LatentContrastive;
                for (std::size_t e = 0; e < E; ++e) {
                    const auto& row = latent ? bundle.fused[e] : bundle.logits[e];
                    // Latent-level losses compare embeddings, so the
                    // classification loss family applies regardless of task.
                    const TaskKind loss_task = latent ? TaskKind::Multiclass : ds.task;
                    // A uniqueness expert whose own masked pass was skipped
                    // this batch has no negative; its constraint is simply
                    // not measurable, so it contributes zero.
                    const ExpertId id = model.experts()[e].id;
                    const bool no_negative = id.kind == ExpertKind::Uniqueness &&
                                             row[static_cast<std::size_t>(id.modality)] < 0;
                    int_nodes.push_back(no_negative
                                            ? tape.leaf(Tensor(1, 1, 0.0))
                                            : interaction_loss(tape, id, loss_task, row, lw));
                }
                total = total_loss(tape, task, int_nodes, lw.lambda_int);
            }

            const double loss_val = tape.val(total).scalar();
            if (!std::isfinite(loss_val)) {
                res.diverged = true;  // keep the last finite parameter state
                break;
            }
            task_sum += tape.val(task).scalar();
            for (std::size_t e = 0; e < int_nodes.size(); ++e)
                int_sums[e] += tape.val(int_nodes[e]).scalar();
            ++batches;

            const auto grads = tape.backward(total);
            std::vector<Tensor> pgrads(model.params().count());
            for (std::size_t i = 0; i < pgrads.size(); ++i) {
                const NodeId id = bind.bound_id(i);
                if (id >= 0) pgrads[i] = grads[static_cast<std::size_t>(id)];
            }
            opt.step(model.params(), pgrads);
        }

        EpochLog el;
        el.epoch = epoch;
        el.task_loss = batches ? task_sum / static_cast<double>(batches) : 0.0;
        el.int_losses.resize(E, 0.0);
        if (batches && !cfg.skip_interaction_graph)
            for (std::size_t e = 0; e < E; ++e)
                el.int_losses[e] = int_sums[e] / static_cast<double>(batches);
        const auto train_eval = evaluate(model, ds, res.split.train);
        const auto val_eval = evaluate(model, ds, res.split.val);
        el.train_acc = detail::fitness(ds.task, train_eval.metrics) *
                       (ds.task == TaskKind::Regression ? -1.0 : 1.0);
        el.val_acc = detail::fitness(ds.task, val_eval.metrics) *
                     (ds.task == TaskKind::Regression ? -1.0 : 1.0);
        el.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        res.log.push_back(el);
        res.val_metrics = val_eval.metrics;
        const double fit = detail::fitness(ds.task, val_eval.metrics);
        if (fit > best) {
            best = fit;
            res.best_epoch = epoch;
            res.best_val = fit;
        }
    }
    res.test_metrics = evaluate(model, ds, res.split.test).metrics;
    return res;
}

inline TrainResult run_ablation(AblationVariant variant, TrainConfig cfg,
                                const MultimodalDataset& ds) {
    cfg.ablation = variant;
    return train_run(cfg, ds);
}

// ---------------------------------------------------------------------
// Context baselines: early fusion (concat features -> MLP) and late
// fusion (per-modality MLP -> averaged logits).
// ---------------------------------------------------------------------

struct BaselineResult {
    BaselineKind kind = BaselineKind::None;
    Metrics test_metrics;
    Metrics val_metrics;
    std::size_t param_count = 0;
};

inline BaselineResult train_baseline(const TrainConfig& cfg, const MultimodalDataset& ds) {
    cfg.validate();
    if (cfg.baseline == BaselineKind::None)
        throw ConfigError("train_baseline: no baseline selected");
    const std::size_t od = ds.task == TaskKind::Regression ? 1 : ds.num_classes;
    const std::size_t depth = cfg.num_layers_enc + cfg.num_layers_fus;
    ParamStore params;
    Rng rng = make_stream(cfg.seed, RngStream::Init);
    std::vector<Mlp> nets;
    if (cfg.baseline == BaselineKind::EarlyFusion) {
        std::size_t total = 0;
        for (std::size_t d : ds.input_dims()) total += d;
        nets.push_back(Mlp::create(params, "early", total, cfg.hidden_dim, od, depth,
                                   Activation::Relu, rng));
    } else {
        for (std::size_t m = 0; m < ds.modalities.size(); ++m)
            nets.push_back(Mlp::create(params, "late" + std::to_string(m), ds.modalities[m].dim,
                                       cfg.hidden_dim, od, depth, Activation::Relu, rng));
    }

    const Split split = split_dataset(ds, cfg.seed);
    Adam opt(cfg.lr);
    Rng shuffle_rng(cfg.seed, 100 + static_cast<std::uint64_t>(RngStream::Shuffle));
    std::vector<std::size_t> order = split.train;

    auto forward = [&](Tape& tape, ParamBinding& bind, const std::vector<Tensor>& inputs) {
        if (cfg.baseline == BaselineKind::EarlyFusion) {
            std::vector<NodeId> xs;
            for (const auto& in : inputs) xs.push_back(tape.leaf(in));
            return nets[0].apply(tape, bind, tape.concat(xs));
        }
        NodeId acc = -1;
        for (std::size_t m = 0; m < inputs.size(); ++m) {
            NodeId z = nets[m].apply(tape, bind, tape.leaf(inputs[m]));
            acc = m == 0 ? z : tape.add(acc, z);
        }
        return tape.scale(acc, 1.0 / static_cast<double>(inputs.size()));
    };

    for (std::size_t epoch = 0; epoch < cfg.train_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            std::vector<std::size_t> brows(order.begin() + start, order.begin() + stop);
            std::vector<Tensor> inputs;
            for (std::size_t m = 0; m < ds.modalities.size(); ++m)
                inputs.push_back(ds.batch_features(m, brows));
            Tape tape;
            ParamBinding bind(tape, params, true);
            NodeId logits = forward(tape, bind, inputs);
            NodeId loss = detail::task_loss_node(tape, ds.task, logits, ds.batch_targets(brows));
            const auto grads = tape.backward(loss);
            std::vector<Tensor> pgrads(params.count());
            for (std::size_t i = 0; i < pgrads.size(); ++i) {
                const NodeId id = bind.bound_id(i);
                if (id >= 0) pgrads[i] = grads[static_cast<std::size_t>(id)];
            }
            opt.step(params, pgrads);
        }
    }

    auto eval_rows = [&](const std::vector<std::size_t>& rows) {
        Tensor scores(rows.size(), od);
        for (std::size_t start = 0; start < rows.size(); start += 256) {
            const std::size_t stop = std::min(rows.size(), start + std::size_t{256});
            std::vector<std::size_t> brows(rows.begin() + start, rows.begin() + stop);
            std::vector<Tensor> inputs;
            for (std::size_t m = 0; m < ds.modalities.size(); ++m)
                inputs.push_back(ds.batch_features(m, brows));
            Tape tape;
            ParamBinding bind(tape, params, false);
            const Tensor& z = tape.val(forward(tape, bind, inputs));
            for (std::size_t r = 0; r < brows.size(); ++r)
                for (std::size_t c = 0; c < od; ++c) scores.at(start + r, c) = z.at(r, c);
        }
        return compute_metrics(ds.task, scores, ds.batch_targets(rows));
    };

    BaselineResult out;
    out.kind = cfg.baseline;
    out.val_metrics = eval_rows(split.val);
    out.test_metrics = eval_rows(split.test);
    out.param_count = params.scalar_count();
    return out;
}

// ---------------------------------------------------------------------
// Overhead harness: vanilla single-expert fusion vs the full model.
// ---------------------------------------------------------------------

struct OverheadRow {
    std::string label;
    double train_s_per_epoch = 0.0;  // median over measured epochs
    double inference_s = 0.0;
    std::size_t param_count = 0;
    std::size_t expert_param_count = 0;
};

struct OverheadReport {
    std::string dataset;
    OverheadRow vanilla;
    OverheadRow full;
};

inline OverheadReport measure_overhead(TrainConfig cfg, const MultimodalDataset& ds,
                                       std::size_t epochs = 3) {
    cfg.train_epochs = std::max<std::size_t>(epochs, 3);
    OverheadReport rep;
    rep.dataset = ds.name;
    auto run = [&](bool vanilla) {
        TrainConfig c = cfg;
        c.single_expert = vanilla;
        c.skip_interaction_graph = vanilla;
        if (vanilla) c.lambda_int = 0.0;
        TrainResult r = train_run(c, ds);
        std::vector<double> secs;
        for (const auto& e : r.log) secs.push_back(e.seconds);
        std::sort(secs.begin(), secs.end());
        OverheadRow row;
        row.label = vanilla ? "vanilla-fusion" : "full-model";
        row.train_s_per_epoch = secs[secs.size() / 2];
        const auto t0 = std::chrono::steady_clock::now();
        (void)evaluate(r.model, ds, r.split.test);
        row.inference_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        row.param_count = r.model.parameter_count();
        row.expert_param_count = r.model.expert_parameter_count();
        return row;
    };
    rep.vanilla = run(true);
    rep.full = run(false);
    return rep;
}

// Mean and sample standard deviation over seeds.
struct SeedStats {
    double mean = 0.0;
    double stddev = 0.0;
};

inline SeedStats seed_stats(const std::vector<double>& xs) {
    SeedStats s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double acc = 0.0;
        for (double x : xs) acc += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    }
    return s;
}

}  // namespace imix
