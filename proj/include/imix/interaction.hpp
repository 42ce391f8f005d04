#pragma once

#include <cstddef>
#include <vector>

#include "imix/error.hpp"
#include "imix/model.hpp"
#include "imix/rng.hpp"
#include "imix/tape.hpp"
#include "imix/types.hpp"

namespace imix {

// Replaces embedding k (1-based) with a perturbation vector; the
// replacement is a constant leaf, so no gradient flows through it. The
// other embeddings are shared with the clean pass and do carry gradient.
inline std::vector<NodeId> mask_embedding(Tape& t, const std::vector<NodeId>& embeddings,
                                          std::size_t k, MaskStrategy strategy, Rng& rng) {
    if (k < 1 || k > embeddings.size())
        throw ContractError("mask_embedding: modality index " + std::to_string(k) + " out of 1.." +
                            std::to_string(embeddings.size()));
    const Tensor& e = t.val(embeddings[k - 1]);
    Tensor repl(e.rows(), e.cols(), 0.0);
    switch (strategy) {
        case MaskStrategy::Zero:
            break;
        case MaskStrategy::Random:
            for (auto& x : repl.data()) x = rng.normal();
            break;
        case MaskStrategy::Mean: {
            // Per-dimension mean over the batch rows of this modality.
            if (e.rows() == 0) throw ConfigError("mask_embedding: mean strategy needs a batch");
            for (std::size_t c = 0; c < e.cols(); ++c) {
                double s = 0.0;
                for (std::size_t r = 0; r < e.rows(); ++r) s += e.at(r, c);
                s /= static_cast<double>(e.rows());
                for (std::size_t r = 0; r < e.rows(); ++r) repl.at(r, c) = s;
            }
            break;
        }
    }
    std::vector<NodeId> out = embeddings;
    out[k - 1] = t.leaf(std::move(repl));
    return out;
}

// Per expert, the clean output plus one output per masked modality.
// Column 0 is the clean pass; column j the pass with modality j replaced.
// A pass skipped by the less-forward variant holds node id -1.
struct ForwardBundle {
    std::vector<std::vector<NodeId>> logits;  // E x (1+n)
    std::vector<std::vector<NodeId>> fused;   // E x (1+n), for latent-level losses
    std::vector<NodeId> clean_embeddings;
    std::size_t n_modalities = 0;

    std::size_t n_experts() const { return logits.size(); }
};

struct ForwardOptions {
    // When non-empty, only these 1-based modality indices are masked.
    std::vector<std::size_t> restrict_masks;
};

// Algorithm: one clean pass plus one pass per masked modality, for every
// expert. The clean embeddings are the same nodes the reweighter sees.
inline ForwardBundle forward_multiple(Tape& t, const MoeModel& model, ParamBinding& p,
                                      const std::vector<NodeId>& embeddings, MaskStrategy strategy,
                                      Rng& rng, PassCounter* probe = nullptr,
                                      const ForwardOptions& opts = {}) {
    const std::size_t n = embeddings.size();
    if (n < 2) throw ContractError("forward_multiple: need >= 2 modalities");
    std::vector<bool> active(n + 1, true);
    if (!opts.restrict_masks.empty()) {
        active.assign(n + 1, false);
        active[0] = true;
        for (std::size_t k : opts.restrict_masks) {
            if (k < 1 || k > n) throw ContractError("forward_multiple: restricted modality out of range");
            active[k] = true;
        }
    }

    // One shared replacement per masked modality, reused by all experts.
    std::vector<std::vector<NodeId>> masked_sets(n + 1);
    masked_sets[0] = embeddings;
    for (std::size_t j = 1; j <= n; ++j)
        if (active[j]) masked_sets[j] = mask_embedding(t, embeddings, j, strategy, rng);

    ForwardBundle b;
    b.n_modalities = n;
    b.clean_embeddings = embeddings;
    for (const auto& expert : model.experts()) {
        std::vector<NodeId> row(n + 1, -1), frow(n + 1, -1);
        for (std::size_t j = 0; j <= n; ++j) {
            if (!active[j]) continue;
            auto out = expert.predict(t, p, masked_sets[j]);
            row[j] = out.logits;
            frow[j] = out.fused;
        }
        b.logits.push_back(std::move(row));
        b.fused.push_back(std::move(frow));
    }
    if (probe) {
        probe->clean += 1;
        for (std::size_t j = 1; j <= n; ++j)
            if (active[j]) probe->masked += 1;
    }
    return b;
}

namespace detail {

inline std::vector<std::size_t> present_masks(const std::vector<NodeId>& row) {
    std::vector<std::size_t> js;
    for (std::size_t j = 1; j < row.size(); ++j)
        if (row[j] >= 0) js.push_back(j);
    return js;
}

}  // namespace detail

// Mean over j != i of max(0, d(y0, y_j) - d(y0, y_i) + margin), Euclidean
// distance on the expert outputs. Masking modality j keeps modality i's
// information, so pass j is the positive and pass i the negative.
inline NodeId uniqueness_loss(Tape& t, const std::vector<NodeId>& row, std::size_t i,
                              double margin, bool normalized = false) {
    const std::size_t n = row.size() - 1;
    if (n < 2) throw ContractError("uniqueness_loss: need >= 2 modalities");
    if (i < 1 || i > n || row[i] < 0)
        throw ContractError("uniqueness_loss: negative pass for modality " + std::to_string(i) +
                            " unavailable");
    auto prep = [&](NodeId x) { return normalized ? t.l2_normalize(x) : x; };
    const NodeId anchor = prep(row[0]);
    const NodeId d_neg = t.euclidean_distance(anchor, prep(row[i]));
    NodeId acc = -1;
    std::size_t terms = 0;
    for (std::size_t j : detail::present_masks(row)) {
        if (j == i) continue;
        NodeId d_pos = t.euclidean_distance(anchor, prep(row[j]));
        NodeId term = t.mean(t.relu(t.add_scalar(t.sub(d_pos, d_neg), margin)));
        acc = terms == 0 ? term : t.add(acc, term);
        ++terms;
    }
    if (terms == 0) return t.leaf(Tensor(1, 1, 0.0));
    return t.scale(acc, 1.0 / static_cast<double>(terms));
}

// Mean over masked passes of cos(y0, y_j); minimizing pushes the clean
// output away from every masked output.
inline NodeId synergy_loss(Tape& t, const std::vector<NodeId>& row) {
    NodeId acc = -1;
    std::size_t terms = 0;
    for (std::size_t j : detail::present_masks(row)) {
        NodeId term = t.cosine_similarity(row[0], row[j]);
        acc = terms == 0 ? term : t.add(acc, term);
        ++terms;
    }
    if (terms == 0) return t.leaf(Tensor(1, 1, 0.0));
    return t.scale(acc, 1.0 / static_cast<double>(terms));
}

// Mean over masked passes of 1 - cos(y0, y_j); range [0, 2].
inline NodeId redundancy_loss(Tape& t, const std::vector<NodeId>& row) {
    NodeId acc = -1;
    std::size_t terms = 0;
    for (std::size_t j : detail::present_masks(row)) {
        NodeId term = t.cosine_similarity(row[0], row[j]);
        acc = terms == 0 ? term : t.add(acc, term);
        ++terms;
    }
    if (terms == 0) return t.leaf(Tensor(1, 1, 0.0));
    return t.add_scalar(t.scale(acc, -1.0 / static_cast<double>(terms)), 1.0);
}

// Regression counterparts built on per-pass MSE between the clean and
// masked scalar outputs. The synergy hinge stops the push-apart objective
// from diverging.
inline NodeId regression_interaction_loss(Tape& t, ExpertKind kind, const std::vector<NodeId>& row,
                                          std::size_t uniq_modality, double margin,
                                          double synergy_margin) {
    for (NodeId id : row)
        if (id >= 0 && t.val(id).cols() != 1)
            throw ContractError("regression_interaction_loss: outputs must be scalar per sample");
    const auto js = detail::present_masks(row);
    auto pass_mse = [&](std::size_t j) { return t.mse(row[0], row[j]); };
    NodeId acc = -1;
    std::size_t terms = 0;
    switch (kind) {
        case ExpertKind::Redundancy:
            for (std::size_t j : js) {
                NodeId term = pass_mse(j);
                acc = terms == 0 ? term : t.add(acc, term);
                ++terms;
            }
            break;
        case ExpertKind::Synergy:
            for (std::size_t j : js) {
                NodeId term = t.relu(t.add_scalar(t.scale(pass_mse(j), -1.0), synergy_margin));
                acc = terms == 0 ? term : t.add(acc, term);
                ++terms;
            }
            break;
        case ExpertKind::Uniqueness: {
            if (uniq_modality < 1 || uniq_modality >= row.size() || row[uniq_modality] < 0)
                throw ContractError("regression_interaction_loss: negative pass unavailable");
            NodeId neg = pass_mse(uniq_modality);
            for (std::size_t j : js) {
                if (j == uniq_modality) continue;
                NodeId term = t.relu(t.add_scalar(t.sub(pass_mse(j), neg), margin));
                acc = terms == 0 ? term : t.add(acc, term);
                ++terms;
            }
            break;
        }
    }
    if (terms == 0) return t.leaf(Tensor(1, 1, 0.0));
    return t.scale(acc, 1.0 / static_cast<double>(terms));
}

struct LossWeights {
    double lambda_int = 0.5;
    double triplet_margin = 1.0;
    double synergy_mse_margin = 1.0;
    bool triplet_on_normalized = false;
};

// Interaction loss of one expert over its bundle row.
inline NodeId interaction_loss(Tape& t, const ExpertId& id, TaskKind task,
                               const std::vector<NodeId>& row, const LossWeights& lw) {
    if (task == TaskKind::Regression)
        return regression_interaction_loss(t, id.kind, row,
                                           static_cast<std::size_t>(id.modality),
                                           lw.triplet_margin, lw.synergy_mse_margin);
    switch (id.kind) {
        case ExpertKind::Uniqueness:
            return uniqueness_loss(t, row, static_cast<std::size_t>(id.modality),
                                   lw.triplet_margin, lw.triplet_on_normalized);
        case ExpertKind::Synergy:
            return synergy_loss(t, row);
        case ExpertKind::Redundancy:
            return redundancy_loss(t, row);
    }
    throw ContractError("interaction_loss: unknown expert kind");
}

// L_total = L_task + lambda_int * mean_i(L_int_i).
inline NodeId total_loss(Tape& t, NodeId task_loss, const std::vector<NodeId>& interaction_losses,
                         double lambda_int) {
    if (interaction_losses.empty()) return task_loss;
    NodeId acc = interaction_losses[0];
    for (std::size_t i = 1; i < interaction_losses.size(); ++i)
        acc = t.add(acc, interaction_losses[i]);
    return t.add(task_loss,
                 t.scale(acc, lambda_int / static_cast<double>(interaction_losses.size())));
}

}  // namespace imix
