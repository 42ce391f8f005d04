#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "imix/error.hpp"
#include "imix/nn.hpp"
#include "imix/rng.hpp"
#include "imix/tape.hpp"
#include "imix/tensor.hpp"
#include "imix/types.hpp"

namespace imix {

enum class FusionKind { Mlp, Attention };

inline FusionKind fusion_kind_from_string(const std::string& s) {
    if (s == "mlp") return FusionKind::Mlp;
    if (s == "attention") return FusionKind::Attention;
    throw ConfigError("unknown fusion kind: " + s);
}

struct ModelConfig {
    std::vector<std::size_t> input_dims;  // one per modality
    std::size_t output_dim = 2;           // logits (classification) or 1 (regression)
    TaskKind task = TaskKind::Multiclass;

    std::size_t hidden_dim = 16;
    std::size_t num_layers_enc = 1;
    std::size_t num_layers_fus = 2;
    std::size_t num_layers_pred = 1;
    std::size_t num_heads = 2;
    FusionKind fusion = FusionKind::Mlp;
    Activation activation = Activation::Relu;

    std::size_t hidden_dim_rw = 16;
    std::size_t num_layer_rw = 2;
    double temperature_rw = 1.0;
    bool simple_weight = false;  // global learnable weight vector instead of the MLP

    // Empty means the standard n+2 roster: uni1..unin, syn, red.
    std::vector<ExpertId> experts;

    std::size_t n_modalities() const { return input_dims.size(); }

    std::vector<ExpertId> expert_roster() const {
        if (!experts.empty()) return experts;
        std::vector<ExpertId> r;
        for (std::size_t i = 1; i <= input_dims.size(); ++i)
            r.push_back(ExpertId::uniqueness(static_cast<int>(i)));
        r.push_back(ExpertId::synergy());
        r.push_back(ExpertId::redundancy());
        return r;
    }

    void validate() const {
        if (input_dims.size() < 2) throw ConfigError("model: need at least 2 modalities");
        for (std::size_t d : input_dims)
            if (d == 0) throw ConfigError("model: modality dims must be >= 1");
        if (hidden_dim == 0 || output_dim == 0) throw ConfigError("model: dims must be >= 1");
        if (!(temperature_rw > 0.0)) throw ConfigError("model: temperature_rw must be > 0");
        if (fusion == FusionKind::Attention && hidden_dim % num_heads != 0)
            throw ConfigError("model: hidden_dim must be divisible by num_heads");
        for (const auto& e : expert_roster())
            if (e.kind == ExpertKind::Uniqueness &&
                (e.modality < 1 || e.modality > static_cast<int>(input_dims.size())))
                throw ConfigError("model: uniqueness expert modality out of range");
    }
};

// Counts whole-model forward passes; inference must show zero masked ones.
struct PassCounter {
    int clean = 0;
    int masked = 0;
};

// One multi-head cross-attention block over the n modality embeddings,
// with a residual connection per token. A lightweight stand-in for
// transformer-style fusion bodies.
struct AttentionBlock {
    Linear wq, wk, wv;
    std::size_t heads = 1;
    std::size_t dim = 0;

    static AttentionBlock create(ParamStore& ps, const std::string& name, std::size_t dim,
                                 std::size_t heads, Rng& rng) {
        AttentionBlock a;
        a.heads = heads;
        a.dim = dim;
        a.wq = Linear::create(ps, name + ".wq", dim, dim, rng);
        a.wk = Linear::create(ps, name + ".wk", dim, dim, rng);
        a.wv = Linear::create(ps, name + ".wv", dim, dim, rng);
        return a;
    }

    // tokens: n embeddings [B x dim] -> n attended embeddings [B x dim].
    std::vector<NodeId> apply(Tape& t, ParamBinding& p, const std::vector<NodeId>& tokens) const {
        const std::size_t n = tokens.size();
        const std::size_t dh = dim / heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<NodeId> q(n), k(n), v(n);
        for (std::size_t i = 0; i < n; ++i) {
            q[i] = wq.apply(t, p, tokens[i]);
            k[i] = wk.apply(t, p, tokens[i]);
            v[i] = wv.apply(t, p, tokens[i]);
        }
        std::vector<NodeId> out(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<NodeId> head_outs;
            for (std::size_t h = 0; h < heads; ++h) {
                const std::size_t off = h * dh;
                NodeId qi = t.slice_cols(q[i], off, dh);
                std::vector<NodeId> scores(n);
                for (std::size_t j = 0; j < n; ++j)
                    scores[j] = t.scale(t.row_dot(qi, t.slice_cols(k[j], off, dh)), inv_sqrt);
                NodeId alpha = t.softmax_t(t.concat(scores), 1.0);  // [B x n]
                NodeId acc = -1;
                for (std::size_t j = 0; j < n; ++j) {
                    NodeId term = t.mul(t.slice_cols(v[j], off, dh), t.slice_cols(alpha, j, 1));
                    acc = j == 0 ? term : t.add(acc, term);
                }
                head_outs.push_back(acc);
            }
            NodeId attended = head_outs.size() == 1 ? head_outs[0] : t.concat(head_outs);
            out[i] = t.add(tokens[i], attended);
        }
        return out;
    }
};

// Fusion body plus prediction head for one interaction type.
struct InteractionExpert {
    ExpertId id;
    std::optional<AttentionBlock> attn;
    Mlp fusion;
    Mlp head;
    std::size_t param_begin = 0;  // [begin, end) in the owning ParamStore
    std::size_t param_end = 0;

    struct Output {
        NodeId fused;   // [B x hidden]
        NodeId logits;  // [B x output_dim]
    };

    Output predict(Tape& t, ParamBinding& p, const std::vector<NodeId>& embeddings) const {
        std::vector<NodeId> tokens = embeddings;
        if (attn) tokens = attn->apply(t, p, tokens);
        NodeId fused = fusion.apply(t, p, t.concat(tokens));
        fused = apply_activation(t, fused, fusion.act);
        return {fused, head.apply(t, p, fused)};
    }
};

// The full predictor: per-modality encoders, n+2 interaction experts and
// the sample-adaptive reweighting model.
class MoeModel {
public:
    static MoeModel create(ModelConfig cfg, std::uint64_t seed) {
        Rng rng = make_stream(seed, RngStream::Init);
        return create(std::move(cfg), rng);
    }

    static MoeModel create(ModelConfig cfg, Rng& rng) {
        cfg.validate();
        MoeModel m;
        m.cfg_ = cfg;
        const std::size_t n = cfg.n_modalities();
        for (std::size_t i = 0; i < n; ++i)
            m.encoders_.push_back(Mlp::create(m.params_, "enc" + std::to_string(i + 1),
                                              cfg.input_dims[i], cfg.hidden_dim, cfg.hidden_dim,
                                              cfg.num_layers_enc, cfg.activation, rng));
        m.encoder_params_end_ = m.params_.count();

        for (const ExpertId& id : cfg.expert_roster()) {
            InteractionExpert e;
            e.id = id;
            e.param_begin = m.params_.count();
            const std::string name = "expert." + id.label();
            if (cfg.fusion == FusionKind::Attention)
                e.attn = AttentionBlock::create(m.params_, name + ".attn", cfg.hidden_dim,
                                                cfg.num_heads, rng);
            e.fusion = Mlp::create(m.params_, name + ".fus", n * cfg.hidden_dim, cfg.hidden_dim,
                                   cfg.hidden_dim, cfg.num_layers_fus, cfg.activation, rng);
            e.head = Mlp::create(m.params_, name + ".head", cfg.hidden_dim, cfg.hidden_dim,
                                 cfg.output_dim, cfg.num_layers_pred, cfg.activation, rng);
            e.param_end = m.params_.count();
            m.experts_.push_back(std::move(e));
        }
        m.expert_params_end_ = m.params_.count();

        if (cfg.simple_weight) {
            m.simple_weight_param_ = m.params_.add("reweight.global", Tensor(1, m.experts_.size(), 0.0));
        } else {
            m.reweighter_ = Mlp::create(m.params_, "reweight", n * cfg.hidden_dim, cfg.hidden_dim_rw,
                                        m.experts_.size(), cfg.num_layer_rw, cfg.activation, rng);
        }
        return m;
    }

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const std::vector<InteractionExpert>& experts() const { return experts_; }
    std::size_t n_experts() const { return experts_.size(); }
    std::size_t n_modalities() const { return cfg_.n_modalities(); }

    // Per-modality features [B x input_dims[i]] -> embeddings [B x hidden].
    std::vector<NodeId> encode(Tape& t, ParamBinding& p, const std::vector<Tensor>& inputs) const {
        if (inputs.size() != cfg_.n_modalities())
            throw ContractError("encode: got " + std::to_string(inputs.size()) + " modalities, expected " +
                                std::to_string(cfg_.n_modalities()));
        std::vector<NodeId> emb;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            if (inputs[i].cols() != cfg_.input_dims[i])
                throw ContractError("encode: modality " + std::to_string(i + 1) + " has width " +
                                    std::to_string(inputs[i].cols()) + ", expected " +
                                    std::to_string(cfg_.input_dims[i]));
            emb.push_back(encoders_[i].apply(t, p, t.leaf(inputs[i])));
        }
        return emb;
    }

    // Importance weights over experts; [B x E] from the MLP reweighter or
    // [1 x E] for the global-weight variant. Rows live on the simplex.
    NodeId reweight(Tape& t, ParamBinding& p, const std::vector<NodeId>& embeddings) const {
        return reweight(t, p, embeddings, cfg_.temperature_rw);
    }

    NodeId reweight(Tape& t, ParamBinding& p, const std::vector<NodeId>& embeddings,
                    double temperature) const {
        if (!(temperature > 0.0)) throw ConfigError("reweight: temperature must be > 0");
        if (cfg_.simple_weight) return t.softmax_t(p(simple_weight_param_), temperature);
        return t.softmax_t(reweighter_->apply(t, p, t.concat(embeddings)), temperature);
    }

    // y_hat = sum_i w_i . y_hat_i, in fixed expert order.
    static NodeId combined_prediction(Tape& t, NodeId weights, const std::vector<NodeId>& logits) {
        const Tensor& w = t.val(weights);
        if (w.cols() != logits.size())
            throw ContractError("combined_prediction: " + std::to_string(w.cols()) + " weights for " +
                                std::to_string(logits.size()) + " experts");
        NodeId acc = -1;
        for (std::size_t i = 0; i < logits.size(); ++i) {
            NodeId term = t.mul(logits[i], t.slice_cols(weights, i, 1));
            acc = i == 0 ? term : t.add(acc, term);
        }
        return acc;
    }

    struct Prediction {
        std::vector<NodeId> embeddings;
        std::vector<NodeId> expert_logits;
        NodeId weights;
        NodeId combined;
    };

    // Single clean forward pass (the inference procedure).
    Prediction predict(Tape& t, ParamBinding& p, const std::vector<Tensor>& inputs,
                       PassCounter* probe = nullptr) const {
        Prediction out;
        out.embeddings = encode(t, p, inputs);
        for (const auto& e : experts_) out.expert_logits.push_back(e.predict(t, p, out.embeddings).logits);
        out.weights = reweight(t, p, out.embeddings);
        out.combined = combined_prediction(t, out.weights, out.expert_logits);
        if (probe) probe->clean += 1;
        return out;
    }

    std::size_t parameter_count() const { return params_.scalar_count(); }

    std::size_t encoder_parameter_count() const {
        std::size_t n = 0;
        for (std::size_t i = 0; i < encoder_params_end_; ++i) n += params_.value(i).size();
        return n;
    }

    std::size_t expert_parameter_count() const {
        std::size_t n = 0;
        for (std::size_t i = encoder_params_end_; i < expert_params_end_; ++i)
            n += params_.value(i).size();
        return n;
    }

    std::size_t reweighter_parameter_count() const {
        std::size_t n = 0;
        for (std::size_t i = expert_params_end_; i < params_.count(); ++i)
            n += params_.value(i).size();
        return n;
    }

private:
    ModelConfig cfg_;
    ParamStore params_;
    std::vector<Mlp> encoders_;
    std::vector<InteractionExpert> experts_;
    std::optional<Mlp> reweighter_;
    std::size_t simple_weight_param_ = 0;
    std::size_t encoder_params_end_ = 0;
    std::size_t expert_params_end_ = 0;
};

}  // namespace imix
