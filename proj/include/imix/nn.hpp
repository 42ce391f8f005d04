#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "imix/error.hpp"
#include "imix/rng.hpp"
#include "imix/tape.hpp"
#include "imix/tensor.hpp"

namespace imix {

// Named trainable tensors, owned by a model. Creation order is fixed so a
// given seed always produces the same initialization stream.
class ParamStore {
public:
    std::size_t add(std::string name, Tensor value) {
        names_.push_back(std::move(name));
        values_.push_back(std::move(value));
        return values_.size() - 1;
    }

    std::size_t count() const { return values_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor& value(std::size_t i) { return values_[i]; }
    const Tensor& value(std::size_t i) const { return values_[i]; }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const auto& v : values_) n += v.size();
        return n;
    }

    // Flattened parameter vector, for trajectory comparisons.
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(scalar_count());
        for (const auto& v : values_) out.insert(out.end(), v.data().begin(), v.data().end());
        return out;
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

// Inserts parameters into a tape as grad-requiring leaves, once each.
class ParamBinding {
public:
    ParamBinding(Tape& tape, const ParamStore& store, bool trainable = true)
        : tape_(tape), store_(store), ids_(store.count(), -1), trainable_(trainable) {}

    NodeId operator()(std::size_t idx) {
        if (ids_[idx] < 0) ids_[idx] = tape_.leaf(store_.value(idx), trainable_);
        return ids_[idx];
    }

    // Node id of a parameter, or -1 if it never entered the tape.
    NodeId bound_id(std::size_t idx) const { return ids_[idx]; }
    std::size_t count() const { return ids_.size(); }

private:
    Tape& tape_;
    const ParamStore& store_;
    std::vector<NodeId> ids_;
    bool trainable_;
};

enum class Activation { Relu, Tanh, Sigmoid, Identity };

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "identity") return Activation::Identity;
    throw ConfigError("unknown activation: " + s);
}

inline NodeId apply_activation(Tape& t, NodeId x, Activation a) {
    switch (a) {
        case Activation::Relu: return t.relu(x);
        case Activation::Tanh: return t.tanh(x);
        case Activation::Sigmoid: return t.sigmoid(x);
        case Activation::Identity: return x;
    }
    return x;
}

// Affine map x.W + b with Glorot-uniform weights and zero biases.
struct Linear {
    std::size_t w = 0;
    std::size_t b = 0;
    std::size_t in = 0;
    std::size_t out = 0;

    static Linear create(ParamStore& ps, const std::string& name, std::size_t in, std::size_t out,
                         Rng& rng) {
        if (in == 0 || out == 0) throw ConfigError("Linear " + name + ": dims must be >= 1");
        const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
        Tensor w(in, out);
        for (auto& x : w.data()) x = rng.uniform(-bound, bound);
        Linear l;
        l.in = in;
        l.out = out;
        l.w = ps.add(name + ".w", std::move(w));
        l.b = ps.add(name + ".b", Tensor(1, out, 0.0));
        return l;
    }

    NodeId apply(Tape& t, ParamBinding& p, NodeId x) const {
        return t.add(t.matmul(x, p(w)), p(b));
    }
};

// Stack of `n_layers` linear maps with the activation between them (none
// after the last). A single layer is a plain affine map.
struct Mlp {
    std::vector<Linear> layers;
    Activation act = Activation::Relu;

    static Mlp create(ParamStore& ps, const std::string& name, std::size_t in, std::size_t hidden,
                      std::size_t out, std::size_t n_layers, Activation act, Rng& rng) {
        if (n_layers == 0) throw ConfigError("Mlp " + name + ": need at least one layer");
        Mlp m;
        m.act = act;
        for (std::size_t l = 0; l < n_layers; ++l) {
            const std::size_t li = l == 0 ? in : hidden;
            const std::size_t lo = l + 1 == n_layers ? out : hidden;
            m.layers.push_back(Linear::create(ps, name + ".l" + std::to_string(l), li, lo, rng));
        }
        return m;
    }

    NodeId apply(Tape& t, ParamBinding& p, NodeId x) const {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            x = layers[l].apply(t, p, x);
            if (l + 1 < layers.size()) x = apply_activation(t, x, act);
        }
        return x;
    }
};

}  // namespace imix
