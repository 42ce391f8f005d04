#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "imix/error.hpp"
#include "imix/rng.hpp"
#include "imix/tape.hpp"

namespace imix {

// Builds a scalar loss over the given leaf nodes. The builder must be a
// pure function of the leaf values so it can be replayed for finite
// differences.
using GraphBuilder = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

namespace detail {

inline double eval_graph(const GraphBuilder& build, const std::vector<Tensor>& inputs) {
    Tape tape;
    std::vector<NodeId> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
    return tape.val(build(tape, leaves)).scalar();
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace detail

// Compares reverse-mode gradients against central finite differences for
// every element of every input. Returns the worst relative error.
inline double gradcheck(const GraphBuilder& build, std::vector<Tensor> inputs, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1e-3))
        throw ContractError("gradcheck: epsilon must be in (0, 1e-3]");
    Tape tape;
    std::vector<NodeId> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t, true));
    const NodeId loss = build(tape, leaves);
    const auto grads = tape.backward(loss);

    double worst = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Tensor& g = grads[static_cast<std::size_t>(leaves[i])];
        for (std::size_t k = 0; k < inputs[i].size(); ++k) {
            const double orig = inputs[i][k];
            inputs[i][k] = orig + epsilon;
            const double fp = detail::eval_graph(build, inputs);
            inputs[i][k] = orig - epsilon;
            const double fm = detail::eval_graph(build, inputs);
            inputs[i][k] = orig;
            const double fd = (fp - fm) / (2.0 * epsilon);
            const double ad = g.empty() ? 0.0 : g[k];
            worst = std::max(worst, detail::rel_err(ad, fd));
        }
    }
    return worst;
}

namespace detail {

// One random two-layer perceptron with a random activation and loss head.
// Relu preactivations are kept at least 10*epsilon away from the kink by
// redrawing biases when a preactivation lands too close.
struct RandomGraph {
    std::vector<Tensor> inputs;  // x, W1, b1, W2, b2 (+ target)
    GraphBuilder build;
};

inline RandomGraph make_random_graph(Rng& rng, double epsilon) {
    const std::size_t d0 = 1 + rng.below(7);  // dims <= 8
    const std::size_t d1 = 1 + rng.below(7);
    const std::size_t d2 = 1 + rng.below(7);
    const int act = static_cast<int>(rng.below(3));   // 0 relu, 1 tanh, 2 sigmoid
    const int head = static_cast<int>(rng.below(4));  // loss family

    for (int attempt = 0; attempt < 64; ++attempt) {
        Tensor x = Tensor::randn(1, d0, rng);
        Tensor w1 = Tensor::randn(d0, d1, rng, 0.7);
        Tensor b1 = Tensor::randn(1, d1, rng, 0.5);
        Tensor w2 = Tensor::randn(d1, d2, rng, 0.7);
        Tensor b2 = Tensor::randn(1, d2, rng, 0.5);
        Tensor target = Tensor::randn(1, d2, rng);
        if (head == 1) {  // one-hot target for cross entropy
            target = Tensor(1, d2, 0.0);
            target[rng.below(d2)] = 1.0;
        }

        if (act == 0) {  // kink safety check
            Tensor pre(1, d1, 0.0);
            for (std::size_t j = 0; j < d1; ++j) {
                double s = b1[j];
                for (std::size_t i = 0; i < d0; ++i) s += x[i] * w1.at(i, j);
                pre[j] = s;
            }
            bool safe = true;
            for (std::size_t j = 0; j < d1; ++j)
                if (std::abs(pre[j]) < 10.0 * epsilon) safe = false;
            if (!safe) continue;
        }

        GraphBuilder build = [act, head](Tape& t, const std::vector<NodeId>& in) {
            NodeId h = t.add(t.matmul(in[0], in[1]), in[2]);
            if (act == 0) h = t.relu(h);
            else if (act == 1) h = t.tanh(h);
            else h = t.sigmoid(h);
            NodeId z = t.add(t.matmul(h, in[3]), in[4]);
            switch (head) {
                case 0: return t.mse(z, in[5]);
                case 1: return t.cross_entropy_with_logits(z, in[5]);
                case 2: return t.mean(t.square(z));
                default: return t.mean(t.cosine_similarity(t.l2_normalize(z), in[5]));
            }
        };
        return RandomGraph{{x, w1, b1, w2, b2, target}, std::move(build)};
    }
    throw ContractError("gradcheck: could not build a kink-safe random graph");
}

}  // namespace detail

// Builds `trials` random graphs and reports the worst relative error of
// reverse-mode gradients versus central differences.
inline double check_gradients(int trials, std::uint64_t seed, double epsilon = 1e-5) {
    if (trials < 1) throw ContractError("check_gradients: trials must be >= 1");
    Rng rng(seed, 77);
    double worst = 0.0;
    for (int t = 0; t < trials; ++t) {
        auto g = detail::make_random_graph(rng, epsilon);
        worst = std::max(worst, gradcheck(g.build, g.inputs, epsilon));
    }
    return worst;
}

}  // namespace imix
