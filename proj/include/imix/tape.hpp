#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "imix/error.hpp"
#include "imix/tensor.hpp"

namespace imix {

using NodeId = int;

enum class Op {
    Leaf,
    Add,        // elementwise; rhs [1xC] broadcasts over rows
    Sub,
    Mul,        // elementwise; rhs [Bx1] broadcasts over cols
    MatMul,
    Concat,     // along columns
    SliceCols,
    RowDot,     // per-row dot product -> [Bx1]
    Relu,
    Sigmoid,
    Tanh,
    SoftmaxT,   // row-wise softmax of x / temperature
    L2Normalize,// row-wise; near-zero rows map to zero
    Sum,
    Mean,
    Square,
    Sqrt,
    Log,
    Scale,      // c * x
    AddScalar,  // x + c
    CeWithLogits,   // mean over rows of logsumexp(z) - z.y
    BceWithLogits,  // mean over entries
    Mse,            // mean over entries of (a-b)^2
    CosineSim,      // mean over rows of cos(a_r, b_r); zero rows give 0
    EuclideanDist,  // per-row distance -> [Bx1]
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::MatMul: return "matmul";
        case Op::Concat: return "concat";
        case Op::SliceCols: return "slice-cols";
        case Op::RowDot: return "row-dot";
        case Op::Relu: return "relu";
        case Op::Sigmoid: return "sigmoid";
        case Op::Tanh: return "tanh";
        case Op::SoftmaxT: return "softmax-t";
        case Op::L2Normalize: return "l2-normalize";
        case Op::Sum: return "sum";
        case Op::Mean: return "mean";
        case Op::Square: return "square";
        case Op::Sqrt: return "sqrt";
        case Op::Log: return "log";
        case Op::Scale: return "scale";
        case Op::AddScalar: return "add-scalar";
        case Op::CeWithLogits: return "cross-entropy-with-logits";
        case Op::BceWithLogits: return "binary-cross-entropy-with-logits";
        case Op::Mse: return "mse";
        case Op::CosineSim: return "cosine-similarity";
        case Op::EuclideanDist: return "euclidean-distance";
    }
    return "?";
}

constexpr double kNormEps = 1e-12;

// Append-only record of primitive operations with cached values.
// Nodes are created in topological order by construction; backward walks
// the record once in reverse and accumulates gradients into every node
// reachable from a grad-requiring leaf.
class Tape {
public:
    struct Node {
        Op op;
        std::vector<NodeId> in;
        double c = 0.0;  // temperature / scale / margin constant
        int i0 = 0;      // slice start
        int i1 = 0;      // slice length
        bool needs_grad = false;
    };

    NodeId leaf(Tensor value, bool needs_grad = false) {
        nodes_.push_back(Node{Op::Leaf, {}, 0.0, 0, 0, needs_grad});
        vals_.push_back(std::move(value));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    NodeId add(NodeId a, NodeId b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb) && !(tb.rows() == 1 && tb.cols() == ta.cols()))
            shape_fail(Op::Add, ta, tb);
        Tensor out = ta;
        if (ta.same_shape(tb)) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += tb[i];
        } else {
            for (std::size_t r = 0; r < ta.rows(); ++r)
                for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, c) += tb[c];
        }
        return record(Op::Add, {a, b}, std::move(out));
    }

    NodeId sub(NodeId a, NodeId b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) shape_fail(Op::Sub, ta, tb);
        Tensor out = ta;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] -= tb[i];
        return record(Op::Sub, {a, b}, std::move(out));
    }

    NodeId mul(NodeId a, NodeId b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb) && !tb.is_scalar() && !(tb.cols() == 1 && tb.rows() == ta.rows()))
            shape_fail(Op::Mul, ta, tb);
        Tensor out = ta;
        if (ta.same_shape(tb)) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] *= tb[i];
        } else if (tb.is_scalar()) {
            for (auto& x : out.data()) x *= tb[0];
        } else {
            for (std::size_t r = 0; r < ta.rows(); ++r)
                for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, c) *= tb.at(r, 0);
        }
        return record(Op::Mul, {a, b}, std::move(out));
    }

    NodeId matmul(NodeId a, NodeId b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (ta.cols() != tb.rows()) shape_fail(Op::MatMul, ta, tb);
        Tensor out(ta.rows(), tb.cols(), 0.0);
        for (std::size_t i = 0; i < ta.rows(); ++i)
            for (std::size_t k = 0; k < ta.cols(); ++k) {
                const double aik = ta.at(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < tb.cols(); ++j) out.at(i, j) += aik * tb.at(k, j);
            }
        return record(Op::MatMul, {a, b}, std::move(out));
    }

    NodeId concat(const std::vector<NodeId>& parts) {
        if (parts.empty()) throw ContractError("concat: no inputs");
        std::size_t rows = val(parts[0]).rows();
        std::size_t cols = 0;
        for (NodeId p : parts) {
            if (val(p).rows() != rows) shape_fail(Op::Concat, val(parts[0]), val(p));
            cols += val(p).cols();
        }
        Tensor out(rows, cols);
        std::size_t off = 0;
        for (NodeId p : parts) {
            const Tensor& tp = val(p);
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < tp.cols(); ++c) out.at(r, off + c) = tp.at(r, c);
            off += tp.cols();
        }
        return record(Op::Concat, parts, std::move(out));
    }

    NodeId slice_cols(NodeId a, std::size_t start, std::size_t len) {
        const Tensor& ta = val(a);
        if (start + len > ta.cols() || len == 0)
            throw ContractError("slice-cols: [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") out of " + ta.shape_str());
        Tensor out(ta.rows(), len);
        for (std::size_t r = 0; r < ta.rows(); ++r)
            for (std::size_t c = 0; c < len; ++c) out.at(r, c) = ta.at(r, start + c);
        NodeId id = record(Op::SliceCols, {a}, std::move(out));
        nodes_[id].i0 = static_cast<int>(start);
        nodes_[id].i1 = static_cast<int>(len);
        return id;
    }

    NodeId row_dot(NodeId a, NodeId b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) shape_fail(Op::RowDot, ta, tb);
        Tensor out(ta.rows(), 1, 0.0);
        for (std::size_t r = 0; r < ta.rows(); ++r)
            for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, 0) += ta.at(r, c) * tb.at(r, c);
        return record(Op::RowDot, {a, b}, std::move(out));
    }

    NodeId relu(NodeId a) {
        Tensor out = val(a);
        for (auto& x : out.data()) x = x > 0.0 ? x : 0.0;
        return record(Op::Relu, {a}, std::move(out));
    }

    NodeId sigmoid(NodeId a) {
        Tensor out = val(a);
        for (auto& x : out.data()) x = stable_sigmoid(x);
        return record(Op::Sigmoid, {a}, std::move(out));
    }

    NodeId tanh(NodeId a) {
        Tensor out = val(a);
        for (auto& x : out.data()) x = std::tanh(x);
        return record(Op::Tanh, {a}, std::move(out));
    }

    NodeId softmax_t(NodeId a, double temperature) {
        if (!(temperature > 0.0))
            throw ConfigError("softmax-t: temperature must be > 0, got " + std::to_string(temperature));
        const Tensor& ta = val(a);
        Tensor out = ta;
        for (std::size_t r = 0; r < ta.rows(); ++r) {
            double mx = -1e308;
            for (std::size_t c = 0; c < ta.cols(); ++c) mx = std::max(mx, ta.at(r, c) / temperature);
            double z = 0.0;
            for (std::size_t c = 0; c < ta.cols(); ++c) {
                out.at(r, c) = std::exp(ta.at(r, c) / temperature - mx);
                z += out.at(r, c);
            }
            for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, c) /= z;
        }
        NodeId id = record(Op::SoftmaxT, {a}, std::move(out));
        nodes_[id].c = temperature;
        return id;
    }

    NodeId l2_normalize(NodeId a) {
        const Tensor& ta = val(a);
        Tensor out = ta;
        for (std::size_t r = 0; r < ta.rows(); ++r) {
            double n = row_norm(ta, r);
            if (n < kNormEps) {
                for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, c) = 0.0;
            } else {
                for (std::size_t c = 0; c < ta.cols(); ++c) out.at(r, c) /= n;
            }
        }
        return record(Op::L2Normalize, {a}, std::move(out));
    }

    NodeId sum(NodeId a) {
        double s = 0.0;
        for (double x : val(a).data()) s += x;
        return record(Op::Sum, {a}, Tensor(1, 1, s));
    }

    NodeId mean(NodeId a) {
        double s = 0.0;
        for (double x : val(a).data()) s += x;
        return record(Op::Mean, {a}, Tensor(1, 1, s / static_cast<double>(val(a).size())));
    }

    NodeId square(NodeId a) {
        Tensor out = val(a);
        for (auto& x : out.data()) x *= x;
        return record(Op::Square, {a}, std::move(out));
    }

    NodeId sqrt(NodeId a) {
        Tensor out = val(a);
        for (auto& x : out.data()) {
            if (x < 0.0) throw DomainError("sqrt of negative value " + std::to_string(x));
            x = std::sqrt(x);
        }
        return record(Op::Sqrt, {a}, std::move(out));
    }

    NodeId log(NodeId a) {
        Tensor out = val(a);
        for (auto& x : out.data()) {
            if (x <= 0.0) throw DomainError("log of non-positive value " + std::to_string(x));
            x = std::log(x);
        }
        return record(Op::Log, {a}, std::move(out));
    }

    NodeId scale(NodeId a, double c) {
        Tensor out = val(a);
        for (auto& x : out.data()) x *= c;
        NodeId id = record(Op::Scale, {a}, std::move(out));
        nodes_[id].c = c;
        return id;
    }

    NodeId add_scalar(NodeId a, double c) {
        Tensor out = val(a);
        for (auto& x : out.data()) x += c;
        NodeId id = record(Op::AddScalar, {a}, std::move(out));
        nodes_[id].c = c;
        return id;
    }

    // Mean over rows of logsumexp(z_r) - z_r . y_r. Targets may be soft.
    NodeId cross_entropy_with_logits(NodeId logits, NodeId targets) {
        const Tensor& z = val(logits);
        const Tensor& y = val(targets);
        if (!z.same_shape(y)) shape_fail(Op::CeWithLogits, z, y);
        double loss = 0.0;
        for (std::size_t r = 0; r < z.rows(); ++r) {
            double mx = -1e308;
            for (std::size_t c = 0; c < z.cols(); ++c) mx = std::max(mx, z.at(r, c));
            double se = 0.0, dot = 0.0;
            for (std::size_t c = 0; c < z.cols(); ++c) {
                se += std::exp(z.at(r, c) - mx);
                dot += z.at(r, c) * y.at(r, c);
            }
            loss += mx + std::log(se) - dot;
        }
        return record(Op::CeWithLogits, {logits, targets},
                      Tensor(1, 1, loss / static_cast<double>(z.rows())));
    }

    // Mean over entries of max(z,0) - z*y + log1p(exp(-|z|)).
    NodeId bce_with_logits(NodeId logits, NodeId targets) {
        const Tensor& z = val(logits);
        const Tensor& y = val(targets);
        if (!z.same_shape(y)) shape_fail(Op::BceWithLogits, z, y);
        double loss = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            loss += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
        return record(Op::BceWithLogits, {logits, targets},
                      Tensor(1, 1, loss / static_cast<double>(z.size())));
    }

    NodeId mse(NodeId a, NodeId b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) shape_fail(Op::Mse, ta, tb);
        double loss = 0.0;
        for (std::size_t i = 0; i < ta.size(); ++i) {
            const double d = ta[i] - tb[i];
            loss += d * d;
        }
        return record(Op::Mse, {a, b}, Tensor(1, 1, loss / static_cast<double>(ta.size())));
    }

    // Mean over rows of cos(a_r, b_r); a row with norm < kNormEps on either
    // side contributes similarity 0 and zero gradient.
    NodeId cosine_similarity(NodeId a, NodeId b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) shape_fail(Op::CosineSim, ta, tb);
        double s = 0.0;
        for (std::size_t r = 0; r < ta.rows(); ++r) {
            const double na = row_norm(ta, r), nb = row_norm(tb, r);
            if (na < kNormEps || nb < kNormEps) continue;
            double dot = 0.0;
            for (std::size_t c = 0; c < ta.cols(); ++c) dot += ta.at(r, c) * tb.at(r, c);
            s += dot / (na * nb);
        }
        return record(Op::CosineSim, {a, b}, Tensor(1, 1, s / static_cast<double>(ta.rows())));
    }

    // Per-row Euclidean distance -> [Bx1]; gradient is 0 at coincident rows.
    NodeId euclidean_distance(NodeId a, NodeId b) {
        const Tensor& ta = val(a);
        const Tensor& tb = val(b);
        if (!ta.same_shape(tb)) shape_fail(Op::EuclideanDist, ta, tb);
        Tensor out(ta.rows(), 1, 0.0);
        for (std::size_t r = 0; r < ta.rows(); ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < ta.cols(); ++c) {
                const double d = ta.at(r, c) - tb.at(r, c);
                s += d * d;
            }
            out.at(r, 0) = std::sqrt(s);
        }
        return record(Op::EuclideanDist, {a, b}, std::move(out));
    }

    const Tensor& val(NodeId id) const { return vals_[static_cast<std::size_t>(id)]; }
    std::size_t size() const { return nodes_.size(); }
    const Node& node(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }

    // Reverse pass from a scalar loss. Returns one gradient slot per node;
    // slots not reached from a grad-requiring leaf stay empty.
    std::vector<Tensor> backward(NodeId loss) const {
        if (!val(loss).is_scalar())
            throw ContractError("backward: loss must be scalar, got " + val(loss).shape_str());
        std::vector<Tensor> grads(nodes_.size());
        if (!nodes_[static_cast<std::size_t>(loss)].needs_grad) return grads;
        grads[static_cast<std::size_t>(loss)] = Tensor(1, 1, 1.0);
        for (NodeId id = loss; id >= 0; --id) {
            const Node& n = nodes_[static_cast<std::size_t>(id)];
            Tensor& g = grads[static_cast<std::size_t>(id)];
            if (g.empty() || !n.needs_grad || n.op == Op::Leaf) continue;
            propagate(id, n, g, grads);
        }
        return grads;
    }

private:
    NodeId record(Op op, std::vector<NodeId> in, Tensor out) {
        bool ng = false;
        for (NodeId i : in) ng = ng || nodes_[static_cast<std::size_t>(i)].needs_grad;
        nodes_.push_back(Node{op, std::move(in), 0.0, 0, 0, ng});
        vals_.push_back(std::move(out));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    [[noreturn]] void shape_fail(Op op, const Tensor& a, const Tensor& b) const {
        throw ShapeError(std::string(op_name(op)) + ": incompatible shapes " + a.shape_str() +
                         " and " + b.shape_str());
    }

    static double stable_sigmoid(double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
    }

    static double row_norm(const Tensor& t, std::size_t r) {
        double s = 0.0;
        for (std::size_t c = 0; c < t.cols(); ++c) s += t.at(r, c) * t.at(r, c);
        return std::sqrt(s);
    }

    Tensor& grad_slot(std::vector<Tensor>& grads, NodeId id) const {
        Tensor& g = grads[static_cast<std::size_t>(id)];
        if (g.empty()) g = Tensor(val(id).rows(), val(id).cols(), 0.0);
        return g;
    }

    void accum(std::vector<Tensor>& grads, NodeId id, const Tensor& delta) const {
        if (!nodes_[static_cast<std::size_t>(id)].needs_grad) return;
        Tensor& g = grad_slot(grads, id);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
    }

    void propagate(NodeId id, const Node& n, const Tensor& g, std::vector<Tensor>& grads) const;

    std::vector<Node> nodes_;
    std::vector<Tensor> vals_;
};

inline void Tape::propagate(NodeId id, const Node& n, const Tensor& g,
                            std::vector<Tensor>& grads) const {
    const Tensor& out = val(id);
    switch (n.op) {
        case Op::Leaf:
            break;
        case Op::Add: {
            accum(grads, n.in[0], g);
            const Tensor& tb = val(n.in[1]);
            if (tb.same_shape(out)) {
                accum(grads, n.in[1], g);
            } else if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                Tensor db(1, tb.cols(), 0.0);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c) db[c] += g.at(r, c);
                accum(grads, n.in[1], db);
            }
            break;
        }
        case Op::Sub: {
            accum(grads, n.in[0], g);
            if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                Tensor db = g;
                for (auto& x : db.data()) x = -x;
                accum(grads, n.in[1], db);
            }
            break;
        }
        case Op::Mul: {
            const Tensor& ta = val(n.in[0]);
            const Tensor& tb = val(n.in[1]);
            if (tb.is_scalar() && !ta.is_scalar()) {
                if (nodes_[static_cast<std::size_t>(n.in[0])].needs_grad) {
                    Tensor da = g;
                    for (auto& x : da.data()) x *= tb[0];
                    accum(grads, n.in[0], da);
                }
                if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * ta[i];
                    accum(grads, n.in[1], Tensor(1, 1, s));
                }
            } else if (ta.same_shape(tb)) {
                if (nodes_[static_cast<std::size_t>(n.in[0])].needs_grad) {
                    Tensor da = g;
                    for (std::size_t i = 0; i < da.size(); ++i) da[i] *= tb[i];
                    accum(grads, n.in[0], da);
                }
                if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                    Tensor db = g;
                    for (std::size_t i = 0; i < db.size(); ++i) db[i] *= ta[i];
                    accum(grads, n.in[1], db);
                }
            } else {  // tb is [Bx1]
                if (nodes_[static_cast<std::size_t>(n.in[0])].needs_grad) {
                    Tensor da = g;
                    for (std::size_t r = 0; r < da.rows(); ++r)
                        for (std::size_t c = 0; c < da.cols(); ++c) da.at(r, c) *= tb.at(r, 0);
                    accum(grads, n.in[0], da);
                }
                if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                    Tensor db(tb.rows(), 1, 0.0);
                    for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < g.cols(); ++c)
                            db.at(r, 0) += g.at(r, c) * ta.at(r, c);
                    accum(grads, n.in[1], db);
                }
            }
            break;
        }
        case Op::MatMul: {
            const Tensor& ta = val(n.in[0]);
            const Tensor& tb = val(n.in[1]);
            if (nodes_[static_cast<std::size_t>(n.in[0])].needs_grad) {
                Tensor da(ta.rows(), ta.cols(), 0.0);
                for (std::size_t i = 0; i < ta.rows(); ++i)
                    for (std::size_t j = 0; j < tb.cols(); ++j) {
                        const double gij = g.at(i, j);
                        if (gij == 0.0) continue;
                        for (std::size_t k = 0; k < ta.cols(); ++k)
                            da.at(i, k) += gij * tb.at(k, j);
                    }
                accum(grads, n.in[0], da);
            }
            if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                Tensor db(tb.rows(), tb.cols(), 0.0);
                for (std::size_t i = 0; i < ta.rows(); ++i)
                    for (std::size_t k = 0; k < ta.cols(); ++k) {
                        const double aik = ta.at(i, k);
                        if (aik == 0.0) continue;
                        for (std::size_t j = 0; j < tb.cols(); ++j)
                            db.at(k, j) += aik * g.at(i, j);
                    }
                accum(grads, n.in[1], db);
            }
            break;
        }
        case Op::Concat: {
            std::size_t off = 0;
            for (NodeId p : n.in) {
                const Tensor& tp = val(p);
                if (nodes_[static_cast<std::size_t>(p)].needs_grad) {
                    Tensor dp(tp.rows(), tp.cols());
                    for (std::size_t r = 0; r < tp.rows(); ++r)
                        for (std::size_t c = 0; c < tp.cols(); ++c)
                            dp.at(r, c) = g.at(r, off + c);
                    accum(grads, p, dp);
                }
                off += tp.cols();
            }
            break;
        }
        case Op::SliceCols: {
            const Tensor& ta = val(n.in[0]);
            Tensor da(ta.rows(), ta.cols(), 0.0);
            for (std::size_t r = 0; r < out.rows(); ++r)
                for (std::size_t c = 0; c < out.cols(); ++c)
                    da.at(r, static_cast<std::size_t>(n.i0) + c) = g.at(r, c);
            accum(grads, n.in[0], da);
            break;
        }
        case Op::RowDot: {
            const Tensor& ta = val(n.in[0]);
            const Tensor& tb = val(n.in[1]);
            if (nodes_[static_cast<std::size_t>(n.in[0])].needs_grad) {
                Tensor da = tb;
                for (std::size_t r = 0; r < da.rows(); ++r)
                    for (std::size_t c = 0; c < da.cols(); ++c) da.at(r, c) *= g.at(r, 0);
                accum(grads, n.in[0], da);
            }
            if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                Tensor db = ta;
                for (std::size_t r = 0; r < db.rows(); ++r)
                    for (std::size_t c = 0; c < db.cols(); ++c) db.at(r, c) *= g.at(r, 0);
                accum(grads, n.in[1], db);
            }
            break;
        }
        case Op::Relu: {
            const Tensor& ta = val(n.in[0]);
            Tensor da = g;
            for (std::size_t i = 0; i < da.size(); ++i)
                if (ta[i] <= 0.0) da[i] = 0.0;  // derivative at the kink defined as 0
            accum(grads, n.in[0], da);
            break;
        }
        case Op::Sigmoid: {
            Tensor da = g;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= out[i] * (1.0 - out[i]);
            accum(grads, n.in[0], da);
            break;
        }
        case Op::Tanh: {
            Tensor da = g;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 1.0 - out[i] * out[i];
            accum(grads, n.in[0], da);
            break;
        }
        case Op::SoftmaxT: {
            Tensor da(out.rows(), out.cols());
            for (std::size_t r = 0; r < out.rows(); ++r) {
                double dot = 0.0;
                for (std::size_t c = 0; c < out.cols(); ++c) dot += g.at(r, c) * out.at(r, c);
                for (std::size_t c = 0; c < out.cols(); ++c)
                    da.at(r, c) = out.at(r, c) * (g.at(r, c) - dot) / n.c;
            }
            accum(grads, n.in[0], da);
            break;
        }
        case Op::L2Normalize: {
            const Tensor& ta = val(n.in[0]);
            Tensor da(ta.rows(), ta.cols(), 0.0);
            for (std::size_t r = 0; r < ta.rows(); ++r) {
                double nn = 0.0;
                for (std::size_t c = 0; c < ta.cols(); ++c) nn += ta.at(r, c) * ta.at(r, c);
                nn = std::sqrt(nn);
                if (nn < kNormEps) continue;
                double dot = 0.0;
                for (std::size_t c = 0; c < ta.cols(); ++c) dot += g.at(r, c) * out.at(r, c);
                for (std::size_t c = 0; c < ta.cols(); ++c)
                    da.at(r, c) = (g.at(r, c) - out.at(r, c) * dot) / nn;
            }
            accum(grads, n.in[0], da);
            break;
        }
        case Op::Sum: {
            const Tensor& ta = val(n.in[0]);
            accum(grads, n.in[0], Tensor(ta.rows(), ta.cols(), g.scalar()));
            break;
        }
        case Op::Mean: {
            const Tensor& ta = val(n.in[0]);
            accum(grads, n.in[0],
                  Tensor(ta.rows(), ta.cols(), g.scalar() / static_cast<double>(ta.size())));
            break;
        }
        case Op::Square: {
            const Tensor& ta = val(n.in[0]);
            Tensor da = g;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 2.0 * ta[i];
            accum(grads, n.in[0], da);
            break;
        }
        case Op::Sqrt: {
            Tensor da = g;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] *= 0.5 / out[i];
            accum(grads, n.in[0], da);
            break;
        }
        case Op::Log: {
            const Tensor& ta = val(n.in[0]);
            Tensor da = g;
            for (std::size_t i = 0; i < da.size(); ++i) da[i] /= ta[i];
            accum(grads, n.in[0], da);
            break;
        }
        case Op::Scale: {
            Tensor da = g;
            for (auto& x : da.data()) x *= n.c;
            accum(grads, n.in[0], da);
            break;
        }
        case Op::AddScalar:
            accum(grads, n.in[0], g);
            break;
        case Op::CeWithLogits: {
            const Tensor& z = val(n.in[0]);
            const Tensor& y = val(n.in[1]);
            const double gs = g.scalar() / static_cast<double>(z.rows());
            if (nodes_[static_cast<std::size_t>(n.in[0])].needs_grad) {
                Tensor dz(z.rows(), z.cols());
                for (std::size_t r = 0; r < z.rows(); ++r) {
                    double mx = -1e308;
                    for (std::size_t c = 0; c < z.cols(); ++c) mx = std::max(mx, z.at(r, c));
                    double se = 0.0;
                    for (std::size_t c = 0; c < z.cols(); ++c) se += std::exp(z.at(r, c) - mx);
                    for (std::size_t c = 0; c < z.cols(); ++c)
                        dz.at(r, c) = gs * (std::exp(z.at(r, c) - mx) / se - y.at(r, c));
                }
                accum(grads, n.in[0], dz);
            }
            if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                Tensor dy = z;
                for (auto& x : dy.data()) x *= -gs;
                accum(grads, n.in[1], dy);
            }
            break;
        }
        case Op::BceWithLogits: {
            const Tensor& z = val(n.in[0]);
            const Tensor& y = val(n.in[1]);
            const double gs = g.scalar() / static_cast<double>(z.size());
            if (nodes_[static_cast<std::size_t>(n.in[0])].needs_grad) {
                Tensor dz = z;
                for (std::size_t i = 0; i < dz.size(); ++i)
                    dz[i] = gs * (stable_sigmoid(z[i]) - y[i]);
                accum(grads, n.in[0], dz);
            }
            if (nodes_[static_cast<std::size_t>(n.in[1])].needs_grad) {
                Tensor dy = z;
                for (auto& x : dy.data()) x *= -gs;
                accum(grads, n.in[1], dy);
            }
            break;
        }
        case Op::Mse: {
            const Tensor& ta = val(n.in[0]);
            const Tensor& tb = val(n.in[1]);
            const double gs = 2.0 * g.scalar() / static_cast<double>(ta.size());
            Tensor d = ta;
            for (std::size_t i = 0; i < d.size(); ++i) d[i] = gs * (ta[i] - tb[i]);
            accum(grads, n.in[0], d);
            for (auto& x : d.data()) x = -x;
            accum(grads, n.in[1], d);
            break;
        }
        case Op::CosineSim: {
            const Tensor& ta = val(n.in[0]);
            const Tensor& tb = val(n.in[1]);
            const double gs = g.scalar() / static_cast<double>(ta.rows());
            Tensor da(ta.rows(), ta.cols(), 0.0);
            Tensor db(tb.rows(), tb.cols(), 0.0);
            for (std::size_t r = 0; r < ta.rows(); ++r) {
                const double na = row_norm(ta, r), nb = row_norm(tb, r);
                if (na < kNormEps || nb < kNormEps) continue;
                double dot = 0.0;
                for (std::size_t c = 0; c < ta.cols(); ++c) dot += ta.at(r, c) * tb.at(r, c);
                const double cs = dot / (na * nb);
                for (std::size_t c = 0; c < ta.cols(); ++c) {
                    da.at(r, c) = gs * (tb.at(r, c) / (na * nb) - cs * ta.at(r, c) / (na * na));
                    db.at(r, c) = gs * (ta.at(r, c) / (na * nb) - cs * tb.at(r, c) / (nb * nb));
                }
            }
            accum(grads, n.in[0], da);
            accum(grads, n.in[1], db);
            break;
        }
        case Op::EuclideanDist: {
            const Tensor& ta = val(n.in[0]);
            const Tensor& tb = val(n.in[1]);
            Tensor da(ta.rows(), ta.cols(), 0.0);
            for (std::size_t r = 0; r < ta.rows(); ++r) {
                const double d = out.at(r, 0);
                if (d < kNormEps) continue;
                const double gr = g.at(r, 0) / d;
                for (std::size_t c = 0; c < ta.cols(); ++c)
                    da.at(r, c) = gr * (ta.at(r, c) - tb.at(r, c));
            }
            accum(grads, n.in[0], da);
            for (auto& x : da.data()) x = -x;
            accum(grads, n.in[1], da);
            break;
        }
    }
}

}  // namespace imix
