#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kgfuse/tensor.hpp"

namespace kgfuse {

/// Trainable tensor: value plus an accumulated gradient of identical shape.
/// Params mutate only through backward passes, zero_grad and the optimizer.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param() = default;
    Param(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
        grad = Tensor::zeros(value.shape());
    }

    void zero_grad() { std::fill(grad.values().begin(), grad.values().end(), 0.0); }
};

using ParamRefs = std::vector<Param*>;

inline void zero_grads(const ParamRefs& params) {
    for (Param* p : params) p->zero_grad();
}

/// Reverse-mode differentiation record. Every operation appends one node at
/// forward time; backward() walks the nodes in exact reverse recording order.
/// A tape is single-threaded and lives for one forward/backward pass.
class Tape {
public:
    struct Var {
        int id = -1;
        bool valid() const { return id >= 0; }
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // ---- leaves ----
    Var constant(Tensor value);
    /// Leaf bound to an external Param; backward() accumulates into p.grad.
    Var param(Param& p);

    // ---- primitives ----
    Var matmul(Var a, Var b);
    Var matvec(Var m, Var v);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var add_row_broadcast(Var m, Var row);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var relu(Var a);
    Var leaky_relu(Var a, double slope);
    Var slice1d(Var a, int from, int to);
    Var concat_vecs(std::span<const Var> parts);
    Var concat_cols(std::span<const Var> parts);
    Var concat_rows(std::span<const Var> parts);
    /// [m_i || m_g0 || m_g1 || m_g2 || m_g3] for every row i, globals taken
    /// from the same pre-concatenation input.
    Var global_concat(Var m, const std::array<int, 4>& globals);
    /// L[i][j] = rows[i] + cols[j]
    Var outer_sum(Var rows, Var cols);
    /// Per-row softmax of logits weighted by constant positive factors:
    /// out[i][j] = factors[i][j] * exp(L[i][j] - c_i) / sum_k factors[i][k] * exp(L[i][k] - c_i).
    Var row_softmax(Var logits, Tensor factors);
    Var mean_rows(Var m);
    Var sum(Var a);
    Var softmax(Var logits, const std::vector<bool>* mask = nullptr);
    Var cross_entropy(Var probs, int label);

    // ---- access ----
    const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    const Tensor& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }
    double scalar(Var v) const;
    std::size_t size() const { return nodes_.size(); }

    /// Seeds d(root)/d(root) = seed and propagates to every recorded node,
    /// then accumulates leaf gradients into their bound Params.
    void backward(Var root, double seed = 1.0);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&)> back; // empty for leaves
        Param* bound = nullptr;
    };

    Var push(Tensor value, std::function<void(Tape&)> back = {}, Param* bound = nullptr);
    Tensor& grad_mut(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }
    const Tensor& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }

    std::vector<Node> nodes_;
};

} // namespace kgfuse
