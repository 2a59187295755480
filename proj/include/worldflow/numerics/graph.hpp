// Copyright (C) 2026 The worldflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "worldflow/numerics/ndarray.hpp"

#include <deque>
#include <functional>
#include <string>
#include <utility>

namespace worldflow {

template <typename S>
class Graph;

/// Handle to a value recorded on a Graph.
template <typename S>
struct Var {
    Graph<S>* graph = nullptr;
    std::size_t id = 0;

    const NdArray<S>& value() const { return graph->value(*this); }
    const Shape& shape() const { return value().shape(); }
};

/// Tape of recorded primitive ops. Node ids are assigned in creation order,
/// which is a topological order, so backward is a single reverse sweep and
/// gradient accumulation order is fixed.
template <typename S>
class Graph {
   public:
    using BackwardFn = std::function<void(Graph&, const NdArray<S>& upstream)>;

    Graph() = default;
    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    Var<S> param(NdArray<S> value) { return leaf(std::move(value), true); }
    Var<S> constant(NdArray<S> value) { return leaf(std::move(value), false); }

    Var<S> leaf(NdArray<S> value, bool requires_grad) {
        check(value, "leaf");
        nodes_.push_back(Node{std::move(value), {}, requires_grad, {}, "leaf"});
        return Var<S>{this, nodes_.size() - 1};
    }

    /// Records an op result. The backward rule is kept only when some input
    /// needs a gradient.
    Var<S> record(const char* op, NdArray<S> value, bool requires_grad, BackwardFn backward) {
        check(value, op);
        nodes_.push_back(Node{std::move(value), {}, requires_grad, requires_grad ? std::move(backward) : BackwardFn{}, op});
        return Var<S>{this, nodes_.size() - 1};
    }

    const NdArray<S>& value(Var<S> v) const { return nodes_.at(v.id).value; }
    const NdArray<S>& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(Var<S> v) const { return nodes_.at(v.id).requires_grad; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

    /// Gradient buffer of a node, zero-initialized on first touch.
    NdArray<S>& grad_buffer(std::size_t id) {
        Node& n = nodes_.at(id);
        if (n.grad.shape() != n.value.shape()) n.grad = NdArray<S>(n.value.shape());
        return n.grad;
    }

    /// Gradient of the last backward() output with respect to v; zeros if v
    /// was unreachable.
    NdArray<S> grad(Var<S> v) const {
        const Node& n = nodes_.at(v.id);
        if (n.grad.shape() != n.value.shape()) return NdArray<S>(n.value.shape());
        return n.grad;
    }

    void backward(Var<S> output) {
        if (value(output).size() != 1) {
            throw std::invalid_argument("backward: output must be scalar, got shape " + shape_str(value(output).shape()));
        }
        for (auto& n : nodes_) n.grad = NdArray<S>();
        grad_buffer(output.id)[0] = S(1);
        for (std::size_t i = output.id + 1; i-- > 0;) {
            Node& n = nodes_[i];
            if (!n.backward || n.grad.empty()) continue;
            n.backward(*this, n.grad);
        }
    }

    /// Label attached to NumericFault messages (e.g. "layer 2").
    void set_scope(std::string scope) { scope_ = std::move(scope); }
    const std::string& scope() const noexcept { return scope_; }

    void set_check_finite(bool on) noexcept { check_finite_ = on; }
    std::size_t size() const noexcept { return nodes_.size(); }

   private:
    struct Node {
        NdArray<S> value;
        NdArray<S> grad;
        bool requires_grad = false;
        BackwardFn backward;
        const char* op = "";
    };

    void check(const NdArray<S>& value, const char* op) const {
        if (check_finite_ && !value.all_finite()) throw NumericFault(op, scope_);
    }

    std::deque<Node> nodes_;
    std::string scope_;
    bool check_finite_ = true;
};

}  // namespace worldflow
