#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "statenet/array.hpp"

namespace statenet::ad {

namespace detail {
inline thread_local int no_grad_depth = 0;
}

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

// While alive, newly built nodes record neither parents nor backward rules:
// pure inference, no graph growth across turns.
class NoGradGuard {
public:
    NoGradGuard() { ++detail::no_grad_depth; }
    ~NoGradGuard() { --detail::no_grad_depth; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

// One vertex of the computation DAG. Value and gradient always have the same
// shape; the gradient starts zeroed and is accumulated into by backward().
// Trainable leaves keep accumulating across backward calls until explicitly
// zeroed (ParameterSet::zero_gradients); intermediate nodes are rebuilt per
// forward pass.
template <typename T>
class Node {
public:
    struct Data {
        Array<T> value;
        Array<T> grad;
        bool trainable = false;
        bool needs_grad = false;
        std::vector<std::shared_ptr<Data>> parents;
        // Pulls this node's accumulated gradient into the parents' gradients.
        std::function<void(Data&)> backward_fn;
    };

    Node() = default;
    explicit Node(std::shared_ptr<Data> d) : data_(std::move(d)) {}

    static Node constant(Array<T> value) {
        auto d = std::make_shared<Data>();
        d->grad = Array<T>::zeros(value.shape);
        d->value = std::move(value);
        return Node(std::move(d));
    }

    static Node parameter(Array<T> value) {
        Node n = constant(std::move(value));
        n.data_->trainable = true;
        n.data_->needs_grad = true;
        return n;
    }

    bool defined() const { return static_cast<bool>(data_); }
    const Array<T>& value() const { return data_->value; }
    Array<T>& value() { return data_->value; }
    const Array<T>& grad() const { return data_->grad; }
    Array<T>& grad() { return data_->grad; }
    bool trainable() const { return data_->trainable; }
    bool needs_grad() const { return data_->needs_grad; }

    void zero_grad() { data_->grad.fill(T(0)); }

    const std::shared_ptr<Data>& impl() const { return data_; }

private:
    std::shared_ptr<Data> data_;
};

namespace detail {

// Builds an op result node. Parents and the backward rule are dropped when
// gradients are globally disabled or no parent needs them.
template <typename T>
Node<T> make_op_node(Array<T> value,
                     std::vector<std::shared_ptr<typename Node<T>::Data>> parents,
                     std::function<void(typename Node<T>::Data&)> backward_fn) {
    auto d = std::make_shared<typename Node<T>::Data>();
    d->grad = Array<T>::zeros(value.shape);
    d->value = std::move(value);
    bool track = false;
    if (grad_enabled()) {
        for (const auto& p : parents)
            if (p->needs_grad) { track = true; break; }
    }
    if (track) {
        d->needs_grad = true;
        d->parents = std::move(parents);
        d->backward_fn = std::move(backward_fn);
    }
    return Node<T>(std::move(d));
}

} // namespace detail

// Reverse-mode sweep from a scalar loss. Every node in the needs_grad
// subgraph is visited exactly once, in reverse topological order. Seeds the
// loss gradient with 1 and accumulates (does not overwrite) gradients, so two
// backward calls without zeroing double the leaf gradients.
template <typename T>
void backward(const Node<T>& loss) {
    if (!loss.defined()) throw ShapeError("backward: undefined node");
    if (loss.value().numel() != 1)
        throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.value().shape));

    using Data = typename Node<T>::Data;
    std::vector<Data*> order;
    std::unordered_set<Data*> visited;
    // Iterative post-order DFS over parents.
    std::vector<std::pair<Data*, std::size_t>> stack;
    if (loss.impl()->needs_grad) stack.emplace_back(loss.impl().get(), 0);
    visited.insert(loss.impl().get());
    while (!stack.empty()) {
        auto& [node, next_child] = stack.back();
        if (next_child < node->parents.size()) {
            Data* child = node->parents[next_child++].get();
            if (child->needs_grad && visited.insert(child).second)
                stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.impl()->grad.data[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Data* node = *it;
        if (node->backward_fn) node->backward_fn(*node);
    }
}

} // namespace statenet::ad
