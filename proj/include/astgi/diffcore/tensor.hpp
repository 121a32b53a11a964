#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "astgi/errors.hpp"

namespace astgi {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

namespace detail {

inline bool& grad_enabled_flag() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
    ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

template <typename Real>
struct Node {
    Shape shape;
    std::vector<Real> value;
    std::vector<Real> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), Real(0));
    }
};

/// Dense row-major real array with an optional slot on the reverse-mode tape.
/// Copies share the underlying node; use `detach()` for an independent value copy.
template <typename Real>
class Tensor {
public:
    using value_type = Real;
    using NodePtr = std::shared_ptr<Node<Real>>;

    Tensor() = default;

    Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false)
        : node_(std::make_shared<Node<Real>>()) {
        if (shape_size(shape) != values.size()) {
            throw DimensionError("tensor shape " + shape_string(shape) + " holds " +
                                 std::to_string(shape_size(shape)) + " values, got " +
                                 std::to_string(values.size()));
        }
        node_->shape = std::move(shape);
        node_->value = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        const auto n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<Real>(n, Real(0)), requires_grad);
    }

    static Tensor full(Shape shape, Real v) {
        const auto n = shape_size(shape);
        return Tensor(std::move(shape), std::vector<Real>(n, v));
    }

    static Tensor scalar(Real v, bool requires_grad = false) {
        return Tensor(Shape{}, std::vector<Real>{v}, requires_grad);
    }

    static Tensor vector(std::vector<Real> values, bool requires_grad = false) {
        Shape shape{values.size()};
        return Tensor(std::move(shape), std::move(values), requires_grad);
    }

    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<Real> values,
                         bool requires_grad = false) {
        return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
    }

    static Tensor from_node(NodePtr node) {
        Tensor t;
        t.node_ = std::move(node);
        return t;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }

    /// Rows of a 2-D tensor; a 1-D tensor is one row.
    std::size_t rows() const { return dim() == 2 ? node_->shape[0] : 1; }
    std::size_t cols() const { return dim() == 0 ? 1 : node_->shape.back(); }

    std::span<const Real> values() const { return node_->value; }
    std::span<Real> mutable_values() { return node_->value; }
    Real operator[](std::size_t i) const { return node_->value[i]; }
    Real at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

    Real item() const {
        if (size() != 1) throw ContractError("item() on tensor of shape " + shape_string(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->grad.size() == node_->value.size() && !node_->value.empty(); }
    std::span<const Real> grad() const { return node_->grad; }
    std::span<Real> mutable_grad() { return node_->grad; }

    void zero_grad() { node_->grad.assign(node_->value.size(), Real(0)); }
    void clear_grad() { node_->grad.clear(); }

    bool all_finite() const {
        return std::all_of(node_->value.begin(), node_->value.end(),
                           [](Real v) { return std::isfinite(v); });
    }

    Tensor detach() const { return Tensor(node_->shape, node_->value, false); }

    Node<Real>* node() const { return node_.get(); }
    const NodePtr& node_ptr() const { return node_; }

private:
    NodePtr node_;
};

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate across
/// calls; interior gradients are recomputed from zero on every call.
template <typename Real>
void backward(const Tensor<Real>& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ContractError("backward() requires a scalar loss, got shape " +
                            (loss.defined() ? shape_string(loss.shape()) : std::string("<undefined>")));
    }
    if (!loss.requires_grad()) return;

    std::vector<Node<Real>*> order;
    std::unordered_set<Node<Real>*> visited;
    std::vector<std::pair<Node<Real>*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<Real>* parent = node->parents[next++].get();
            if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node<Real>* node : order) {
        if (node->backward_fn) {
            node->grad.assign(node->value.size(), Real(0));
        } else {
            node->ensure_grad();
        }
    }
    loss.node()->grad[0] += Real(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

}  // namespace astgi
