// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "waveseg/kernels.hpp"

namespace waveseg {

namespace {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

bool& grad_mode() {
    static bool enabled = true;
    return enabled;
}

}  // namespace

namespace detail {

std::uint64_t next_seq() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

void accumulate(Node& parent, const double* g, std::size_t n) {
    if (!parent.requires_grad) return;
    parent.ensure_grad();
    kern::axpy(1.0, g, parent.grad.data(), n);
}

Tensor make_op(const char* name, std::vector<int> shape, std::vector<double> value,
               const std::vector<Tensor>& parents, std::function<void(Node&)> backward_fn) {
    if (!kern::all_finite(value.data(), value.size()))
        throw std::runtime_error(std::string(name) + ": produced non-finite values");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->seq = next_seq();
    bool needs = false;
    if (grad_enabled())
        for (const Tensor& p : parents) needs = needs || p.requires_grad();
    node->requires_grad = needs;
    if (needs) {
        node->parents.reserve(parents.size());
        for (const Tensor& p : parents) node->parents.push_back(p.node());
        node->backward_fn = std::move(backward_fn);
    }
    return Tensor(std::move(node));
}

}  // namespace detail

bool grad_enabled() { return grad_mode(); }

NoGradGuard::NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
NoGradGuard::~NoGradGuard() { grad_mode() = prev_; }

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value.assign(n, 0.0);
    node->seq = detail::next_seq();
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("Tensor::from_values: size mismatch");
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->seq = detail::next_seq();
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

double Tensor::item() const {
    if (numel() != 1) throw std::logic_error("Tensor::item: not a scalar");
    return node_->value[0];
}

void Tensor::set_requires_grad(bool b) {
    if (node_->backward_fn)
        throw std::logic_error("set_requires_grad: only valid on leaf tensors");
    node_->requires_grad = b;
}

std::vector<double>& Tensor::grad() {
    node_->ensure_grad();
    return node_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (node_->grad.empty())
        throw std::logic_error("Tensor::grad: no gradient accumulated");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() {
    if (numel() != 1) throw std::logic_error("backward: output must be scalar");
    if (!node_->requires_grad)
        throw std::logic_error("backward: output does not require gradients");

    // Collect the requires-grad ancestry, then run in reverse creation order.
    std::vector<detail::Node*> nodes;
    std::unordered_set<detail::Node*> seen;
    std::vector<detail::Node*> stack = {node_.get()};
    seen.insert(node_.get());
    while (!stack.empty()) {
        detail::Node* n = stack.back();
        stack.pop_back();
        nodes.push_back(n);
        for (const auto& p : n->parents)
            if (p->requires_grad && seen.insert(p.get()).second)
                stack.push_back(p.get());
    }
    std::sort(nodes.begin(), nodes.end(),
              [](const detail::Node* a, const detail::Node* b) { return a->seq > b->seq; });

    node_->ensure_grad();
    node_->grad[0] = 1.0;
    for (detail::Node* n : nodes) {
        if (n->backward_fn && !n->grad.empty()) n->backward_fn(*n);
    }
}

}  // namespace waveseg
