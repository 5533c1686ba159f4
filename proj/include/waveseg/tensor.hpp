// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff over dense double tensors (N x C x H x W
// layout for feature maps). Ops build a tape of nodes; Tensor::backward walks
// it in reverse creation order, which makes gradient accumulation order
// deterministic run to run.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace waveseg {

namespace detail {

struct Node {
    std::vector<int> shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until touched by backward
    bool requires_grad = false;
    std::uint64_t seq = 0;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::size_t numel() const { return value.size(); }
    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), 0.0);
    }
};

std::uint64_t next_seq();

}  // namespace detail

/// Toggles tape recording; construction of ops inside a NoGradGuard scope
/// produces values only.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_values(std::vector<int> shape, std::vector<double> values,
                              bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const std::vector<int>& shape() const { return node_->shape; }
    int dim(std::size_t i) const { return node_->shape[i]; }
    std::size_t numel() const { return node_->value.size(); }

    double* data() { return node_->value.data(); }
    const double* data() const { return node_->value.data(); }
    std::vector<double>& values() { return node_->value; }
    const std::vector<double>& values() const { return node_->value; }

    /// Value of a single-element tensor.
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool b);

    bool has_grad() const { return !node_->grad.empty(); }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();

    /// Reverse-mode sweep from a scalar output.
    void backward();

    const std::shared_ptr<detail::Node>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

private:
    std::shared_ptr<detail::Node> node_;
};

namespace detail {

/// Shared op constructor: validates finiteness (every op must produce finite
/// values; violations raise instead of propagating) and wires the tape.
Tensor make_op(const char* name, std::vector<int> shape, std::vector<double> value,
               const std::vector<Tensor>& parents, std::function<void(Node&)> backward_fn);

/// parent.grad += g (no-op when the parent does not require gradients).
void accumulate(Node& parent, const double* g, std::size_t n);

}  // namespace detail

}  // namespace waveseg
