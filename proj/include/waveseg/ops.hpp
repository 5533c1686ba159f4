// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable ops over Tensor. Feature maps are N x C x H x W; token
// sequences are B x T x C. Every op has an analytic backward pass and is
// covered by the finite-difference harness below.

#pragma once

#include <functional>

#include "waveseg/tensor.hpp"

namespace waveseg {

// --------------------------------------------------------------------------
// Elementwise / structural
// --------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double a);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor concat_channels(const std::vector<Tensor>& xs);
Tensor narrow_channels(const Tensor& x, int first, int count);

Tensor upsample_nearest_2x(const Tensor& x);

/// Separable bilinear upsampling by an integer factor with half-pixel centers
/// (used only for the final logit upsample, where nearest-neighbor blocks
/// would quantize the decision boundary).
Tensor upsample_bilinear(const Tensor& x, int factor);

/// Fixed-weight contraction to a scalar: sum_i x_i * w_i. The workhorse of
/// the gradient checker.
Tensor reduce_dot(const Tensor& x, const std::vector<double>& weights);

// --------------------------------------------------------------------------
// Convolution
// --------------------------------------------------------------------------

struct ConvSpec {
    int stride = 1;
    int padding = 0;
    int dilation = 1;
};

/// Cross-correlation with zero padding; weight is Cout x Cin x K x K, bias is
/// Cout. Output spatial size (H + 2p - d*(K-1) - 1)/s + 1 must be a positive
/// integer.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const ConvSpec& spec);

// --------------------------------------------------------------------------
// Normalization
// --------------------------------------------------------------------------

/// Group normalization over (C/groups, H, W) slices per sample, with
/// per-channel affine parameters.
Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma,
                  const Tensor& beta, double eps = 1e-5);

// --------------------------------------------------------------------------
// Windowed attention
// --------------------------------------------------------------------------

/// N x C x H x W -> (N*nW) x w^2 x C; non-overlapping w x w windows in
/// row-major window order, tokens in row-major order within a window.
Tensor window_partition(const Tensor& x, int w);

/// Exact inverse of window_partition.
Tensor window_merge(const Tensor& tokens, int w, int n, int c, int h, int width);

struct AttentionParams {
    Tensor wq, wk, wv, wo;  // C x C projection matrices
    int heads = 1;
};

/// out[b,t,:] = x[b,t,:] * w  (w is C x Cout)
Tensor linear(const Tensor& x, const Tensor& w);

/// B x T x C -> B x heads x T x T scaled scores Q K^T / sqrt(head_dim).
Tensor attention_scores(const Tensor& q, const Tensor& k, int heads);

Tensor softmax_lastdim(const Tensor& x);

/// probs (B x H x T x T) applied to values (B x T x C) -> B x T x C.
Tensor attention_apply(const Tensor& probs, const Tensor& v, int heads);

/// Multi-head cross-attention: queries from q_tokens, keys/values from
/// kv_tokens, output projection wo.
Tensor cross_attention(const Tensor& q_tokens, const Tensor& kv_tokens,
                       const AttentionParams& p);

// --------------------------------------------------------------------------
// Haar sub-band ops (single level, per channel)
// --------------------------------------------------------------------------

/// N x C x H x W -> N x 4C x H/2 x W/2 with band blocks [LL | HL | LH | HH]
/// along the channel axis. Orthonormal, so backward is the synthesis
/// transform of the gradient.
Tensor haar_analysis_stack(const Tensor& x);

/// Inverse of haar_analysis_stack.
Tensor haar_synthesis_stack(const Tensor& bands);

// --------------------------------------------------------------------------
// Loss
// --------------------------------------------------------------------------

/// BCE-with-logits (mean over all elements) plus 1 - soft-Dice. Soft-Dice is
/// computed per sample with +1 smoothing and averaged over the batch. Target
/// must be exactly binary.
Tensor dice_bce_loss(const Tensor& logits, const Tensor& target);

// --------------------------------------------------------------------------
// Optimizer
// --------------------------------------------------------------------------

class Adam {
public:
    explicit Adam(std::vector<Tensor> params, double lr = 1e-3, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void zero_grad();
    void step();
    long step_count() const { return t_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

// --------------------------------------------------------------------------
// Finite-difference gradient verification
// --------------------------------------------------------------------------

struct GradCheckReport {
    bool pass = false;
    double max_rel_err = 0.0;
    std::string worst;  // "input 2, coord 17" style location of the worst error
};

/// Central differences (h = 1e-4 scaled by coordinate magnitude) against the
/// analytic gradient of a seeded random linear functional of fn's output.
/// Relative error uses denominator max(|analytic|, |numeric|, 1e-6). NaN in
/// either gradient fails with its location.
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                           std::vector<Tensor> inputs, double tol,
                           std::uint64_t seed = 7);

}  // namespace waveseg
