// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include <cstring>
#include <string>

#include "waveseg/kernels.hpp"
#include "waveseg/ops.hpp"

namespace waveseg {

using detail::Node;
using detail::make_op;

namespace {

struct ConvDims {
    int n, ci, h, w;      // input
    int co, k;            // weight
    int stride, pad, dil;
    int ho, wo;

    std::size_t in_plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t in_sample() const { return in_plane() * ci; }
    std::size_t out_plane() const { return static_cast<std::size_t>(ho) * wo; }
    std::size_t out_sample() const { return out_plane() * co; }
    std::size_t patch() const { return static_cast<std::size_t>(ci) * k * k; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, const Tensor& b,
                   const ConvSpec& spec) {
    if (x.shape().size() != 4 || w.shape().size() != 4)
        throw std::invalid_argument("conv2d: x must be NCHW and weight Cout x Cin x K x K");
    ConvDims d;
    d.n = x.dim(0); d.ci = x.dim(1); d.h = x.dim(2); d.w = x.dim(3);
    d.co = w.dim(0); d.k = w.dim(2);
    if (w.dim(3) != d.k) throw std::invalid_argument("conv2d: kernel must be square");
    if (w.dim(1) != d.ci)
        throw std::invalid_argument("conv2d: weight Cin " + std::to_string(w.dim(1)) +
                                    " != input channels " + std::to_string(d.ci));
    if (b.shape().size() != 1 || b.dim(0) != d.co)
        throw std::invalid_argument("conv2d: bias must have Cout elements");
    if (spec.stride < 1 || spec.dilation < 1 || spec.padding < 0)
        throw std::invalid_argument("conv2d: bad stride/dilation/padding");
    d.stride = spec.stride; d.pad = spec.padding; d.dil = spec.dilation;
    const int eff = d.dil * (d.k - 1) + 1;
    const int num_h = d.h + 2 * d.pad - eff;
    const int num_w = d.w + 2 * d.pad - eff;
    if (num_h < 0 || num_w < 0 || num_h % d.stride != 0 || num_w % d.stride != 0)
        throw std::invalid_argument("conv2d: output size is not a positive integer");
    d.ho = num_h / d.stride + 1;
    d.wo = num_w / d.stride + 1;
    return d;
}

// col is patch() x out_plane(), row index (ci*k + ky)*k + kx.
void im2col(const ConvDims& d, const double* x_sample, double* col) {
    const std::size_t op = d.out_plane();
    for (int ci = 0; ci < d.ci; ++ci) {
        const double* plane = x_sample + static_cast<std::size_t>(ci) * d.in_plane();
        for (int ky = 0; ky < d.k; ++ky) {
            for (int kx = 0; kx < d.k; ++kx) {
                double* row = col + (static_cast<std::size_t>(ci) * d.k * d.k +
                                     static_cast<std::size_t>(ky) * d.k + kx) * op;
                for (int oy = 0; oy < d.ho; ++oy) {
                    const int iy = oy * d.stride - d.pad + ky * d.dil;
                    double* dst = row + static_cast<std::size_t>(oy) * d.wo;
                    if (iy < 0 || iy >= d.h) {
                        std::memset(dst, 0, static_cast<std::size_t>(d.wo) * sizeof(double));
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * d.w;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        const int ix = ox * d.stride - d.pad + kx * d.dil;
                        dst[ox] = (ix >= 0 && ix < d.w) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im_add(const ConvDims& d, const double* col, double* gx_sample) {
    const std::size_t op = d.out_plane();
    for (int ci = 0; ci < d.ci; ++ci) {
        double* plane = gx_sample + static_cast<std::size_t>(ci) * d.in_plane();
        for (int ky = 0; ky < d.k; ++ky) {
            for (int kx = 0; kx < d.k; ++kx) {
                const double* row = col + (static_cast<std::size_t>(ci) * d.k * d.k +
                                           static_cast<std::size_t>(ky) * d.k + kx) * op;
                for (int oy = 0; oy < d.ho; ++oy) {
                    const int iy = oy * d.stride - d.pad + ky * d.dil;
                    if (iy < 0 || iy >= d.h) continue;
                    double* dst = plane + static_cast<std::size_t>(iy) * d.w;
                    const double* src = row + static_cast<std::size_t>(oy) * d.wo;
                    for (int ox = 0; ox < d.wo; ++ox) {
                        const int ix = ox * d.stride - d.pad + kx * d.dil;
                        if (ix >= 0 && ix < d.w) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

bool is_identity_col(const ConvDims& d) {
    return d.k == 1 && d.stride == 1 && d.pad == 0 && d.dil == 1;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              const ConvSpec& spec) {
    const ConvDims d = conv_dims(x, weight, bias, spec);
    const std::size_t op = d.out_plane();

    std::vector<double> out(static_cast<std::size_t>(d.n) * d.out_sample());
    // Prefill with bias so gemm accumulates on top of it.
    for (int n = 0; n < d.n; ++n)
        for (int co = 0; co < d.co; ++co) {
            double* dst = out.data() + static_cast<std::size_t>(n) * d.out_sample() +
                          static_cast<std::size_t>(co) * op;
            const double bv = bias.data()[co];
            for (std::size_t i = 0; i < op; ++i) dst[i] = bv;
        }

    std::vector<double> col;
    if (!is_identity_col(d)) col.resize(d.patch() * op);
    for (int n = 0; n < d.n; ++n) {
        const double* xs = x.data() + static_cast<std::size_t>(n) * d.in_sample();
        const double* colp = xs;
        if (!is_identity_col(d)) {
            im2col(d, xs, col.data());
            colp = col.data();
        }
        kern::gemm(static_cast<std::size_t>(d.co), op, d.patch(), weight.data(), colp,
                   out.data() + static_cast<std::size_t>(n) * d.out_sample());
    }

    return make_op(
        "conv2d", {d.n, d.co, d.ho, d.wo}, std::move(out), {x, weight, bias},
        [d, op](Node& self) {
            Node& xn = *self.parents[0];
            Node& wn = *self.parents[1];
            Node& bn = *self.parents[2];

            if (bn.requires_grad) {
                bn.ensure_grad();
                for (int n = 0; n < d.n; ++n)
                    for (int co = 0; co < d.co; ++co)
                        bn.grad[static_cast<std::size_t>(co)] +=
                            kern::sum(self.grad.data() +
                                          static_cast<std::size_t>(n) * d.out_sample() +
                                          static_cast<std::size_t>(co) * op,
                                      op);
            }

            std::vector<double> col, scratch;
            if (wn.requires_grad) {
                wn.ensure_grad();
                scratch.resize(op * d.patch());  // transposed col
                if (!is_identity_col(d)) col.resize(d.patch() * op);
                for (int n = 0; n < d.n; ++n) {
                    const double* xs = xn.value.data() + static_cast<std::size_t>(n) * d.in_sample();
                    const double* colp = xs;
                    if (!is_identity_col(d)) {
                        im2col(d, xs, col.data());
                        colp = col.data();
                    }
                    transpose(colp, d.patch(), op, scratch.data());
                    kern::gemm(static_cast<std::size_t>(d.co), d.patch(), op,
                               self.grad.data() + static_cast<std::size_t>(n) * d.out_sample(),
                               scratch.data(), wn.grad.data());
                }
            }

            if (xn.requires_grad) {
                xn.ensure_grad();
                std::vector<double> wt(d.patch() * d.co);
                transpose(wn.value.data(), static_cast<std::size_t>(d.co), d.patch(), wt.data());
                std::vector<double> dcol(d.patch() * op);
                for (int n = 0; n < d.n; ++n) {
                    std::fill(dcol.begin(), dcol.end(), 0.0);
                    kern::gemm(d.patch(), op, static_cast<std::size_t>(d.co), wt.data(),
                               self.grad.data() + static_cast<std::size_t>(n) * d.out_sample(),
                               dcol.data());
                    col2im_add(d, dcol.data(),
                               xn.grad.data() + static_cast<std::size_t>(n) * d.in_sample());
                }
            }
        });
}

}  // namespace waveseg
