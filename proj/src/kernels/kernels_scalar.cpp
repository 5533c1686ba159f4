// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference backend. This file defines the semantics the AVX2 backend
// must reproduce bit-for-bit; keep the operation order in sync with the
// contract in kernels.hpp.

#include "waveseg/kernels.hpp"

#include <cmath>
#include <vector>

namespace waveseg::kern::detail {
namespace {

void add_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_s(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_s(const double* x, double a, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * a;
}

void axpy_s(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void relu_s(const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

// Always performs the add (with +0.0 on masked lanes) so the rounding pattern
// matches the vector backend's blend-and-add.
void relu_backward_s(const double* x, const double* gy, double* gx, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
}

// Four-lane reduction skeleton: element i feeds lane i mod 4, lanes combine
// as (l0 + l2) + (l1 + l3).
template <typename F>
double reduce4(const double* x, std::size_t n, F f) {
    double l[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l[0] += f(x[i]);
        l[1] += f(x[i + 1]);
        l[2] += f(x[i + 2]);
        l[3] += f(x[i + 3]);
    }
    for (; i < n; ++i) l[i % 4] += f(x[i]);
    return (l[0] + l[2]) + (l[1] + l[3]);
}

double sum_s(const double* x, std::size_t n) {
    return reduce4(x, n, [](double v) { return v; });
}

double sum_abs_s(const double* x, std::size_t n) {
    return reduce4(x, n, [](double v) { return std::fabs(v); });
}

double sum_sq_s(const double* x, std::size_t n) {
    return reduce4(x, n, [](double v) { return v * v; });
}

double dot_s(const double* a, const double* b, std::size_t n) {
    double l[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        l[0] = std::fma(a[i], b[i], l[0]);
        l[1] = std::fma(a[i + 1], b[i + 1], l[1]);
        l[2] = std::fma(a[i + 2], b[i + 2], l[2]);
        l[3] = std::fma(a[i + 3], b[i + 3], l[3]);
    }
    for (; i < n; ++i) l[i % 4] = std::fma(a[i], b[i], l[i % 4]);
    return (l[0] + l[2]) + (l[1] + l[3]);
}

bool all_finite_s(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

void masked_abs_sums_s(const double* x, const std::uint8_t* mask, std::size_t n,
                       double& sum_in, double& sum_out, std::size_t& count_in) {
    double in[4] = {0.0, 0.0, 0.0, 0.0};
    double out[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t cnt = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double ax = std::fabs(x[i]);
        const bool m = mask[i] != 0;
        in[i % 4] += m ? ax : 0.0;
        out[i % 4] += m ? 0.0 : ax;
        cnt += m ? 1u : 0u;
    }
    sum_in = (in[0] + in[2]) + (in[1] + in[3]);
    sum_out = (out[0] + out[2]) + (out[1] + out[3]);
    count_in = cnt;
}

void gemm_s(std::size_t m, std::size_t n, std::size_t k, const double* a,
            const double* b, double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc = std::fma(arow[p], b[p * n + j], acc);
            c[i * n + j] += acc;
        }
    }
}

void adam_update_s(double* p, const double* g, double* m, double* v,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double bias_c1, double bias_c2) {
    const double c1 = 1.0 - beta1;
    const double c2 = 1.0 - beta2;
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = std::fma(beta1, m[i], c1 * g[i]);
        v[i] = std::fma(beta2, v[i], c2 * g[i] * g[i]);
        const double mhat = m[i] * bias_c1;
        const double vhat = v[i] * bias_c2;
        p[i] -= (lr * mhat) / (std::sqrt(vhat) + eps);
    }
}

void haar_block_fwd_s(const double* top, const double* bot, std::size_t n_pairs,
                      double* ll, double* hl, double* lh, double* hh) {
    for (std::size_t j = 0; j < n_pairs; ++j) {
        const double a = top[2 * j], b = top[2 * j + 1];
        const double c = bot[2 * j], d = bot[2 * j + 1];
        const double st = a + b, sb = c + d;
        const double dt = a - b, db = c - d;
        ll[j] = (st + sb) * 0.5;
        hl[j] = (dt + db) * 0.5;
        lh[j] = (st - sb) * 0.5;
        hh[j] = (dt - db) * 0.5;
    }
}

void haar_block_inv_s(const double* ll, const double* hl, const double* lh,
                      const double* hh, std::size_t n_pairs, double* top,
                      double* bot) {
    for (std::size_t j = 0; j < n_pairs; ++j) {
        const double sl = ll[j] + hl[j], dl = ll[j] - hl[j];
        const double sh = lh[j] + hh[j], dh = lh[j] - hh[j];
        top[2 * j] = (sl + sh) * 0.5;
        top[2 * j + 1] = (dl + dh) * 0.5;
        bot[2 * j] = (sl - sh) * 0.5;
        bot[2 * j + 1] = (dl - dh) * 0.5;
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable t = {
        .add = add_s,
        .sub = sub_s,
        .mul = mul_s,
        .scale = scale_s,
        .axpy = axpy_s,
        .relu = relu_s,
        .relu_backward = relu_backward_s,
        .sum = sum_s,
        .sum_abs = sum_abs_s,
        .sum_sq = sum_sq_s,
        .dot = dot_s,
        .all_finite = all_finite_s,
        .masked_abs_sums = masked_abs_sums_s,
        .gemm = gemm_s,
        .adam_update = adam_update_s,
        .haar_block_fwd = haar_block_fwd_s,
        .haar_block_inv = haar_block_inv_s,
    };
    return t;
}

}  // namespace waveseg::kern::detail
