// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2+FMA backend. Mirrors the scalar reference operation-for-operation; see
// kernels.hpp for the order contract that makes the two backends bitwise
// equal. Compiled with -mavx2 -mfma -ffp-contract=off; on other targets this
// translation unit is empty except for the null table accessor.

#include "waveseg/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

namespace waveseg::kern::detail {
namespace {

void add_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_v(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                                _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_v(const double* x, double a, double* out, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), av));
    for (; i < n; ++i) out[i] = x[i] * a;
}

void axpy_v(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                                _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void relu_v(const double* x, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
    for (; i < n; ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_v(const double* x, const double* gy, double* gx, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d sel = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d contrib = _mm256_and_pd(_mm256_loadu_pd(gy + i), sel);
        _mm256_storeu_pd(gx + i, _mm256_add_pd(_mm256_loadu_pd(gx + i), contrib));
    }
    for (; i < n; ++i) gx[i] += x[i] > 0.0 ? gy[i] : 0.0;
}

// Lane extraction + (l0 + l2) + (l1 + l3) combine shared by all reductions.
inline double reduce_lanes(__m256d acc, const double* x, std::size_t i,
                           std::size_t n, double (*f)(double)) {
    alignas(32) double l[4];
    _mm256_store_pd(l, acc);
    for (; i < n; ++i) l[i % 4] += f(x[i]);
    return (l[0] + l[2]) + (l[1] + l[3]);
}

double pass(double v) { return v; }
double fabs_f(double v) { return std::fabs(v); }
double sq_f(double v) { return v * v; }

double sum_v(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    return reduce_lanes(acc, x, i, n, pass);
}

double sum_abs_v(const double* x, std::size_t n) {
    const __m256d signbit = _mm256_set1_pd(-0.0);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_andnot_pd(signbit, _mm256_loadu_pd(x + i)));
    return reduce_lanes(acc, x, i, n, fabs_f);
}

double sum_sq_v(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
    }
    return reduce_lanes(acc, x, i, n, sq_f);
}

double dot_v(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    alignas(32) double l[4];
    _mm256_store_pd(l, acc);
    for (; i < n; ++i) l[i % 4] = std::fma(a[i], b[i], l[i % 4]);
    return (l[0] + l[2]) + (l[1] + l[3]);
}

bool all_finite_v(const double* x, std::size_t n) {
    const __m256d signbit = _mm256_set1_pd(-0.0);
    const __m256d inf = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ax = _mm256_andnot_pd(signbit, _mm256_loadu_pd(x + i));
        const __m256d ok = _mm256_cmp_pd(ax, inf, _CMP_LT_OQ);
        if (_mm256_movemask_pd(ok) != 0xF) return false;
    }
    for (; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

void masked_abs_sums_v(const double* x, const std::uint8_t* mask, std::size_t n,
                       double& sum_in, double& sum_out, std::size_t& count_in) {
    const __m256d signbit = _mm256_set1_pd(-0.0);
    const __m256d zero = _mm256_setzero_pd();
    __m256d acc_in = zero, acc_out = zero;
    std::size_t cnt = 0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ax = _mm256_andnot_pd(signbit, _mm256_loadu_pd(x + i));
        std::uint32_t mbits;
        std::memcpy(&mbits, mask + i, 4);
        const __m128i m32 = _mm_cvtepu8_epi32(_mm_cvtsi32_si128(static_cast<int>(mbits)));
        const __m256d md = _mm256_cvtepi32_pd(m32);
        const __m256d sel = _mm256_cmp_pd(md, zero, _CMP_NEQ_OQ);
        acc_in = _mm256_add_pd(acc_in, _mm256_and_pd(ax, sel));
        acc_out = _mm256_add_pd(acc_out, _mm256_andnot_pd(sel, ax));
        cnt += (mask[i] != 0) + (mask[i + 1] != 0) + (mask[i + 2] != 0) +
               (mask[i + 3] != 0);
    }
    alignas(32) double li[4], lo[4];
    _mm256_store_pd(li, acc_in);
    _mm256_store_pd(lo, acc_out);
    for (; i < n; ++i) {
        const double ax = std::fabs(x[i]);
        const bool m = mask[i] != 0;
        li[i % 4] += m ? ax : 0.0;
        lo[i % 4] += m ? 0.0 : ax;
        cnt += m ? 1u : 0u;
    }
    sum_in = (li[0] + li[2]) + (li[1] + li[3]);
    sum_out = (lo[0] + lo[2]) + (lo[1] + lo[3]);
    count_in = cnt;
}

// --------------------------------------------------------------------------
// gemm microkernels: every output element is a single ascending-k fma chain.
// B is packed into K x 8 (or K x 4) panels so the inner loop streams
// contiguously.
// --------------------------------------------------------------------------

inline void micro_4x8(const double* a, std::size_t lda, const double* bp,
                      std::size_t k, double* c, std::size_t ldc) {
    __m256d acc[4][2];
    for (auto& row : acc) row[0] = row[1] = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(bp + p * 8);
        const __m256d b1 = _mm256_loadu_pd(bp + p * 8 + 4);
        for (int r = 0; r < 4; ++r) {
            const __m256d ar = _mm256_broadcast_sd(a + r * lda + p);
            acc[r][0] = _mm256_fmadd_pd(ar, b0, acc[r][0]);
            acc[r][1] = _mm256_fmadd_pd(ar, b1, acc[r][1]);
        }
    }
    for (int r = 0; r < 4; ++r) {
        double* crow = c + r * ldc;
        _mm256_storeu_pd(crow, _mm256_add_pd(_mm256_loadu_pd(crow), acc[r][0]));
        _mm256_storeu_pd(crow + 4,
                         _mm256_add_pd(_mm256_loadu_pd(crow + 4), acc[r][1]));
    }
}

inline void micro_1x8(const double* a, const double* bp, std::size_t k,
                      double* c) {
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d ar = _mm256_broadcast_sd(a + p);
        acc0 = _mm256_fmadd_pd(ar, _mm256_loadu_pd(bp + p * 8), acc0);
        acc1 = _mm256_fmadd_pd(ar, _mm256_loadu_pd(bp + p * 8 + 4), acc1);
    }
    _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), acc0));
    _mm256_storeu_pd(c + 4, _mm256_add_pd(_mm256_loadu_pd(c + 4), acc1));
}

inline void micro_4x4(const double* a, std::size_t lda, const double* bp,
                      std::size_t k, double* c, std::size_t ldc) {
    __m256d acc[4];
    for (auto& v : acc) v = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(bp + p * 4);
        for (int r = 0; r < 4; ++r)
            acc[r] = _mm256_fmadd_pd(_mm256_broadcast_sd(a + r * lda + p), b0, acc[r]);
    }
    for (int r = 0; r < 4; ++r) {
        double* crow = c + r * ldc;
        _mm256_storeu_pd(crow, _mm256_add_pd(_mm256_loadu_pd(crow), acc[r]));
    }
}

inline void micro_1x4(const double* a, const double* bp, std::size_t k,
                      double* c) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p)
        acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p),
                              _mm256_loadu_pd(bp + p * 4), acc);
    _mm256_storeu_pd(c, _mm256_add_pd(_mm256_loadu_pd(c), acc));
}

void gemm_v(std::size_t m, std::size_t n, std::size_t k, const double* a,
            const double* b, double* c) {
    if (m == 0 || n == 0 || k == 0) return;
    static thread_local std::vector<double> pack;

    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        pack.resize(k * 8);
        for (std::size_t p = 0; p < k; ++p)
            std::memcpy(pack.data() + p * 8, b + p * n + j, 8 * sizeof(double));
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4)
            micro_4x8(a + i * k, k, pack.data(), k, c + i * n + j, n);
        for (; i < m; ++i) micro_1x8(a + i * k, pack.data(), k, c + i * n + j);
    }
    if (j + 4 <= n) {
        pack.resize(k * 4);
        for (std::size_t p = 0; p < k; ++p)
            std::memcpy(pack.data() + p * 4, b + p * n + j, 4 * sizeof(double));
        std::size_t i = 0;
        for (; i + 4 <= m; i += 4)
            micro_4x4(a + i * k, k, pack.data(), k, c + i * n + j, n);
        for (; i < m; ++i) micro_1x4(a + i * k, pack.data(), k, c + i * n + j);
        j += 4;
    }
    for (; j < n; ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            const double* arow = a + i * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p)
                acc = std::fma(arow[p], b[p * n + j], acc);
            c[i * n + j] += acc;
        }
    }
}

void adam_update_v(double* p, const double* g, double* m, double* v,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double bias_c1, double bias_c2) {
    const double c1s = 1.0 - beta1;
    const double c2s = 1.0 - beta2;
    const __m256d b1 = _mm256_set1_pd(beta1), b2 = _mm256_set1_pd(beta2);
    const __m256d c1 = _mm256_set1_pd(c1s), c2 = _mm256_set1_pd(c2s);
    const __m256d bc1 = _mm256_set1_pd(bias_c1), bc2 = _mm256_set1_pd(bias_c2);
    const __m256d lrv = _mm256_set1_pd(lr), epsv = _mm256_set1_pd(eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        const __m256d mv = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i),
                                           _mm256_mul_pd(c1, gv));
        const __m256d vv = _mm256_fmadd_pd(
            b2, _mm256_loadu_pd(v + i), _mm256_mul_pd(_mm256_mul_pd(c2, gv), gv));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(mv, bc1);
        const __m256d vhat = _mm256_mul_pd(vv, bc2);
        const __m256d den = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
        const __m256d upd = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), den);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), upd));
    }
    for (; i < n; ++i) {
        m[i] = std::fma(beta1, m[i], c1s * g[i]);
        v[i] = std::fma(beta2, v[i], c2s * g[i] * g[i]);
        const double mhat = m[i] * bias_c1;
        const double vhat = v[i] * bias_c2;
        p[i] -= (lr * mhat) / (std::sqrt(vhat) + eps);
    }
}

// Deinterleave {a0 b0 a1 b1 | a2 b2 a3 b3} into {a0..a3} and {b0..b3}.
inline void deinterleave(const double* src, __m256d& evens, __m256d& odds) {
    const __m256d t0 = _mm256_loadu_pd(src);
    const __m256d t1 = _mm256_loadu_pd(src + 4);
    evens = _mm256_permute4x64_pd(_mm256_unpacklo_pd(t0, t1), 0xD8);
    odds = _mm256_permute4x64_pd(_mm256_unpackhi_pd(t0, t1), 0xD8);
}

inline void interleave_store(double* dst, __m256d evens, __m256d odds) {
    const __m256d t0 = _mm256_unpacklo_pd(evens, odds);
    const __m256d t1 = _mm256_unpackhi_pd(evens, odds);
    _mm256_storeu_pd(dst, _mm256_permute2f128_pd(t0, t1, 0x20));
    _mm256_storeu_pd(dst + 4, _mm256_permute2f128_pd(t0, t1, 0x31));
}

void haar_block_fwd_v(const double* top, const double* bot, std::size_t n_pairs,
                      double* ll, double* hl, double* lh, double* hh) {
    const __m256d half = _mm256_set1_pd(0.5);
    std::size_t j = 0;
    for (; j + 4 <= n_pairs; j += 4) {
        __m256d a, b, c, d;
        deinterleave(top + 2 * j, a, b);
        deinterleave(bot + 2 * j, c, d);
        const __m256d st = _mm256_add_pd(a, b), sb = _mm256_add_pd(c, d);
        const __m256d dt = _mm256_sub_pd(a, b), db = _mm256_sub_pd(c, d);
        _mm256_storeu_pd(ll + j, _mm256_mul_pd(_mm256_add_pd(st, sb), half));
        _mm256_storeu_pd(hl + j, _mm256_mul_pd(_mm256_add_pd(dt, db), half));
        _mm256_storeu_pd(lh + j, _mm256_mul_pd(_mm256_sub_pd(st, sb), half));
        _mm256_storeu_pd(hh + j, _mm256_mul_pd(_mm256_sub_pd(dt, db), half));
    }
    for (; j < n_pairs; ++j) {
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

void haar_block_inv_v(const double* ll, const double* hl, const double* lh,
                      const double* hh, std::size_t n_pairs, double* top,
                      double* bot) {
    const __m256d half = _mm256_set1_pd(0.5);
    std::size_t j = 0;
    for (; j + 4 <= n_pairs; j += 4) {
        const __m256d llv = _mm256_loadu_pd(ll + j), hlv = _mm256_loadu_pd(hl + j);
        const __m256d lhv = _mm256_loadu_pd(lh + j), hhv = _mm256_loadu_pd(hh + j);
        const __m256d sl = _mm256_add_pd(llv, hlv), dl = _mm256_sub_pd(llv, hlv);
        const __m256d sh = _mm256_add_pd(lhv, hhv), dh = _mm256_sub_pd(lhv, hhv);
        interleave_store(top + 2 * j, _mm256_mul_pd(_mm256_add_pd(sl, sh), half),
                         _mm256_mul_pd(_mm256_add_pd(dl, dh), half));
        interleave_store(bot + 2 * j, _mm256_mul_pd(_mm256_sub_pd(sl, sh), half),
                         _mm256_mul_pd(_mm256_sub_pd(dl, dh), half));
    }
    for (; j < n_pairs; ++j) {
        const double sl = ll[j] + hl[j], dl = ll[j] - hl[j];
        const double sh = lh[j] + hh[j], dh = lh[j] - hh[j];
        top[2 * j] = (sl + sh) * 0.5;
        top[2 * j + 1] = (dl + dh) * 0.5;
        bot[2 * j] = (sl - sh) * 0.5;
        bot[2 * j + 1] = (dl - dh) * 0.5;
    }
}

}  // namespace

const KernelTable* avx2_table() {
    static const KernelTable t = {
        .add = add_v,
        .sub = sub_v,
        .mul = mul_v,
        .scale = scale_v,
        .axpy = axpy_v,
        .relu = relu_v,
        .relu_backward = relu_backward_v,
        .sum = sum_v,
        .sum_abs = sum_abs_v,
        .sum_sq = sum_sq_v,
        .dot = dot_v,
        .all_finite = all_finite_v,
        .masked_abs_sums = masked_abs_sums_v,
        .gemm = gemm_v,
        .adam_update = adam_update_v,
        .haar_block_fwd = haar_block_fwd_v,
        .haar_block_inv = haar_block_inv_v,
    };
    return &t;
}

}  // namespace waveseg::kern::detail

#else  // !(__AVX2__ && __FMA__)

namespace waveseg::kern::detail {
const KernelTable* avx2_table() { return nullptr; }
}  // namespace waveseg::kern::detail

#endif
