// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Low-level arithmetic kernels with a scalar reference implementation and an
// AVX2 variant selected at runtime. Both backends are written against the same
// operation-order contract so that they produce bitwise-identical results:
//
//  * Elementwise kernels evaluate each output from its own inputs with a fixed
//    expression; lanes never interact.
//  * Reductions split the input into four interleaved lanes (element i feeds
//    lane i mod 4), accumulate each lane independently in index order, and
//    combine as (l0 + l2) + (l1 + l3).
//  * gemm accumulates each output element as a single fused-multiply-add chain
//    over k in ascending order, starting from zero, followed by one add into C.
//
// Because every floating-point operation (including fma, sqrt and division) is
// correctly rounded, a run is reproducible bit-for-bit no matter which backend
// the dispatcher picks.

#pragma once

#include <cstddef>
#include <cstdint>

namespace waveseg::kern {

enum class Backend { scalar, avx2 };

/// Backend currently used by all dispatched kernels.
Backend active_backend();

/// Force a backend; throws std::runtime_error if unsupported on this CPU.
/// The WAVESEG_FORCE_SCALAR environment variable (any non-empty value) makes
/// the scalar backend the startup default.
void set_backend(Backend b);

bool backend_supported(Backend b);
const char* backend_name(Backend b);

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

void add(const double* a, const double* b, double* out, std::size_t n);
void sub(const double* a, const double* b, double* out, std::size_t n);
void mul(const double* a, const double* b, double* out, std::size_t n);
void scale(const double* x, double a, double* out, std::size_t n);

/// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

/// out[i] = max(x[i], 0)
void relu(const double* x, double* out, std::size_t n);

/// gx[i] += x[i] > 0 ? gy[i] : 0
void relu_backward(const double* x, const double* gy, double* gx, std::size_t n);

// ---------------------------------------------------------------------------
// Reductions (four-lane fixed-order contract, see file header)
// ---------------------------------------------------------------------------

double sum(const double* x, std::size_t n);
double sum_abs(const double* x, std::size_t n);
double sum_sq(const double* x, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);

/// True iff every element is finite (no NaN, no +/-Inf).
bool all_finite(const double* x, std::size_t n);

/// Accumulates |x[i]| into sum_in where mask[i] != 0 and into sum_out where
/// mask[i] == 0; count_in receives the number of mask hits.
void masked_abs_sums(const double* x, const std::uint8_t* mask, std::size_t n,
                     double& sum_in, double& sum_out, std::size_t& count_in);

// ---------------------------------------------------------------------------
// Matrix multiply
// ---------------------------------------------------------------------------

/// C (m x n) += A (m x k) * B (k x n), all row-major and dense.
void gemm(std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c);

// ---------------------------------------------------------------------------
// Optimizer update
// ---------------------------------------------------------------------------

/// One Adam step over n coordinates:
///   m = beta1*m + (1-beta1)*g
///   v = beta2*v + (1-beta2)*g*g
///   p -= lr * (m*bias_c1) / (sqrt(v*bias_c2) + eps)
/// bias_c1 = 1/(1-beta1^t) and bias_c2 = 1/(1-beta2^t) are precomputed by the
/// caller so both backends consume identical scalars.
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias_c1, double bias_c2);

// ---------------------------------------------------------------------------
// Orthonormal 2x2 Haar block butterflies
// ---------------------------------------------------------------------------
//
// One call processes a pair of adjacent image rows. top/bot hold 2*n_pairs
// interleaved samples; outputs hold n_pairs coefficients per band. With
// a = top[2j], b = top[2j+1], c = bot[2j], d = bot[2j+1]:
//   ll[j] = ((a+b) + (c+d)) * 0.5      hl[j] = ((a-b) + (c-d)) * 0.5
//   lh[j] = ((a+b) - (c+d)) * 0.5      hh[j] = ((a-b) - (c-d)) * 0.5
// which is the separable (u,v) -> ((u+v)/sqrt2, (u-v)/sqrt2) filter pair
// applied along x then y with the two 1/sqrt2 factors fused into one 0.5.

void haar_block_fwd(const double* top, const double* bot, std::size_t n_pairs,
                    double* ll, double* hl, double* lh, double* hh);

/// Exact inverse of haar_block_fwd:
///   top[2j]   = ((ll+hl) + (lh+hh)) * 0.5   top[2j+1] = ((ll-hl) + (lh-hh)) * 0.5
///   bot[2j]   = ((ll+hl) - (lh+hh)) * 0.5   bot[2j+1] = ((ll-hl) - (lh-hh)) * 0.5
void haar_block_inv(const double* ll, const double* hl, const double* lh,
                    const double* hh, std::size_t n_pairs, double* top, double* bot);

namespace detail {

struct KernelTable {
    void (*add)(const double*, const double*, double*, std::size_t);
    void (*sub)(const double*, const double*, double*, std::size_t);
    void (*mul)(const double*, const double*, double*, std::size_t);
    void (*scale)(const double*, double, double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*relu)(const double*, double*, std::size_t);
    void (*relu_backward)(const double*, const double*, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sum_abs)(const double*, std::size_t);
    double (*sum_sq)(const double*, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    bool (*all_finite)(const double*, std::size_t);
    void (*masked_abs_sums)(const double*, const std::uint8_t*, std::size_t,
                            double&, double&, std::size_t&);
    void (*gemm)(std::size_t, std::size_t, std::size_t, const double*,
                 const double*, double*);
    void (*adam_update)(double*, const double*, double*, double*, std::size_t,
                        double, double, double, double, double, double);
    void (*haar_block_fwd)(const double*, const double*, std::size_t, double*,
                           double*, double*, double*);
    void (*haar_block_inv)(const double*, const double*, const double*,
                           const double*, std::size_t, double*, double*);
};

const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in / unsupported

}  // namespace detail

}  // namespace waveseg::kern
