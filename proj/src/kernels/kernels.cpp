// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace waveseg::kern {

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct Dispatch {
    const detail::KernelTable* table;
    Backend backend;

    Dispatch() {
        const bool force_scalar = std::getenv("WAVESEG_FORCE_SCALAR") != nullptr;
        const detail::KernelTable* avx2 = detail::avx2_table();
        if (!force_scalar && avx2 != nullptr && cpu_has_avx2()) {
            table = avx2;
            backend = Backend::avx2;
        } else {
            table = &detail::scalar_table();
            backend = Backend::scalar;
        }
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

Backend active_backend() { return dispatch().backend; }

bool backend_supported(Backend b) {
    if (b == Backend::scalar) return true;
    return detail::avx2_table() != nullptr && cpu_has_avx2();
}

const char* backend_name(Backend b) {
    return b == Backend::scalar ? "scalar" : "avx2";
}

void set_backend(Backend b) {
    if (!backend_supported(b))
        throw std::runtime_error(std::string("kernel backend not supported on this CPU: ") +
                                 backend_name(b));
    dispatch().table = b == Backend::scalar ? &detail::scalar_table() : detail::avx2_table();
    dispatch().backend = b;
}

void add(const double* a, const double* b, double* out, std::size_t n) {
    dispatch().table->add(a, b, out, n);
}
void sub(const double* a, const double* b, double* out, std::size_t n) {
    dispatch().table->sub(a, b, out, n);
}
void mul(const double* a, const double* b, double* out, std::size_t n) {
    dispatch().table->mul(a, b, out, n);
}
void scale(const double* x, double a, double* out, std::size_t n) {
    dispatch().table->scale(x, a, out, n);
}
void axpy(double a, const double* x, double* y, std::size_t n) {
    dispatch().table->axpy(a, x, y, n);
}
void relu(const double* x, double* out, std::size_t n) {
    dispatch().table->relu(x, out, n);
}
void relu_backward(const double* x, const double* gy, double* gx, std::size_t n) {
    dispatch().table->relu_backward(x, gy, gx, n);
}
double sum(const double* x, std::size_t n) { return dispatch().table->sum(x, n); }
double sum_abs(const double* x, std::size_t n) { return dispatch().table->sum_abs(x, n); }
double sum_sq(const double* x, std::size_t n) { return dispatch().table->sum_sq(x, n); }
double dot(const double* a, const double* b, std::size_t n) {
    return dispatch().table->dot(a, b, n);
}
bool all_finite(const double* x, std::size_t n) {
    return dispatch().table->all_finite(x, n);
}
void masked_abs_sums(const double* x, const std::uint8_t* mask, std::size_t n,
                     double& sum_in, double& sum_out, std::size_t& count_in) {
    dispatch().table->masked_abs_sums(x, mask, n, sum_in, sum_out, count_in);
}
void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double* c) {
    dispatch().table->gemm(m, n, k, a, b, c);
}
void adam_update(double* p, const double* g, double* m, double* v, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bias_c1, double bias_c2) {
    dispatch().table->adam_update(p, g, m, v, n, lr, beta1, beta2, eps, bias_c1,
                                  bias_c2);
}
void haar_block_fwd(const double* top, const double* bot, std::size_t n_pairs,
                    double* ll, double* hl, double* lh, double* hh) {
    dispatch().table->haar_block_fwd(top, bot, n_pairs, ll, hl, lh, hh);
}
void haar_block_inv(const double* ll, const double* hl, const double* lh,
                    const double* hh, std::size_t n_pairs, double* top,
                    double* bot) {
    dispatch().table->haar_block_inv(ll, hl, lh, hh, n_pairs, top, bot);
}

}  // namespace waveseg::kern
