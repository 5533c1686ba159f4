// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/selftest.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <ostream>

#include "waveseg/contrast.hpp"
#include "waveseg/datagen.hpp"
#include "waveseg/kernels.hpp"
#include "waveseg/ops.hpp"
#include "waveseg/rng.hpp"
#include "waveseg/segmodel.hpp"
#include "waveseg/wavelet.hpp"

namespace waveseg {

namespace {

struct Suite {
    std::ostream& os;
    bool all_pass = true;

    void report(const char* name, double measured, double tol, bool pass) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s %-28s measured=%.3e tol=%.0e\n",
                      pass ? "PASS" : "FAIL", name, measured, tol);
        os << buf;
        all_pass = all_pass && pass;
    }
    void check(const char* name, double measured, double tol) {
        report(name, measured, tol, measured <= tol);
    }
};

Matrix2D random_matrix(SplitMix64& rng, int r, int c) {
    Matrix2D m(r, c);
    for (double& v : m.v) v = rng.next_range(-1.0, 1.0);
    return m;
}

Tensor random_tensor(SplitMix64& rng, std::vector<int> shape, double lo = -1.0,
                     double hi = 1.0) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_range(lo, hi);
    return Tensor::from_values(std::move(shape), std::move(v));
}

double ci_bruteforce(const Matrix2D& coeffs, const BinaryMask& mask, double eps) {
    double si = 0, so = 0;
    long ni = 0, no = 0;
    for (int r = 0; r < coeffs.rows; ++r)
        for (int c = 0; c < coeffs.cols; ++c) {
            if (mask.at(r, c)) {
                si += std::fabs(coeffs.at(r, c));
                ++ni;
            } else {
                so += std::fabs(coeffs.at(r, c));
                ++no;
            }
        }
    if (ni == 0 || no == 0) return 0.0;
    const double mi = si / ni, mo = so / no;
    return std::fabs(mi - mo) / (mi + mo + eps);
}

}  // namespace

bool run_selftest(std::ostream& os) {
    Suite s{os};
    SplitMix64 rng(424242);

    {  // wavelet reconstruction + energy on 200 random 64x64 matrices
        double worst_rec = 0.0, worst_energy = 0.0;
        for (int t = 0; t < 200; ++t) {
            const Matrix2D m = random_matrix(rng, 64, 64);
            const SubbandSet sb = dwt2(m);
            const Matrix2D back = idwt2(sb);
            for (std::size_t i = 0; i < m.size(); ++i)
                worst_rec = std::max(worst_rec, std::fabs(back.v[i] - m.v[i]));
            const double e_in = kern::sum_sq(m.v.data(), m.size());
            const double e_out =
                kern::sum_sq(sb.ll.v.data(), sb.ll.size()) +
                kern::sum_sq(sb.hl.v.data(), sb.hl.size()) +
                kern::sum_sq(sb.lh.v.data(), sb.lh.size()) +
                kern::sum_sq(sb.hh.v.data(), sb.hh.size());
            worst_energy = std::max(worst_energy, std::fabs(e_in - e_out) / e_in);
        }
        s.check("wavelet_reconstruction", worst_rec, 1e-6);
        s.check("wavelet_energy", worst_energy, 1e-9);
    }

    {  // linearity
        const Matrix2D x = random_matrix(rng, 32, 32), y = random_matrix(rng, 32, 32);
        Matrix2D z(32, 32);
        for (std::size_t i = 0; i < z.size(); ++i) z.v[i] = 1.7 * x.v[i] - 0.4 * y.v[i];
        const SubbandSet sx = dwt2(x), sy = dwt2(y), sz = dwt2(z);
        double worst = 0.0;
        auto cmp = [&](const Matrix2D& a, const Matrix2D& bx, const Matrix2D& by) {
            for (std::size_t i = 0; i < a.size(); ++i)
                worst = std::max(worst, std::fabs(a.v[i] - (1.7 * bx.v[i] - 0.4 * by.v[i])));
        };
        cmp(sz.ll, sx.ll, sy.ll);
        cmp(sz.hl, sx.hl, sy.hl);
        cmp(sz.lh, sx.lh, sy.lh);
        cmp(sz.hh, sx.hh, sy.hh);
        s.check("wavelet_linearity", worst, 1e-9);
    }

    {  // band separation
        Matrix2D m(16, 16);
        for (int r = 0; r < 16; ++r)
            for (int c = 0; c < 16; ++c) m.at(r, c) = std::sin(0.9 * c);
        const SubbandSet sb = dwt2(m);
        double worst = 0.0;
        for (double v : sb.lh.v) worst = std::max(worst, std::fabs(v));
        for (double v : sb.hh.v) worst = std::max(worst, std::fabs(v));
        s.check("wavelet_band_separation", worst, 1e-12);
    }

    {  // hand-computed 2x2 case
        const SubbandSet sb = dwt2(Matrix2D(2, 2, {1, 2, 3, 4}));
        const double err = std::fabs(sb.ll.at(0, 0) - 5.0) + std::fabs(sb.hl.at(0, 0) + 1.0) +
                           std::fabs(sb.lh.at(0, 0) + 2.0) + std::fabs(sb.hh.at(0, 0));
        s.check("wavelet_hand_case", err, 1e-12);
    }

    {  // CI against brute force + symmetry + range
        double worst = 0.0, worst_sym = 0.0;
        bool in_range = true;
        for (int t = 0; t < 20; ++t) {
            const Matrix2D coeffs = random_matrix(rng, 16, 16);
            BinaryMask mask(16, 16);
            for (auto& b : mask.v) b = rng.next_double() < 0.3 ? 1 : 0;
            const double got = contrast_index(coeffs, mask, 1e-8);
            worst = std::max(worst, std::fabs(got - ci_bruteforce(coeffs, mask, 1e-8)));
            in_range = in_range && got >= 0.0 && got < 1.0;
            BinaryMask inv = mask;
            for (auto& b : inv.v) b = b ? 0 : 1;
            worst_sym = std::max(worst_sym, std::fabs(contrast_index(coeffs, inv, 1e-8) - got));
        }
        s.check("ci_bruteforce_oracle", worst, 1e-12);
        s.check("ci_label_swap_symmetry", worst_sym, 0.0);
        s.report("ci_range", in_range ? 0.0 : 1.0, 0.0, in_range);
    }

    {  // window partition/merge round trip, bit exact
        const Tensor x = random_tensor(rng, {2, 3, 8, 8});
        const Tensor back = window_merge(window_partition(x, 4), 4, 2, 3, 8, 8);
        const bool same =
            std::memcmp(back.data(), x.data(), x.numel() * sizeof(double)) == 0;
        s.report("window_roundtrip_bitexact", same ? 0.0 : 1.0, 0.0, same);
    }

    if (kern::backend_supported(kern::Backend::avx2)) {
        // scalar vs avx2 bitwise equivalence on the dispatched kernels
        const std::size_t n = 1023;
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = rng.next_range(-2, 2);
            b[i] = rng.next_range(-2, 2);
        }
        std::vector<double> ga(64 * 48), gb(48 * 33);
        for (double& v : ga) v = rng.next_range(-1, 1);
        for (double& v : gb) v = rng.next_range(-1, 1);
        auto run = [&] {
            std::vector<double> out(n), c(64 * 33, 0.0);
            kern::add(a.data(), b.data(), out.data(), n);
            double r = kern::sum(out.data(), n) + kern::dot(a.data(), b.data(), n) +
                       kern::sum_abs(a.data(), n) + kern::sum_sq(b.data(), n);
            kern::gemm(64, 33, 48, ga.data(), gb.data(), c.data());
            r += kern::sum(c.data(), c.size());
            return r;
        };
        const kern::Backend prev = kern::active_backend();
        kern::set_backend(kern::Backend::scalar);
        const double rs = run();
        kern::set_backend(kern::Backend::avx2);
        const double rv = run();
        kern::set_backend(prev);
        const bool same = std::memcmp(&rs, &rv, sizeof(double)) == 0;
        s.report("kernel_backend_equivalence", same ? 0.0 : std::fabs(rs - rv), 0.0, same);
    }

    {  // gradient checks at double-precision tolerance
        auto gc = [&](const char* name, auto fn, std::vector<Tensor> inputs, double tol) {
            const GradCheckReport rep = grad_check(fn, std::move(inputs), tol, 99);
            s.check(name, rep.max_rel_err, tol);
        };
        gc("grad_conv2d",
           [](const std::vector<Tensor>& in) {
               return conv2d(in[0], in[1], in[2], {.stride = 1, .padding = 1});
           },
           {random_tensor(rng, {1, 3, 6, 6}), random_tensor(rng, {4, 3, 3, 3}),
            random_tensor(rng, {4})},
           1e-5);
        gc("grad_group_norm",
           [](const std::vector<Tensor>& in) { return group_norm(in[0], 2, in[1], in[2]); },
           {random_tensor(rng, {2, 4, 3, 3}), random_tensor(rng, {4}, 0.5, 1.5),
            random_tensor(rng, {4})},
           1e-5);
        gc("grad_cross_attention",
           [](const std::vector<Tensor>& in) {
               AttentionParams p{in[1], in[2], in[3], in[4], 2};
               return cross_attention(in[0], in[5], p);
           },
           {random_tensor(rng, {2, 4, 4}), random_tensor(rng, {4, 4}),
            random_tensor(rng, {4, 4}), random_tensor(rng, {4, 4}),
            random_tensor(rng, {4, 4}), random_tensor(rng, {2, 4, 4})},
           1e-4);
        gc("grad_dice_bce_loss",
           [](const std::vector<Tensor>& in) {
               std::vector<double> t(in[0].numel());
               SplitMix64 trng(5);
               for (double& v : t) v = trng.next_double() < 0.4 ? 1.0 : 0.0;
               return dice_bce_loss(in[0], Tensor::from_values(in[0].shape(), t));
           },
           {random_tensor(rng, {2, 1, 4, 4}, -2, 2)}, 1e-5);
        gc("grad_haar_stack",
           [](const std::vector<Tensor>& in) { return haar_analysis_stack(in[0]); },
           {random_tensor(rng, {1, 2, 4, 4})}, 1e-5);
    }

    {  // identity at init, 10 random inputs through the default toy model
        ModelConfig cfg;
        const SegModel full(cfg, 7);
        const SegModel rgb = full.ablate(AblationMode::rgb_only);
        double worst = 0.0;
        for (int t = 0; t < 10; ++t) {
            const Tensor img = random_tensor(rng, {1, 3, 64, 64}, 0.0, 1.0);
            const Tensor a = full.forward(img);
            const Tensor b = rgb.forward(img);
            for (std::size_t i = 0; i < a.numel(); ++i)
                worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
        }
        s.check("bswca_identity_at_init", worst, 1e-5);
    }

    {  // attention rows sum to 1
        const Tensor q = random_tensor(rng, {2, 8, 8}, -2, 2);
        const Tensor k = random_tensor(rng, {2, 8, 8}, -2, 2);
        const Tensor a = softmax_lastdim(attention_scores(q, k, 2));
        double worst = 0.0;
        for (std::size_t r = 0; r < a.numel() / 8; ++r) {
            double sum = 0.0;
            for (int j = 0; j < 8; ++j) sum += a.data()[r * 8 + j];
            worst = std::max(worst, std::fabs(sum - 1.0));
        }
        s.check("attention_rows_sum_to_1", worst, 1e-6);
    }

    {  // dice = 2 iou / (1 + iou)
        double worst = 0.0;
        for (int t = 0; t < 1000; ++t) {
            BinaryMask a(8, 8), b(8, 8);
            for (auto& v : a.v) v = rng.next_double() < 0.4 ? 1 : 0;
            for (auto& v : b.v) v = rng.next_double() < 0.4 ? 1 : 0;
            const double d = dice(a, b), j = iou(a, b);
            worst = std::max(worst, std::fabs(d - 2.0 * j / (1.0 + j)));
        }
        s.check("metric_identity", worst, 1e-12);
    }

    {  // two-step Adam recurrence
        const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
        double em = 0, ev = 0, ep = 1.0;
        const double g1 = 0.5, g2 = -0.25;
        em = b1 * em + (1 - b1) * g1;
        ev = b2 * ev + (1 - b2) * g1 * g1;
        ep -= lr * (em / (1 - b1)) / (std::sqrt(ev / (1 - b2)) + eps);
        em = b1 * em + (1 - b1) * g2;
        ev = b2 * ev + (1 - b2) * g2 * g2;
        ep -= lr * (em / (1 - b1 * b1)) / (std::sqrt(ev / (1 - b2 * b2)) + eps);
        double p = 1.0, m = 0, v = 0, g = g1;
        kern::adam_update(&p, &g, &m, &v, 1, lr, b1, b2, eps, 1 / (1 - b1), 1 / (1 - b2));
        g = g2;
        kern::adam_update(&p, &g, &m, &v, 1, lr, b1, b2, eps, 1 / (1 - b1 * b1),
                          1 / (1 - b2 * b2));
        s.check("adam_two_step_oracle", std::fabs(p - ep), 1e-12);
    }

    return s.all_pass;
}

}  // namespace waveseg
