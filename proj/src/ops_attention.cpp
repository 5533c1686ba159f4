// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include "waveseg/kernels.hpp"
#include "waveseg/ops.hpp"

namespace waveseg {

using detail::Node;
using detail::make_op;

namespace {

void transpose(const double* src, std::size_t rows, std::size_t cols, double* dst) {
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) dst[c * rows + r] = src[r * cols + c];
}

struct Btc {
    int b, t, c;
    explicit Btc(const Tensor& x) {
        if (x.shape().size() != 3)
            throw std::invalid_argument("expected a B x T x C token tensor");
        b = x.dim(0);
        t = x.dim(1);
        c = x.dim(2);
    }
};

// Gathers head slice h of tokens (B x T x C) into a T x D row-major block.
void pack_head(const double* tokens, int t, int c, int b, int head, int d, double* dst) {
    const double* base = tokens + static_cast<std::size_t>(b) * t * c +
                         static_cast<std::size_t>(head) * d;
    for (int i = 0; i < t; ++i)
        std::memcpy(dst + static_cast<std::size_t>(i) * d,
                    base + static_cast<std::size_t>(i) * c,
                    static_cast<std::size_t>(d) * sizeof(double));
}

void scatter_head_add(const double* src, int t, int c, int b, int head, int d,
                      double* tokens_grad) {
    double* base = tokens_grad + static_cast<std::size_t>(b) * t * c +
                   static_cast<std::size_t>(head) * d;
    for (int i = 0; i < t; ++i)
        kern::axpy(1.0, src + static_cast<std::size_t>(i) * d,
                   base + static_cast<std::size_t>(i) * c, static_cast<std::size_t>(d));
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& w) {
    const Btc d(x);
    if (w.shape().size() != 2 || w.dim(0) != d.c)
        throw std::invalid_argument("linear: weight must be C x Cout");
    const int co = w.dim(1);
    const std::size_t rows = static_cast<std::size_t>(d.b) * d.t;
    std::vector<double> out(rows * co, 0.0);
    kern::gemm(rows, static_cast<std::size_t>(co), static_cast<std::size_t>(d.c),
               x.data(), w.data(), out.data());
    return make_op("linear", {d.b, d.t, co}, std::move(out), {x, w},
                   [d, co, rows](Node& self) {
                       Node& xn = *self.parents[0];
                       Node& wn = *self.parents[1];
                       if (xn.requires_grad) {
                           xn.ensure_grad();
                           std::vector<double> wt(static_cast<std::size_t>(co) * d.c);
                           transpose(wn.value.data(), static_cast<std::size_t>(d.c),
                                     static_cast<std::size_t>(co), wt.data());
                           kern::gemm(rows, static_cast<std::size_t>(d.c),
                                      static_cast<std::size_t>(co), self.grad.data(),
                                      wt.data(), xn.grad.data());
                       }
                       if (wn.requires_grad) {
                           wn.ensure_grad();
                           std::vector<double> xt(static_cast<std::size_t>(d.c) * rows);
                           transpose(xn.value.data(), rows, static_cast<std::size_t>(d.c),
                                     xt.data());
                           kern::gemm(static_cast<std::size_t>(d.c),
                                      static_cast<std::size_t>(co), rows, xt.data(),
                                      self.grad.data(), wn.grad.data());
                       }
                   });
}

Tensor attention_scores(const Tensor& q, const Tensor& k, int heads) {
    const Btc dq(q), dk(k);
    if (dq.b != dk.b || dq.t != dk.t || dq.c != dk.c)
        throw std::invalid_argument("attention_scores: q/k shape mismatch");
    if (heads < 1 || dq.c % heads != 0)
        throw std::invalid_argument("attention_scores: heads must divide C");
    const int hd = dq.c / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(hd));
    const std::size_t tt = static_cast<std::size_t>(dq.t) * dq.t;

    std::vector<double> out(static_cast<std::size_t>(dq.b) * heads * tt, 0.0);
    std::vector<double> qb(static_cast<std::size_t>(dq.t) * hd);
    std::vector<double> kt(static_cast<std::size_t>(hd) * dq.t);
    std::vector<double> kb(static_cast<std::size_t>(dq.t) * hd);
    for (int b = 0; b < dq.b; ++b)
        for (int h = 0; h < heads; ++h) {
            pack_head(q.data(), dq.t, dq.c, b, h, hd, qb.data());
            pack_head(k.data(), dq.t, dq.c, b, h, hd, kb.data());
            transpose(kb.data(), static_cast<std::size_t>(dq.t),
                      static_cast<std::size_t>(hd), kt.data());
            double* s = out.data() + (static_cast<std::size_t>(b) * heads + h) * tt;
            kern::gemm(static_cast<std::size_t>(dq.t), static_cast<std::size_t>(dq.t),
                       static_cast<std::size_t>(hd), qb.data(), kt.data(), s);
            kern::scale(s, sc, s, tt);
        }

    const Btc d = dq;
    return make_op(
        "attention_scores", {dq.b, heads, dq.t, dq.t}, std::move(out), {q, k},
        [d, heads, hd, sc, tt](Node& self) {
            Node& qn = *self.parents[0];
            Node& kn = *self.parents[1];
            std::vector<double> gs(tt);
            std::vector<double> gst(tt);
            std::vector<double> qb(static_cast<std::size_t>(d.t) * hd);
            std::vector<double> kb(static_cast<std::size_t>(d.t) * hd);
            std::vector<double> gout(static_cast<std::size_t>(d.t) * hd);
            if (qn.requires_grad) qn.ensure_grad();
            if (kn.requires_grad) kn.ensure_grad();
            for (int b = 0; b < d.b; ++b)
                for (int h = 0; h < heads; ++h) {
                    kern::scale(self.grad.data() + (static_cast<std::size_t>(b) * heads + h) * tt,
                                sc, gs.data(), tt);
                    if (qn.requires_grad) {
                        pack_head(kn.value.data(), d.t, d.c, b, h, hd, kb.data());
                        std::fill(gout.begin(), gout.end(), 0.0);
                        kern::gemm(static_cast<std::size_t>(d.t), static_cast<std::size_t>(hd),
                                   static_cast<std::size_t>(d.t), gs.data(), kb.data(),
                                   gout.data());
                        scatter_head_add(gout.data(), d.t, d.c, b, h, hd, qn.grad.data());
                    }
                    if (kn.requires_grad) {
                        pack_head(qn.value.data(), d.t, d.c, b, h, hd, qb.data());
                        transpose(gs.data(), static_cast<std::size_t>(d.t),
                                  static_cast<std::size_t>(d.t), gst.data());
                        std::fill(gout.begin(), gout.end(), 0.0);
                        kern::gemm(static_cast<std::size_t>(d.t), static_cast<std::size_t>(hd),
                                   static_cast<std::size_t>(d.t), gst.data(), qb.data(),
                                   gout.data());
                        scatter_head_add(gout.data(), d.t, d.c, b, h, hd, kn.grad.data());
                    }
                }
        });
}

Tensor softmax_lastdim(const Tensor& x) {
    const auto& shape = x.shape();
    if (shape.empty()) throw std::invalid_argument("softmax_lastdim: scalar input");
    const std::size_t cols = static_cast<std::size_t>(shape.back());
    const std::size_t rows = x.numel() / cols;
    std::vector<double> out(x.numel());
    const double* in = x.data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* src = in + r * cols;
        double* dst = out.data() + r * cols;
        double mx = src[0];
        for (std::size_t i = 1; i < cols; ++i) mx = std::max(mx, src[i]);
        double denom = 0.0;
        for (std::size_t i = 0; i < cols; ++i) {
            dst[i] = std::exp(src[i] - mx);
            denom += dst[i];
        }
        for (std::size_t i = 0; i < cols; ++i) dst[i] /= denom;
    }
    return make_op("softmax_lastdim", shape, std::move(out), {x},
                   [cols, rows](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       p.ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                           const double* y = self.value.data() + r * cols;
                           const double* gy = self.grad.data() + r * cols;
                           double* gx = p.grad.data() + r * cols;
                           const double dotv = kern::dot(gy, y, cols);
                           for (std::size_t i = 0; i < cols; ++i)
                               gx[i] += y[i] * (gy[i] - dotv);
                       }
                   });
}

Tensor attention_apply(const Tensor& probs, const Tensor& v, int heads) {
    if (probs.shape().size() != 4)
        throw std::invalid_argument("attention_apply: probs must be B x H x T x T");
    const Btc dv(v);
    const int b = probs.dim(0), h = probs.dim(1), t = probs.dim(2);
    if (probs.dim(3) != t || b != dv.b || t != dv.t || h != heads ||
        dv.c % heads != 0)
        throw std::invalid_argument("attention_apply: shape mismatch");
    const int hd = dv.c / heads;
    const std::size_t tt = static_cast<std::size_t>(t) * t;

    std::vector<double> out(static_cast<std::size_t>(b) * t * dv.c, 0.0);
    std::vector<double> vb(static_cast<std::size_t>(t) * hd);
    std::vector<double> ob(static_cast<std::size_t>(t) * hd);
    for (int bi = 0; bi < b; ++bi)
        for (int hi = 0; hi < h; ++hi) {
            pack_head(v.data(), t, dv.c, bi, hi, hd, vb.data());
            std::fill(ob.begin(), ob.end(), 0.0);
            kern::gemm(static_cast<std::size_t>(t), static_cast<std::size_t>(hd),
                       static_cast<std::size_t>(t),
                       probs.data() + (static_cast<std::size_t>(bi) * h + hi) * tt,
                       vb.data(), ob.data());
            // Direct placement: out head slice starts at zero, single writer.
            double* base = out.data() + static_cast<std::size_t>(bi) * t * dv.c +
                           static_cast<std::size_t>(hi) * hd;
            for (int i = 0; i < t; ++i)
                std::memcpy(base + static_cast<std::size_t>(i) * dv.c,
                            ob.data() + static_cast<std::size_t>(i) * hd,
                            static_cast<std::size_t>(hd) * sizeof(double));
        }

    const int c = dv.c;
    return make_op(
        "attention_apply", {b, t, c}, std::move(out), {probs, v},
        [b, h, t, c, hd, tt](Node& self) {
            Node& an = *self.parents[0];
            Node& vn = *self.parents[1];
            std::vector<double> vb(static_cast<std::size_t>(t) * hd);
            std::vector<double> vt(static_cast<std::size_t>(hd) * t);
            std::vector<double> go(static_cast<std::size_t>(t) * hd);
            std::vector<double> at(tt);
            std::vector<double> gvb(static_cast<std::size_t>(t) * hd);
            if (an.requires_grad) an.ensure_grad();
            if (vn.requires_grad) vn.ensure_grad();
            for (int bi = 0; bi < b; ++bi)
                for (int hi = 0; hi < h; ++hi) {
                    pack_head(self.grad.data(), t, c, bi, hi, hd, go.data());
                    if (an.requires_grad) {
                        pack_head(vn.value.data(), t, c, bi, hi, hd, vb.data());
                        transpose(vb.data(), static_cast<std::size_t>(t),
                                  static_cast<std::size_t>(hd), vt.data());
                        kern::gemm(static_cast<std::size_t>(t), static_cast<std::size_t>(t),
                                   static_cast<std::size_t>(hd), go.data(), vt.data(),
                                   an.grad.data() + (static_cast<std::size_t>(bi) * h + hi) * tt);
                    }
                    if (vn.requires_grad) {
                        transpose(an.value.data() + (static_cast<std::size_t>(bi) * h + hi) * tt,
                                  static_cast<std::size_t>(t), static_cast<std::size_t>(t),
                                  at.data());
                        std::fill(gvb.begin(), gvb.end(), 0.0);
                        kern::gemm(static_cast<std::size_t>(t), static_cast<std::size_t>(hd),
                                   static_cast<std::size_t>(t), at.data(), go.data(),
                                   gvb.data());
                        scatter_head_add(gvb.data(), t, c, bi, hi, hd, vn.grad.data());
                    }
                }
        });
}

Tensor cross_attention(const Tensor& q_tokens, const Tensor& kv_tokens,
                       const AttentionParams& p) {
    const Btc dq(q_tokens), dkv(kv_tokens);
    if (dq.b != dkv.b || dq.t != dkv.t || dq.c != dkv.c)
        throw std::invalid_argument("cross_attention: q/kv token shape mismatch");
    if (p.heads < 1 || dq.c % p.heads != 0)
        throw std::invalid_argument("cross_attention: heads must divide C");
    const Tensor q = linear(q_tokens, p.wq);
    const Tensor k = linear(kv_tokens, p.wk);
    const Tensor v = linear(kv_tokens, p.wv);
    const Tensor a = softmax_lastdim(attention_scores(q, k, p.heads));
    return linear(attention_apply(a, v, p.heads), p.wo);
}

Tensor haar_analysis_stack(const Tensor& x) {
    if (x.shape().size() != 4)
        throw std::invalid_argument("haar_analysis_stack: expected NCHW");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0 || h < 2 || w < 2)
        throw std::invalid_argument("haar_analysis_stack: H and W must be even");
    const int oh = h / 2, ow = w / 2;
    const std::size_t band_plane = static_cast<std::size_t>(oh) * ow;
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    std::vector<double> out(static_cast<std::size_t>(n) * 4 * c * band_plane);
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            const double* src = x.data() + (static_cast<std::size_t>(ni) * c + ci) * in_plane;
            // band block order along channels: LL, HL, LH, HH
            double* base = out.data() + static_cast<std::size_t>(ni) * 4 * c * band_plane;
            double* ll = base + (0 * static_cast<std::size_t>(c) + ci) * band_plane;
            double* hl = base + (1 * static_cast<std::size_t>(c) + ci) * band_plane;
            double* lh = base + (2 * static_cast<std::size_t>(c) + ci) * band_plane;
            double* hh = base + (3 * static_cast<std::size_t>(c) + ci) * band_plane;
            for (int r = 0; r < oh; ++r)
                kern::haar_block_fwd(src + static_cast<std::size_t>(2 * r) * w,
                                     src + static_cast<std::size_t>(2 * r + 1) * w,
                                     static_cast<std::size_t>(ow),
                                     ll + static_cast<std::size_t>(r) * ow,
                                     hl + static_cast<std::size_t>(r) * ow,
                                     lh + static_cast<std::size_t>(r) * ow,
                                     hh + static_cast<std::size_t>(r) * ow);
        }
    }
    return make_op(
        "haar_analysis_stack", {n, 4 * c, oh, ow}, std::move(out), {x},
        [n, c, h, w, oh, ow, band_plane, in_plane](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            std::vector<double> scratch(in_plane);
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < c; ++ci) {
                    const double* base =
                        self.grad.data() + static_cast<std::size_t>(ni) * 4 * c * band_plane;
                    const double* ll = base + (0 * static_cast<std::size_t>(c) + ci) * band_plane;
                    const double* hl = base + (1 * static_cast<std::size_t>(c) + ci) * band_plane;
                    const double* lh = base + (2 * static_cast<std::size_t>(c) + ci) * band_plane;
                    const double* hh = base + (3 * static_cast<std::size_t>(c) + ci) * band_plane;
                    for (int r = 0; r < oh; ++r)
                        kern::haar_block_inv(ll + static_cast<std::size_t>(r) * ow,
                                             hl + static_cast<std::size_t>(r) * ow,
                                             lh + static_cast<std::size_t>(r) * ow,
                                             hh + static_cast<std::size_t>(r) * ow,
                                             static_cast<std::size_t>(ow),
                                             scratch.data() + static_cast<std::size_t>(2 * r) * w,
                                             scratch.data() + static_cast<std::size_t>(2 * r + 1) * w);
                    kern::axpy(1.0, scratch.data(),
                               p.grad.data() + (static_cast<std::size_t>(ni) * c + ci) * in_plane,
                               in_plane);
                }
        });
}

Tensor haar_synthesis_stack(const Tensor& bands) {
    if (bands.shape().size() != 4)
        throw std::invalid_argument("haar_synthesis_stack: expected NCHW");
    const int n = bands.dim(0), c4 = bands.dim(1), oh = bands.dim(2), ow = bands.dim(3);
    if (c4 % 4 != 0)
        throw std::invalid_argument("haar_synthesis_stack: channels must be 4*C");
    const int c = c4 / 4;
    const int h = oh * 2, w = ow * 2;
    const std::size_t band_plane = static_cast<std::size_t>(oh) * ow;
    const std::size_t out_plane = static_cast<std::size_t>(h) * w;
    std::vector<double> out(static_cast<std::size_t>(n) * c * out_plane);
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            const double* base =
                bands.data() + static_cast<std::size_t>(ni) * 4 * c * band_plane;
            const double* ll = base + (0 * static_cast<std::size_t>(c) + ci) * band_plane;
            const double* hl = base + (1 * static_cast<std::size_t>(c) + ci) * band_plane;
            const double* lh = base + (2 * static_cast<std::size_t>(c) + ci) * band_plane;
            const double* hh = base + (3 * static_cast<std::size_t>(c) + ci) * band_plane;
            double* dst = out.data() + (static_cast<std::size_t>(ni) * c + ci) * out_plane;
            for (int r = 0; r < oh; ++r)
                kern::haar_block_inv(ll + static_cast<std::size_t>(r) * ow,
                                     hl + static_cast<std::size_t>(r) * ow,
                                     lh + static_cast<std::size_t>(r) * ow,
                                     hh + static_cast<std::size_t>(r) * ow,
                                     static_cast<std::size_t>(ow),
                                     dst + static_cast<std::size_t>(2 * r) * w,
                                     dst + static_cast<std::size_t>(2 * r + 1) * w);
        }
    return make_op(
        "haar_synthesis_stack", {n, c, h, w}, std::move(out), {bands},
        [n, c, h, w, oh, ow, band_plane, out_plane](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            std::vector<double> sll(band_plane), shl(band_plane), slh(band_plane),
                shh(band_plane);
            for (int ni = 0; ni < n; ++ni)
                for (int ci = 0; ci < c; ++ci) {
                    const double* g =
                        self.grad.data() + (static_cast<std::size_t>(ni) * c + ci) * out_plane;
                    for (int r = 0; r < oh; ++r)
                        kern::haar_block_fwd(g + static_cast<std::size_t>(2 * r) * w,
                                             g + static_cast<std::size_t>(2 * r + 1) * w,
                                             static_cast<std::size_t>(ow),
                                             sll.data() + static_cast<std::size_t>(r) * ow,
                                             shl.data() + static_cast<std::size_t>(r) * ow,
                                             slh.data() + static_cast<std::size_t>(r) * ow,
                                             shh.data() + static_cast<std::size_t>(r) * ow);
                    double* base =
                        p.grad.data() + static_cast<std::size_t>(ni) * 4 * c * band_plane;
                    kern::axpy(1.0, sll.data(),
                               base + (0 * static_cast<std::size_t>(c) + ci) * band_plane,
                               band_plane);
                    kern::axpy(1.0, shl.data(),
                               base + (1 * static_cast<std::size_t>(c) + ci) * band_plane,
                               band_plane);
                    kern::axpy(1.0, slh.data(),
                               base + (2 * static_cast<std::size_t>(c) + ci) * band_plane,
                               band_plane);
                    kern::axpy(1.0, shh.data(),
                               base + (3 * static_cast<std::size_t>(c) + ci) * band_plane,
                               band_plane);
                }
        });
}

}  // namespace waveseg
