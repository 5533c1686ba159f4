// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "waveseg/kernels.hpp"
#include "waveseg/ops.hpp"

namespace waveseg {

using detail::Node;
using detail::make_op;

Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma,
                  const Tensor& beta, double eps) {
    if (x.shape().size() != 4)
        throw std::invalid_argument("group_norm: expected NCHW");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (groups < 1 || c % groups != 0)
        throw std::invalid_argument("group_norm: groups must divide C");
    if (gamma.shape() != std::vector<int>{c} || beta.shape() != std::vector<int>{c})
        throw std::invalid_argument("group_norm: gamma/beta must have C elements");
    const int cg = c / groups;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t gsize = static_cast<std::size_t>(cg) * plane;

    std::vector<double> out(x.numel());
    // Per (sample, group) statistics, kept for the backward pass.
    auto mean = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * groups);
    auto inv_std = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * groups);

    for (int ni = 0; ni < n; ++ni) {
        for (int g = 0; g < groups; ++g) {
            const std::size_t off =
                static_cast<std::size_t>(ni) * c * plane + static_cast<std::size_t>(g) * gsize;
            const double* src = x.data() + off;
            const double mu = kern::sum(src, gsize) / static_cast<double>(gsize);
            double sq = 0.0;
            for (std::size_t i = 0; i < gsize; ++i) {
                const double dv = src[i] - mu;
                sq += dv * dv;
            }
            const double var = sq / static_cast<double>(gsize);
            const double inv = 1.0 / std::sqrt(var + eps);
            (*mean)[static_cast<std::size_t>(ni) * groups + g] = mu;
            (*inv_std)[static_cast<std::size_t>(ni) * groups + g] = inv;
            for (int cc = 0; cc < cg; ++cc) {
                const int ch = g * cg + cc;
                const double gm = gamma.data()[ch], bt = beta.data()[ch];
                const double* s = src + static_cast<std::size_t>(cc) * plane;
                double* d = out.data() + off + static_cast<std::size_t>(cc) * plane;
                for (std::size_t i = 0; i < plane; ++i)
                    d[i] = (s[i] - mu) * inv * gm + bt;
            }
        }
    }

    return make_op(
        "group_norm", x.shape(), std::move(out), {x, gamma, beta},
        [n, c, groups, cg, plane, gsize, eps, mean, inv_std](Node& self) {
            Node& xn = *self.parents[0];
            Node& gn = *self.parents[1];
            Node& bn = *self.parents[2];
            if (gn.requires_grad) gn.ensure_grad();
            if (bn.requires_grad) bn.ensure_grad();
            if (xn.requires_grad) xn.ensure_grad();

            std::vector<double> xhat(gsize), dxhat(gsize);
            for (int ni = 0; ni < n; ++ni) {
                for (int g = 0; g < groups; ++g) {
                    const std::size_t off = static_cast<std::size_t>(ni) * c * plane +
                                            static_cast<std::size_t>(g) * gsize;
                    const double mu = (*mean)[static_cast<std::size_t>(ni) * groups + g];
                    const double inv = (*inv_std)[static_cast<std::size_t>(ni) * groups + g];
                    const double* xv = xn.value.data() + off;
                    const double* gy = self.grad.data() + off;

                    for (std::size_t i = 0; i < gsize; ++i) xhat[i] = (xv[i] - mu) * inv;

                    for (int cc = 0; cc < cg; ++cc) {
                        const int ch = g * cg + cc;
                        const double* gyc = gy + static_cast<std::size_t>(cc) * plane;
                        const double* xhc = xhat.data() + static_cast<std::size_t>(cc) * plane;
                        if (bn.requires_grad) bn.grad[ch] += kern::sum(gyc, plane);
                        if (gn.requires_grad) gn.grad[ch] += kern::dot(gyc, xhc, plane);
                        const double gm = gn.value[ch];
                        double* dst = dxhat.data() + static_cast<std::size_t>(cc) * plane;
                        for (std::size_t i = 0; i < plane; ++i) dst[i] = gyc[i] * gm;
                    }

                    if (!xn.requires_grad) continue;
                    const double m = static_cast<double>(gsize);
                    const double s1 = kern::sum(dxhat.data(), gsize);
                    const double s2 = kern::dot(dxhat.data(), xhat.data(), gsize);
                    double* gx = xn.grad.data() + off;
                    for (std::size_t i = 0; i < gsize; ++i)
                        gx[i] += inv * (dxhat[i] - s1 / m - xhat[i] * s2 / m);
                }
            }
        });
}

Tensor dice_bce_loss(const Tensor& logits, const Tensor& target) {
    if (logits.shape() != target.shape())
        throw std::invalid_argument("dice_bce_loss: shape mismatch");
    if (logits.shape().size() != 4 || logits.dim(1) != 1)
        throw std::invalid_argument("dice_bce_loss: expected N x 1 x H x W logits");
    for (double t : target.values())
        if (t != 0.0 && t != 1.0)
            throw std::invalid_argument("dice_bce_loss: target must be binary");

    const int n = logits.dim(0);
    const std::size_t per = logits.numel() / static_cast<std::size_t>(n);
    const std::size_t total = logits.numel();
    const double* z = logits.data();
    const double* t = target.data();

    // Stable BCE-with-logits: max(z,0) - z*t + log1p(exp(-|z|)).
    double bce = 0.0;
    for (std::size_t i = 0; i < total; ++i)
        bce += std::max(z[i], 0.0) - z[i] * t[i] + std::log1p(std::exp(-std::fabs(z[i])));
    bce /= static_cast<double>(total);

    auto probs = std::make_shared<std::vector<double>>(total);
    auto sums = std::make_shared<std::vector<double>>(static_cast<std::size_t>(n) * 3);
    double dice_sum = 0.0;
    for (int s = 0; s < n; ++s) {
        double sp = 0.0, st = 0.0, spt = 0.0;
        for (std::size_t i = static_cast<std::size_t>(s) * per; i < (s + 1) * per; ++i) {
            const double v = z[i];
            const double p = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                      : std::exp(v) / (1.0 + std::exp(v));
            (*probs)[i] = p;
            sp += p;
            st += t[i];
            spt += p * t[i];
        }
        (*sums)[static_cast<std::size_t>(s) * 3] = sp;
        (*sums)[static_cast<std::size_t>(s) * 3 + 1] = st;
        (*sums)[static_cast<std::size_t>(s) * 3 + 2] = spt;
        dice_sum += (2.0 * spt + 1.0) / (sp + st + 1.0);
    }
    const double loss = bce + 1.0 - dice_sum / static_cast<double>(n);

    return make_op(
        "dice_bce_loss", {1}, {loss}, {logits, target},
        [n, per, total, probs, sums](Node& self) {
            Node& zn = *self.parents[0];
            Node& tn = *self.parents[1];
            if (!zn.requires_grad) return;
            zn.ensure_grad();
            const double g0 = self.grad[0];
            const double* tv = tn.value.data();
            for (int s = 0; s < n; ++s) {
                const double sp = (*sums)[static_cast<std::size_t>(s) * 3];
                const double st = (*sums)[static_cast<std::size_t>(s) * 3 + 1];
                const double spt = (*sums)[static_cast<std::size_t>(s) * 3 + 2];
                const double denom = sp + st + 1.0;
                for (std::size_t i = static_cast<std::size_t>(s) * per; i < (s + 1) * per; ++i) {
                    const double p = (*probs)[i];
                    const double dbce = (p - tv[i]) / static_cast<double>(total);
                    // d(-softDice_s)/dp_i, averaged over the batch
                    const double ddice =
                        -(2.0 * tv[i] * denom - (2.0 * spt + 1.0)) / (denom * denom) /
                        static_cast<double>(n);
                    zn.grad[i] += g0 * (dbce + ddice * p * (1.0 - p));
                }
            }
        });
}

Adam::Adam(std::vector<Tensor> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void Adam::zero_grad() {
    for (Tensor& p : params_) p.zero_grad();
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 / (1.0 - std::pow(beta1_, static_cast<double>(t_)));
    const double bc2 = 1.0 / (1.0 - std::pow(beta2_, static_cast<double>(t_)));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& p = params_[i];
        if (!p.has_grad()) continue;  // untouched parameter: moments stay zero too
        kern::adam_update(p.data(), p.grad().data(), m_[i].data(), v_[i].data(),
                          p.numel(), lr_, beta1_, beta2_, eps_, bc1, bc2);
    }
}

}  // namespace waveseg
