// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstring>

#include "waveseg/kernels.hpp"
#include "waveseg/ops.hpp"

namespace waveseg {

using detail::Node;
using detail::accumulate;
using detail::make_op;

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
}

// N x C x H x W accessors
struct Nchw {
    int n, c, h, w;
    explicit Nchw(const Tensor& t) {
        if (t.shape().size() != 4)
            throw std::invalid_argument("expected a 4-d N x C x H x W tensor");
        n = t.dim(0);
        c = t.dim(1);
        h = t.dim(2);
        w = t.dim(3);
    }
    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t sample() const { return plane() * c; }
};

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.numel());
    kern::add(a.data(), b.data(), out.data(), out.size());
    return make_op("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
        accumulate(*self.parents[0], self.grad.data(), self.grad.size());
        accumulate(*self.parents[1], self.grad.data(), self.grad.size());
    });
}

Tensor scale(const Tensor& x, double a) {
    std::vector<double> out(x.numel());
    kern::scale(x.data(), a, out.data(), out.size());
    return make_op("scale", x.shape(), std::move(out), {x}, [a](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        kern::axpy(a, self.grad.data(), p.grad.data(), self.grad.size());
    });
}

Tensor relu(const Tensor& x) {
    std::vector<double> out(x.numel());
    kern::relu(x.data(), out.data(), out.size());
    return make_op("relu", x.shape(), std::move(out), {x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        kern::relu_backward(p.value.data(), self.grad.data(), p.grad.data(),
                            self.grad.size());
    });
}

Tensor sigmoid(const Tensor& x) {
    std::vector<double> out(x.numel());
    const double* in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = in[i];
        out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                          : std::exp(v) / (1.0 + std::exp(v));
    }
    return make_op("sigmoid", x.shape(), std::move(out), {x}, [](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double y = self.value[i];
            p.grad[i] += self.grad[i] * y * (1.0 - y);
        }
    });
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
    if (xs.empty()) throw std::invalid_argument("concat_channels: empty input list");
    const Nchw first(xs[0]);
    int c_total = 0;
    for (const Tensor& t : xs) {
        const Nchw d(t);
        if (d.n != first.n || d.h != first.h || d.w != first.w)
            throw std::invalid_argument("concat_channels: N/H/W mismatch");
        c_total += d.c;
    }
    const std::size_t plane = first.plane();
    std::vector<double> out(static_cast<std::size_t>(first.n) * c_total * plane);
    std::size_t off_c = 0;
    for (const Tensor& t : xs) {
        const Nchw d(t);
        for (int n = 0; n < d.n; ++n)
            std::memcpy(out.data() + (static_cast<std::size_t>(n) * c_total + off_c) * plane,
                        t.data() + static_cast<std::size_t>(n) * d.sample(),
                        d.sample() * sizeof(double));
        off_c += static_cast<std::size_t>(d.c);
    }
    return make_op("concat_channels", {first.n, c_total, first.h, first.w},
                   std::move(out), xs, [c_total, plane](Node& self) {
                       std::size_t off_c = 0;
                       for (auto& parent : self.parents) {
                           const std::size_t pc = parent->shape[1];
                           if (parent->requires_grad) {
                               parent->ensure_grad();
                               const int n = parent->shape[0];
                               for (int i = 0; i < n; ++i)
                                   kern::axpy(
                                       1.0,
                                       self.grad.data() +
                                           (static_cast<std::size_t>(i) * c_total + off_c) * plane,
                                       parent->grad.data() + static_cast<std::size_t>(i) * pc * plane,
                                       pc * plane);
                           }
                           off_c += pc;
                       }
                   });
}

Tensor narrow_channels(const Tensor& x, int first, int count) {
    const Nchw d(x);
    if (first < 0 || count <= 0 || first + count > d.c)
        throw std::invalid_argument("narrow_channels: range out of bounds");
    const std::size_t plane = d.plane();
    std::vector<double> out(static_cast<std::size_t>(d.n) * count * plane);
    for (int n = 0; n < d.n; ++n)
        std::memcpy(out.data() + static_cast<std::size_t>(n) * count * plane,
                    x.data() + (static_cast<std::size_t>(n) * d.c + first) * plane,
                    static_cast<std::size_t>(count) * plane * sizeof(double));
    return make_op("narrow_channels", {d.n, count, d.h, d.w}, std::move(out), {x},
                   [d, first, count, plane](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       p.ensure_grad();
                       for (int n = 0; n < d.n; ++n)
                           kern::axpy(1.0,
                                      self.grad.data() +
                                          static_cast<std::size_t>(n) * count * plane,
                                      p.grad.data() +
                                          (static_cast<std::size_t>(n) * d.c + first) * plane,
                                      static_cast<std::size_t>(count) * plane);
                   });
}

Tensor upsample_nearest_2x(const Tensor& x) {
    const Nchw d(x);
    const int oh = d.h * 2, ow = d.w * 2;
    std::vector<double> out(static_cast<std::size_t>(d.n) * d.c * oh * ow);
    const double* in = x.data();
    for (int nc = 0; nc < d.n * d.c; ++nc) {
        const double* src = in + static_cast<std::size_t>(nc) * d.plane();
        double* dst = out.data() + static_cast<std::size_t>(nc) * oh * ow;
        for (int y = 0; y < oh; ++y)
            for (int xx = 0; xx < ow; ++xx)
                dst[static_cast<std::size_t>(y) * ow + xx] =
                    src[static_cast<std::size_t>(y / 2) * d.w + xx / 2];
    }
    return make_op("upsample_nearest_2x", {d.n, d.c, oh, ow}, std::move(out), {x},
                   [d, oh, ow](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       p.ensure_grad();
                       for (int nc = 0; nc < d.n * d.c; ++nc) {
                           const double* g =
                               self.grad.data() + static_cast<std::size_t>(nc) * oh * ow;
                           double* gp = p.grad.data() + static_cast<std::size_t>(nc) * d.plane();
                           for (int y = 0; y < d.h; ++y)
                               for (int xx = 0; xx < d.w; ++xx) {
                                   const std::size_t r0 = static_cast<std::size_t>(2 * y) * ow + 2 * xx;
                                   const std::size_t r1 = r0 + ow;
                                   gp[static_cast<std::size_t>(y) * d.w + xx] +=
                                       (g[r0] + g[r0 + 1]) + (g[r1] + g[r1 + 1]);
                               }
                       }
                   });
}

namespace {

struct LinTap {
    int i0, i1;
    double w0, w1;
};

// Half-pixel-center source taps for 1-d bilinear resampling by integer factor.
std::vector<LinTap> bilinear_taps(int n_in, int factor) {
    std::vector<LinTap> taps(static_cast<std::size_t>(n_in) * factor);
    for (int o = 0; o < n_in * factor; ++o) {
        const double src = (o + 0.5) / factor - 0.5;
        double fl = std::floor(src);
        double frac = src - fl;
        int i0 = static_cast<int>(fl);
        int i1 = i0 + 1;
        if (i0 < 0) { i0 = 0; i1 = 0; frac = 0.0; }
        if (i1 > n_in - 1) { i1 = n_in - 1; i0 = n_in - 1; frac = 0.0; }
        taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - frac, frac};
    }
    return taps;
}

}  // namespace

Tensor upsample_bilinear(const Tensor& x, int factor) {
    if (factor < 1) throw std::invalid_argument("upsample_bilinear: factor must be >= 1");
    const Nchw d(x);
    const int oh = d.h * factor, ow = d.w * factor;
    const auto ty = bilinear_taps(d.h, factor);
    const auto tx = bilinear_taps(d.w, factor);
    std::vector<double> out(static_cast<std::size_t>(d.n) * d.c * oh * ow);
    const double* in = x.data();
    for (int nc = 0; nc < d.n * d.c; ++nc) {
        const double* src = in + static_cast<std::size_t>(nc) * d.plane();
        double* dst = out.data() + static_cast<std::size_t>(nc) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            const LinTap& py = ty[static_cast<std::size_t>(y)];
            const double* r0 = src + static_cast<std::size_t>(py.i0) * d.w;
            const double* r1 = src + static_cast<std::size_t>(py.i1) * d.w;
            for (int xx = 0; xx < ow; ++xx) {
                const LinTap& px = tx[static_cast<std::size_t>(xx)];
                const double top = px.w0 * r0[px.i0] + px.w1 * r0[px.i1];
                const double bot = px.w0 * r1[px.i0] + px.w1 * r1[px.i1];
                dst[static_cast<std::size_t>(y) * ow + xx] = py.w0 * top + py.w1 * bot;
            }
        }
    }
    return make_op(
        "upsample_bilinear", {d.n, d.c, oh, ow}, std::move(out), {x},
        [d, oh, ow, ty, tx](Node& self) {
            Node& p = *self.parents[0];
            if (!p.requires_grad) return;
            p.ensure_grad();
            for (int nc = 0; nc < d.n * d.c; ++nc) {
                const double* g = self.grad.data() + static_cast<std::size_t>(nc) * oh * ow;
                double* gp = p.grad.data() + static_cast<std::size_t>(nc) * d.plane();
                for (int y = 0; y < oh; ++y) {
                    const LinTap& py = ty[static_cast<std::size_t>(y)];
                    for (int xx = 0; xx < ow; ++xx) {
                        const LinTap& px = tx[static_cast<std::size_t>(xx)];
                        const double gv = g[static_cast<std::size_t>(y) * ow + xx];
                        gp[static_cast<std::size_t>(py.i0) * d.w + px.i0] += py.w0 * px.w0 * gv;
                        gp[static_cast<std::size_t>(py.i0) * d.w + px.i1] += py.w0 * px.w1 * gv;
                        gp[static_cast<std::size_t>(py.i1) * d.w + px.i0] += py.w1 * px.w0 * gv;
                        gp[static_cast<std::size_t>(py.i1) * d.w + px.i1] += py.w1 * px.w1 * gv;
                    }
                }
            }
        });
}

Tensor reduce_dot(const Tensor& x, const std::vector<double>& weights) {
    if (weights.size() != x.numel())
        throw std::invalid_argument("reduce_dot: weight size mismatch");
    const double v = kern::dot(x.data(), weights.data(), weights.size());
    auto w = std::make_shared<std::vector<double>>(weights);
    return make_op("reduce_dot", {1}, {v}, {x}, [w](Node& self) {
        Node& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        kern::axpy(self.grad[0], w->data(), p.grad.data(), w->size());
    });
}

Tensor window_partition(const Tensor& x, int w) {
    const Nchw d(x);
    if (w < 1 || d.h % w != 0 || d.w % w != 0)
        throw std::invalid_argument("window_partition: H and W must be divisible by w");
    const int nwh = d.h / w, nww = d.w / w;
    const int windows = d.n * nwh * nww;
    const int t = w * w;
    std::vector<double> out(static_cast<std::size_t>(windows) * t * d.c);
    const double* in = x.data();
    for (int n = 0; n < d.n; ++n)
        for (int c = 0; c < d.c; ++c) {
            const double* plane = in + (static_cast<std::size_t>(n) * d.c + c) * d.plane();
            for (int wy = 0; wy < nwh; ++wy)
                for (int wx = 0; wx < nww; ++wx) {
                    const int b = (n * nwh + wy) * nww + wx;
                    for (int tyi = 0; tyi < w; ++tyi)
                        for (int txi = 0; txi < w; ++txi) {
                            const int tok = tyi * w + txi;
                            out[(static_cast<std::size_t>(b) * t + tok) * d.c + c] =
                                plane[static_cast<std::size_t>(wy * w + tyi) * d.w + wx * w + txi];
                        }
                }
        }
    return make_op("window_partition", {windows, t, d.c}, std::move(out), {x},
                   [d, w, nwh, nww, t](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       p.ensure_grad();
                       for (int n = 0; n < d.n; ++n)
                           for (int c = 0; c < d.c; ++c) {
                               double* gp = p.grad.data() +
                                            (static_cast<std::size_t>(n) * d.c + c) * d.plane();
                               for (int wy = 0; wy < nwh; ++wy)
                                   for (int wx = 0; wx < nww; ++wx) {
                                       const int b = (n * nwh + wy) * nww + wx;
                                       for (int tyi = 0; tyi < w; ++tyi)
                                           for (int txi = 0; txi < w; ++txi) {
                                               const int tok = tyi * w + txi;
                                               gp[static_cast<std::size_t>(wy * w + tyi) * d.w +
                                                  wx * w + txi] +=
                                                   self.grad[(static_cast<std::size_t>(b) * t + tok) *
                                                                 d.c + c];
                                           }
                                   }
                           }
                   });
}

Tensor window_merge(const Tensor& tokens, int w, int n, int c, int h, int width) {
    if (tokens.shape().size() != 3)
        throw std::invalid_argument("window_merge: expected B x T x C tokens");
    const int nwh = h / w, nww = width / w;
    const int t = w * w;
    if (w < 1 || h % w != 0 || width % w != 0 || tokens.dim(0) != n * nwh * nww ||
        tokens.dim(1) != t || tokens.dim(2) != c)
        throw std::invalid_argument("window_merge: token shape inconsistent with target");
    std::vector<double> out(static_cast<std::size_t>(n) * c * h * width);
    const double* in = tokens.data();
    const std::size_t plane = static_cast<std::size_t>(h) * width;
    for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
            double* dst = out.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
            for (int wy = 0; wy < nwh; ++wy)
                for (int wx = 0; wx < nww; ++wx) {
                    const int b = (ni * nwh + wy) * nww + wx;
                    for (int tyi = 0; tyi < w; ++tyi)
                        for (int txi = 0; txi < w; ++txi) {
                            const int tok = tyi * w + txi;
                            dst[static_cast<std::size_t>(wy * w + tyi) * width + wx * w + txi] =
                                in[(static_cast<std::size_t>(b) * t + tok) * c + ci];
                        }
                }
        }
    return make_op("window_merge", {n, c, h, width}, std::move(out), {tokens},
                   [w, n, c, h, width, nwh, nww, t, plane](Node& self) {
                       Node& p = *self.parents[0];
                       if (!p.requires_grad) return;
                       p.ensure_grad();
                       for (int ni = 0; ni < n; ++ni)
                           for (int ci = 0; ci < c; ++ci) {
                               const double* g =
                                   self.grad.data() + (static_cast<std::size_t>(ni) * c + ci) * plane;
                               for (int wy = 0; wy < nwh; ++wy)
                                   for (int wx = 0; wx < nww; ++wx) {
                                       const int b = (ni * nwh + wy) * nww + wx;
                                       for (int tyi = 0; tyi < w; ++tyi)
                                           for (int txi = 0; txi < w; ++txi) {
                                               const int tok = tyi * w + txi;
                                               p.grad[(static_cast<std::size_t>(b) * t + tok) * c + ci] +=
                                                   g[static_cast<std::size_t>(wy * w + tyi) * width +
                                                     wx * w + txi];
                                           }
                                   }
                           }
                   });
}

}  // namespace waveseg
