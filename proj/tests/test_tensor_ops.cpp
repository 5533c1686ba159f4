// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "waveseg/kernels.hpp"
#include "waveseg/ops.hpp"
#include "waveseg/rng.hpp"

using namespace waveseg;

namespace {

Tensor random_tensor(SplitMix64& rng, std::vector<int> shape, double lo = -1.0,
                     double hi = 1.0) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> v(n);
    for (double& x : v) x = rng.next_range(lo, hi);
    return Tensor::from_values(std::move(shape), std::move(v));
}

// Direct-summation convolution: five explicit loops, no gemm, no im2col.
std::vector<double> conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b,
                                int stride, int pad, int dil) {
    const int N = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = w.dim(0), K = w.dim(2);
    const int Ho = (H + 2 * pad - dil * (K - 1) - 1) / stride + 1;
    const int Wo = (W + 2 * pad - dil * (K - 1) - 1) / stride + 1;
    std::vector<double> out(static_cast<std::size_t>(N) * Co * Ho * Wo, 0.0);
    auto xat = [&](int n, int c, int y, int xx) {
        if (y < 0 || y >= H || xx < 0 || xx >= W) return 0.0;
        return x.data()[((static_cast<std::size_t>(n) * Ci + c) * H + y) * W + xx];
    };
    for (int n = 0; n < N; ++n)
        for (int co = 0; co < Co; ++co)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double acc = b.data()[co];
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int ky = 0; ky < K; ++ky)
                            for (int kx = 0; kx < K; ++kx)
                                acc += xat(n, ci, oy * stride - pad + ky * dil,
                                           ox * stride - pad + kx * dil) *
                                       w.data()[((static_cast<std::size_t>(co) * Ci + ci) * K + ky) * K + kx];
                    out[((static_cast<std::size_t>(n) * Co + co) * Ho + oy) * Wo + ox] = acc;
                }
    return out;
}

}  // namespace

TEST_CASE("conv2d: 1x1 identity kernel over channels") {
    SplitMix64 rng(21);
    const Tensor x = random_tensor(rng, {2, 3, 4, 4});
    std::vector<double> wv(9, 0.0);
    wv[0] = wv[4] = wv[8] = 1.0;  // 3x3 identity as Cout x Cin
    const Tensor w = Tensor::from_values({3, 3, 1, 1}, std::move(wv));
    const Tensor b = Tensor::zeros({3});
    const Tensor y = conv2d(x, w, b, {});
    REQUIRE(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("conv2d: constant input, all-ones 3x3 kernel, padding 1") {
    const double c = 0.5;
    const int Ci = 2;
    const Tensor x = Tensor::full({1, Ci, 5, 5}, c);
    const Tensor w = Tensor::full({1, Ci, 3, 3}, 1.0);
    const Tensor b = Tensor::zeros({1});
    const Tensor y = conv2d(x, w, b, {.stride = 1, .padding = 1});
    // interior pixels see the full 3x3 window per input channel
    for (int yy = 1; yy < 4; ++yy)
        for (int xx = 1; xx < 4; ++xx)
            CHECK(y.data()[static_cast<std::size_t>(yy) * 5 + xx] ==
                  doctest::Approx(9.0 * c * Ci).epsilon(1e-12));
    // corner sees a 2x2 window
    CHECK(y.data()[0] == doctest::Approx(4.0 * c * Ci).epsilon(1e-12));
}

TEST_CASE("conv2d: dilation output size 7->3 with k=3, d=2") {
    SplitMix64 rng(22);
    const Tensor x = random_tensor(rng, {1, 1, 7, 7});
    const Tensor w = random_tensor(rng, {1, 1, 3, 3});
    const Tensor b = Tensor::zeros({1});
    const Tensor y = conv2d(x, w, b, {.stride = 1, .padding = 0, .dilation = 2});
    CHECK(y.shape() == std::vector<int>{1, 1, 3, 3});
}

TEST_CASE("conv2d matches direct-summation oracle on random 2x3x8x8") {
    SplitMix64 rng(23);
    for (auto [k, stride, pad, dil] :
         {std::tuple{3, 1, 1, 1}, std::tuple{2, 2, 0, 1}, std::tuple{3, 1, 2, 2},
          std::tuple{3, 1, 0, 1}}) {
        const Tensor x = random_tensor(rng, {2, 3, 8, 8});
        const Tensor w = random_tensor(rng, {4, 3, k, k});
        const Tensor b = random_tensor(rng, {4});
        const Tensor y = conv2d(x, w, b, {stride, pad, dil});
        const std::vector<double> want = conv_oracle(x, w, b, stride, pad, dil);
        REQUIRE(y.numel() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) {
            const double rel = std::fabs(y.data()[i] - want[i]) /
                               std::max(1.0, std::fabs(want[i]));
            CHECK(rel <= 1e-5);
        }
    }
}

TEST_CASE("conv2d rejects bad geometry") {
    const Tensor x = Tensor::zeros({1, 2, 6, 6});
    const Tensor w = Tensor::zeros({3, 2, 3, 3});
    const Tensor w_badc = Tensor::zeros({3, 4, 3, 3});
    const Tensor b = Tensor::zeros({3});
    CHECK_THROWS_AS(conv2d(x, w_badc, b, {}), std::invalid_argument);
    // (6 - 3) % 2 != 0 -> output size not integer
    CHECK_THROWS_AS(conv2d(x, w, b, {.stride = 2, .padding = 0}), std::invalid_argument);
    CHECK_THROWS_AS(conv2d(x, w, Tensor::zeros({4}), {}), std::invalid_argument);
}

TEST_CASE("window partition: single window and enumerated 4x4/w=2 layout") {
    SplitMix64 rng(24);
    const Tensor x = random_tensor(rng, {1, 2, 4, 4});
    const Tensor full = window_partition(x, 4);
    REQUIRE(full.shape() == std::vector<int>{1, 16, 2});
    // row-major positions, channels last
    for (int t = 0; t < 16; ++t)
        for (int c = 0; c < 2; ++c)
            CHECK(full.data()[static_cast<std::size_t>(t) * 2 + c] ==
                  x.data()[static_cast<std::size_t>(c) * 16 + t]);

    const Tensor quad = window_partition(x, 2);
    REQUIRE(quad.shape() == std::vector<int>{4, 4, 2});
    // window 0 holds (0,0),(0,1),(1,0),(1,1) of the plane
    const int expect_pos[4] = {0, 1, 4, 5};
    for (int t = 0; t < 4; ++t)
        CHECK(quad.data()[static_cast<std::size_t>(t) * 2] == x.data()[expect_pos[t]]);

    CHECK_THROWS_AS(window_partition(x, 3), std::invalid_argument);
}

TEST_CASE("window merge is the exact inverse, bit for bit") {
    SplitMix64 rng(25);
    const Tensor x = random_tensor(rng, {2, 3, 8, 8});
    for (int w : {1, 2, 4, 8}) {
        const Tensor t = window_partition(x, w);
        const Tensor back = window_merge(t, w, 2, 3, 8, 8);
        REQUIRE(back.shape() == x.shape());
        CHECK(std::memcmp(back.data(), x.data(), x.numel() * sizeof(double)) == 0);
    }
}

TEST_CASE("cross attention: zero output projection gives exactly zero") {
    SplitMix64 rng(26);
    AttentionParams p;
    p.heads = 2;
    p.wq = random_tensor(rng, {8, 8});
    p.wk = random_tensor(rng, {8, 8});
    p.wv = random_tensor(rng, {8, 8});
    p.wo = Tensor::zeros({8, 8});
    const Tensor q = random_tensor(rng, {3, 4, 8});
    const Tensor kv = random_tensor(rng, {3, 4, 8});
    const Tensor out = cross_attention(q, kv, p);
    REQUIRE(out.shape() == q.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) CHECK(out.data()[i] == 0.0);
}

TEST_CASE("attention probability rows sum to one") {
    SplitMix64 rng(27);
    const Tensor q = random_tensor(rng, {2, 9, 6}, -2.0, 2.0);
    const Tensor k = random_tensor(rng, {2, 9, 6}, -2.0, 2.0);
    const Tensor a = softmax_lastdim(attention_scores(q, k, 3));
    REQUIRE(a.shape() == std::vector<int>{2, 3, 9, 9});
    for (std::size_t r = 0; r < a.numel() / 9; ++r) {
        double s = 0.0;
        for (int j = 0; j < 9; ++j) s += a.data()[r * 9 + j];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("single token window: softmax of a singleton is 1, out = wo wv x") {
    SplitMix64 rng(28);
    AttentionParams p;
    p.heads = 1;
    p.wq = random_tensor(rng, {4, 4});
    p.wk = random_tensor(rng, {4, 4});
    p.wv = random_tensor(rng, {4, 4});
    p.wo = random_tensor(rng, {4, 4});
    const Tensor q = random_tensor(rng, {1, 1, 4});
    const Tensor kv = random_tensor(rng, {1, 1, 4});
    const Tensor out = cross_attention(q, kv, p);
    // expected: kv * wv * wo (attention matrix is [[1]])
    const Tensor want = linear(linear(kv, p.wv), p.wo);
    for (std::size_t i = 0; i < out.numel(); ++i)
        CHECK(out.data()[i] == doctest::Approx(want.data()[i]).epsilon(1e-12));
}

TEST_CASE("two tokens with equal scores average the projected values") {
    // Q projects to zero -> all scores equal -> probabilities 0.5/0.5
    AttentionParams p;
    p.heads = 1;
    p.wq = Tensor::zeros({2, 2});
    std::vector<double> eye = {1, 0, 0, 1};
    p.wk = Tensor::from_values({2, 2}, eye);
    p.wv = Tensor::from_values({2, 2}, eye);
    p.wo = Tensor::from_values({2, 2}, eye);
    const Tensor q = Tensor::from_values({1, 2, 2}, {0.3, -0.1, 0.9, 0.4});
    const Tensor kv = Tensor::from_values({1, 2, 2}, {1.0, 2.0, 3.0, 4.0});
    const Tensor out = cross_attention(q, kv, p);
    CHECK(out.data()[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out.data()[1] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(out.data()[2] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out.data()[3] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("primitive op closed forms") {
    const Tensor x = Tensor::from_values({1, 1, 1, 2}, {-1.0, 2.0});
    const Tensor r = relu(x);
    CHECK(r.data()[0] == 0.0);
    CHECK(r.data()[1] == 2.0);

    const Tensor up = upsample_nearest_2x(Tensor::full({1, 1, 1, 1}, 0.7));
    REQUIRE(up.shape() == std::vector<int>{1, 1, 2, 2});
    for (int i = 0; i < 4; ++i) CHECK(up.data()[i] == 0.7);

    // group_norm of constant input returns beta
    const Tensor cx = Tensor::full({2, 4, 3, 3}, 1.23);
    const Tensor gamma = Tensor::full({4}, 2.0);
    const Tensor beta = Tensor::from_values({4}, {0.1, 0.2, 0.3, 0.4});
    const Tensor gn = group_norm(cx, 2, gamma, beta);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 4; ++c)
            for (int i = 0; i < 9; ++i)
                CHECK(gn.data()[(static_cast<std::size_t>(n) * 4 + c) * 9 + i] ==
                      doctest::Approx(beta.data()[c]).epsilon(1e-9));
}

TEST_CASE("bilinear upsample preserves constants and is linear-exact on ramps") {
    const Tensor cx = Tensor::full({1, 1, 3, 3}, 0.4);
    const Tensor up = upsample_bilinear(cx, 4);
    REQUIRE(up.shape() == std::vector<int>{1, 1, 12, 12});
    for (std::size_t i = 0; i < up.numel(); ++i)
        CHECK(up.data()[i] == doctest::Approx(0.4).epsilon(1e-12));
}

TEST_CASE("dice_bce_loss closed forms") {
    // logits 0 everywhere, target half ones -> BCE term = ln 2
    const Tensor z = Tensor::zeros({1, 1, 2, 2});
    const Tensor t = Tensor::from_values({1, 1, 2, 2}, {1.0, 1.0, 0.0, 0.0});
    const double loss = dice_bce_loss(z, t).item();
    // soft dice with p=0.5: (2*1 + 1)/(2 + 2 + 1) = 0.6
    CHECK(loss == doctest::Approx(std::log(2.0) + 1.0 - 0.6).epsilon(1e-12));

    // saturated logits on the right labels -> loss ~ 0
    const Tensor zs = Tensor::from_values({1, 1, 2, 2}, {40.0, 40.0, -40.0, -40.0});
    CHECK(dice_bce_loss(zs, t).item() == doctest::Approx(0.0).epsilon(1e-6));

    // all-zero target, hugely negative logits: p ~ 0, soft dice = 1
    const Tensor z0 = Tensor::full({1, 1, 2, 2}, -40.0);
    const Tensor t0 = Tensor::zeros({1, 1, 2, 2});
    CHECK(dice_bce_loss(z0, t0).item() == doctest::Approx(0.0).epsilon(1e-6));

    const Tensor bad = Tensor::from_values({1, 1, 2, 2}, {0.5, 1.0, 0.0, 0.0});
    CHECK_THROWS_AS(dice_bce_loss(z, bad), std::invalid_argument);
}

TEST_CASE("non-finite op outputs raise instead of propagating") {
    const Tensor big = Tensor::full({1, 1, 1, 2}, 1e308);
    CHECK_THROWS_AS(add(big, big), std::runtime_error);
    // exp overflow guard inside attention scores path
    const Tensor x = Tensor::full({1, 1, 1, 2}, 1e308);
    CHECK_THROWS_AS(scale(x, 1e10), std::runtime_error);
}

TEST_CASE("no op produces non-finite values on [-10, 10] inputs") {
    SplitMix64 rng(29);
    const Tensor x = random_tensor(rng, {2, 4, 8, 8}, -10.0, 10.0);
    const Tensor w = random_tensor(rng, {4, 4, 3, 3}, -10.0, 10.0);
    const Tensor b = random_tensor(rng, {4}, -10.0, 10.0);
    CHECK_NOTHROW(conv2d(x, w, b, {.stride = 1, .padding = 1}));
    CHECK_NOTHROW(relu(x));
    CHECK_NOTHROW(sigmoid(x));
    CHECK_NOTHROW(group_norm(x, 4, Tensor::full({4}, 1.0), Tensor::zeros({4})));
    CHECK_NOTHROW(softmax_lastdim(window_partition(x, 4)));
    CHECK_NOTHROW(haar_synthesis_stack(haar_analysis_stack(x)));
}

// ---------------------------------------------------------------------------
// Gradient checks: every differentiable op at 10 random draws, double
// precision tolerance 1e-5.
// ---------------------------------------------------------------------------

namespace {

void check_op(const char* name,
              const std::function<Tensor(const std::vector<Tensor>&)>& fn,
              const std::function<std::vector<Tensor>(SplitMix64&)>& make_inputs,
              double tol = 1e-5, int draws = 10) {
    SplitMix64 rng(31);
    for (int i = 0; i < draws; ++i) {
        auto inputs = make_inputs(rng);
        const GradCheckReport rep = grad_check(fn, std::move(inputs), tol,
                                               1000 + static_cast<std::uint64_t>(i));
        INFO(name << " draw " << i << " worst " << rep.worst << " err "
                  << rep.max_rel_err);
        CHECK(rep.pass);
    }
}

}  // namespace

TEST_CASE("grad check: linear conv is exact to rounding") {
    SplitMix64 rng(32);
    const Tensor w = random_tensor(rng, {2, 2, 3, 3});
    const Tensor b = random_tensor(rng, {2});
    auto fn = [&](const std::vector<Tensor>& in) {
        return conv2d(in[0], w, b, {.stride = 1, .padding = 1});
    };
    const GradCheckReport rep =
        grad_check(fn, {random_tensor(rng, {1, 2, 6, 6})}, 1e-8);
    INFO(rep.worst << " " << rep.max_rel_err);
    CHECK(rep.pass);
}

TEST_CASE("grad check: conv2d w.r.t. input, weight and bias") {
    check_op(
        "conv2d s1",
        [](const std::vector<Tensor>& in) {
            return conv2d(in[0], in[1], in[2], {.stride = 1, .padding = 1});
        },
        [](SplitMix64& rng) {
            return std::vector<Tensor>{random_tensor(rng, {2, 3, 6, 6}),
                                       random_tensor(rng, {4, 3, 3, 3}),
                                       random_tensor(rng, {4})};
        });
    check_op(
        "conv2d s2 k2",
        [](const std::vector<Tensor>& in) {
            return conv2d(in[0], in[1], in[2], {.stride = 2, .padding = 0});
        },
        [](SplitMix64& rng) {
            return std::vector<Tensor>{random_tensor(rng, {2, 3, 6, 6}),
                                       random_tensor(rng, {4, 3, 2, 2}),
                                       random_tensor(rng, {4})};
        });
}

TEST_CASE("grad check: relu away from the kink") {
    check_op(
        "relu",
        [](const std::vector<Tensor>& in) { return relu(in[0]); },
        [](SplitMix64& rng) {
            Tensor t = random_tensor(rng, {1, 2, 4, 4}, -1.0, 1.0);
            for (double& v : t.values())
                v += v >= 0.0 ? 0.02 : -0.02;  // keep |x| > 1e-2
            return std::vector<Tensor>{t};
        },
        1e-8);
}

TEST_CASE("grad check: sigmoid, add, scale, upsamplers, narrow/concat") {
    check_op("sigmoid", [](const std::vector<Tensor>& in) { return sigmoid(in[0]); },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 2, 3, 3}, -3, 3)};
             });
    check_op("add",
             [](const std::vector<Tensor>& in) { return add(in[0], in[1]); },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 2, 3, 3}),
                                            random_tensor(rng, {1, 2, 3, 3})};
             });
    check_op("scale", [](const std::vector<Tensor>& in) { return scale(in[0], -1.7); },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 2, 3, 3})};
             });
    check_op("upsample_nearest_2x",
             [](const std::vector<Tensor>& in) { return upsample_nearest_2x(in[0]); },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 2, 3, 3})};
             });
    check_op("upsample_bilinear",
             [](const std::vector<Tensor>& in) { return upsample_bilinear(in[0], 4); },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 2, 3, 3})};
             });
    check_op("narrow+concat",
             [](const std::vector<Tensor>& in) {
                 return concat_channels({narrow_channels(in[0], 2, 2),
                                         narrow_channels(in[0], 0, 2), in[1]});
             },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {2, 4, 3, 3}),
                                            random_tensor(rng, {2, 1, 3, 3})};
             });
}

TEST_CASE("grad check: group_norm") {
    check_op("group_norm",
             [](const std::vector<Tensor>& in) {
                 return group_norm(in[0], 2, in[1], in[2]);
             },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {2, 4, 3, 3}),
                                            random_tensor(rng, {4}, 0.5, 1.5),
                                            random_tensor(rng, {4})};
             });
}

TEST_CASE("grad check: window partition/merge") {
    check_op("window_partition+merge",
             [](const std::vector<Tensor>& in) {
                 return window_merge(window_partition(in[0], 2), 2, 1, 2, 4, 4);
             },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 2, 4, 4})};
             });
}

TEST_CASE("grad check: attention pieces and full cross attention") {
    check_op("attention_scores",
             [](const std::vector<Tensor>& in) {
                 return attention_scores(in[0], in[1], 2);
             },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {2, 3, 4}),
                                            random_tensor(rng, {2, 3, 4})};
             });
    check_op("softmax_lastdim",
             [](const std::vector<Tensor>& in) { return softmax_lastdim(in[0]); },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {2, 2, 3, 3}, -2, 2)};
             });
    check_op("attention_apply",
             [](const std::vector<Tensor>& in) {
                 return attention_apply(softmax_lastdim(in[0]), in[1], 2);
             },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 2, 3, 3}),
                                            random_tensor(rng, {1, 3, 4})};
             });
    check_op("cross_attention",
             [](const std::vector<Tensor>& in) {
                 AttentionParams p;
                 p.heads = 2;
                 p.wq = in[1];
                 p.wk = in[2];
                 p.wv = in[3];
                 p.wo = in[4];
                 return cross_attention(in[0], in[5], p);
             },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{
                     random_tensor(rng, {2, 4, 4}), random_tensor(rng, {4, 4}),
                     random_tensor(rng, {4, 4}),    random_tensor(rng, {4, 4}),
                     random_tensor(rng, {4, 4}),    random_tensor(rng, {2, 4, 4})};
             },
             1e-4);
}

TEST_CASE("grad check: haar stacks") {
    check_op("haar_analysis_stack",
             [](const std::vector<Tensor>& in) { return haar_analysis_stack(in[0]); },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 2, 4, 4})};
             });
    check_op("haar_synthesis_stack",
             [](const std::vector<Tensor>& in) { return haar_synthesis_stack(in[0]); },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {1, 8, 2, 2})};
             });
}

TEST_CASE("grad check: dice_bce_loss") {
    check_op("dice_bce_loss",
             [](const std::vector<Tensor>& in) {
                 const int n = in[0].dim(0);
                 std::vector<double> t(in[0].numel());
                 SplitMix64 trng(55);
                 for (double& v : t) v = trng.next_double() < 0.4 ? 1.0 : 0.0;
                 return dice_bce_loss(in[0], Tensor::from_values(in[0].shape(), t));
                 (void)n;
             },
             [](SplitMix64& rng) {
                 return std::vector<Tensor>{random_tensor(rng, {2, 1, 4, 4}, -2, 2)};
             });
}

TEST_CASE("haar stacks: synthesis inverts analysis") {
    SplitMix64 rng(33);
    const Tensor x = random_tensor(rng, {2, 3, 8, 8});
    const Tensor back = haar_synthesis_stack(haar_analysis_stack(x));
    REQUIRE(back.shape() == x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i)
        CHECK(back.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("backward through a residual diamond accumulates both paths") {
    const Tensor x = Tensor::from_values({1, 1, 1, 1}, {3.0});
    Tensor xp = x;
    xp.set_requires_grad(true);
    const Tensor y = add(xp, relu(xp));  // dy/dx = 1 + 1 for x > 0
    Tensor s = reduce_dot(y, {2.0});
    s.backward();
    CHECK(xp.grad()[0] == doctest::Approx(4.0).epsilon(1e-12));
}
