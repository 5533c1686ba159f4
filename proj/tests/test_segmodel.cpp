// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "waveseg/rng.hpp"
#include "waveseg/segmodel.hpp"
#include "waveseg/train.hpp"

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

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.shape() == b.shape());
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.widths = {8, 8, 16, 16};
    cfg.scale = 4;
    cfg.heads = 2;
    cfg.gn_groups = 4;
    return cfg;
}

const Tensor& find_param(const SegModel& m, const std::string& name) {
    for (const auto& [n, t] : m.named_parameters())
        if (n == name) return t;
    throw std::out_of_range("no param " + name);
}

}  // namespace

TEST_CASE("res2_forward: zero conv weights make the block an identity") {
    SegModel m(tiny_config(), 3);
    SplitMix64 rng(61);
    const Tensor x = random_tensor(rng, {2, 8, 6, 6});
    // Stage 1 block of the rgb encoder, zero out its convolutions.
    Res2Block blk;
    blk.scale = 4;
    SegModel helper(tiny_config(), 4);
    // Build a standalone block from the model's own stage-1 parameters and
    // zero every conv weight/bias.
    for (const auto& [name, t] : helper.named_parameters()) {
        if (name.rfind("rgb.s1.res2", 0) == 0) {
            Tensor shared = t;
            if (name.find(".conv") != std::string::npos ||
                name.find("head") != std::string::npos) {
                std::fill(shared.values().begin(), shared.values().end(), 0.0);
            }
        }
    }
    // Reach the block through a forward of res2_forward on the raw structs is
    // not exposed; emulate with an ad-hoc block instead.
    (void)m;
    (void)blk;
    // Construct the block manually with zero convs and default norms.
    auto zeros = [](std::vector<int> s) { return Tensor::zeros(std::move(s), true); };
    auto ones = [](int c) { return Tensor::full({c}, 1.0, true); };
    Res2Block z;
    z.scale = 4;
    z.norm_in = {ones(8), zeros({8}), 4};
    z.conv_in = {zeros({8, 8, 1, 1}), zeros({8}), {}};
    for (int i = 0; i < 3; ++i) {
        z.norm_mid.push_back({ones(2), zeros({2}), 2});
        z.conv_mid.push_back({zeros({2, 2, 3, 3}), zeros({2}), {.stride = 1, .padding = 1}});
    }
    z.norm_out = {ones(8), zeros({8}), 4};
    z.conv_out = {zeros({8, 8, 1, 1}), zeros({8}), {}};
    const Tensor y = res2_forward(x, z);
    CHECK(max_abs_diff(y, x) == 0.0);
}

TEST_CASE("res2_forward: s=1 reduces to a bottleneck with no 3x3 convs") {
    SplitMix64 rng(62);
    Res2Block z;
    z.scale = 1;
    z.norm_in = {Tensor::full({4}, 1.0, true), Tensor::zeros({4}, true), 2};
    z.conv_in = {random_tensor(rng, {4, 4, 1, 1}), random_tensor(rng, {4}), {}};
    z.norm_out = {Tensor::full({4}, 1.0, true), Tensor::zeros({4}, true), 2};
    z.conv_out = {random_tensor(rng, {4, 4, 1, 1}), random_tensor(rng, {4}), {}};
    const Tensor x = random_tensor(rng, {1, 4, 4, 4});
    // expected: x + 1x1b(relu(gn(1x1a(relu(gn(x))))))
    const Tensor h = relu(group_norm(x, 2, z.norm_in.gamma, z.norm_in.beta));
    const Tensor u = conv2d(h, z.conv_in.w, z.conv_in.b, {});
    const Tensor o = relu(group_norm(u, 2, z.norm_out.gamma, z.norm_out.beta));
    const Tensor want = add(x, conv2d(o, z.conv_out.w, z.conv_out.b, {}));
    CHECK(max_abs_diff(res2_forward(x, z), want) == 0.0);
}

TEST_CASE("res2_forward: s=4 matches a straight-line oracle of the recurrence") {
    SplitMix64 rng(63);
    const int c = 8, cg = 2;
    Res2Block z;
    z.scale = 4;
    auto mknorm = [&](int ch) {
        return NormLayer{random_tensor(rng, {ch}, 0.5, 1.5), random_tensor(rng, {ch}), std::min(2, ch)};
    };
    z.norm_in = mknorm(c);
    z.conv_in = {random_tensor(rng, {c, c, 1, 1}), random_tensor(rng, {c}), {}};
    for (int i = 0; i < 3; ++i) {
        z.norm_mid.push_back(mknorm(cg));
        z.conv_mid.push_back(
            {random_tensor(rng, {cg, cg, 3, 3}), random_tensor(rng, {cg}), {.stride = 1, .padding = 1}});
    }
    z.norm_out = mknorm(c);
    z.conv_out = {random_tensor(rng, {c, c, 1, 1}), random_tensor(rng, {c}), {}};

    const Tensor x = random_tensor(rng, {2, c, 6, 6});
    const Tensor got = res2_forward(x, z);

    // Oracle: explicit group recurrence.
    const Tensor u = conv2d(relu(group_norm(x, z.norm_in.groups, z.norm_in.gamma, z.norm_in.beta)),
                            z.conv_in.w, z.conv_in.b, {});
    std::vector<Tensor> zs;
    for (int i = 0; i < 4; ++i) {
        Tensor yi = narrow_channels(u, i * cg, cg);
        if (i == 0) {
            zs.push_back(yi);
        } else {
            Tensor t = add(yi, zs.back());
            const NormLayer& nm = z.norm_mid[static_cast<std::size_t>(i - 1)];
            t = relu(group_norm(t, nm.groups, nm.gamma, nm.beta));
            zs.push_back(conv2d(t, z.conv_mid[static_cast<std::size_t>(i - 1)].w,
                                z.conv_mid[static_cast<std::size_t>(i - 1)].b,
                                {.stride = 1, .padding = 1}));
        }
    }
    Tensor cat = concat_channels(zs);
    cat = relu(group_norm(cat, z.norm_out.groups, z.norm_out.gamma, z.norm_out.beta));
    const Tensor want = add(x, conv2d(cat, z.conv_out.w, z.conv_out.b, {}));
    CHECK(max_abs_diff(got, want) == 0.0);

    Res2Block bad = z;
    bad.scale = 3;
    CHECK_THROWS_AS(res2_forward(x, bad), std::invalid_argument);
}

TEST_CASE("cdf_forward: zero weights give zero output") {
    auto zeros = [](std::vector<int> s) { return Tensor::zeros(std::move(s), true); };
    CdfBlock blk;
    blk.d1 = {zeros({4, 4, 3, 3}), zeros({4}), {.stride = 1, .padding = 1, .dilation = 1}};
    blk.d2 = {zeros({4, 4, 3, 3}), zeros({4}), {.stride = 1, .padding = 2, .dilation = 2}};
    blk.d4 = {zeros({4, 4, 3, 3}), zeros({4}), {.stride = 1, .padding = 4, .dilation = 4}};
    blk.fuse = {zeros({2, 16, 1, 1}), zeros({2}), {}};
    SplitMix64 rng(64);
    const Tensor x = random_tensor(rng, {1, 4, 8, 8});
    const Tensor y = cdf_forward(x, blk);
    REQUIRE(y.shape() == std::vector<int>{1, 2, 8, 8});
    for (std::size_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.0);
}

TEST_CASE("cdf_forward: constant field, all-ones kernels, interior closed form") {
    const int c = 2;
    const double v = 0.25;
    auto onesw = [&](int dil) {
        return ConvLayer{Tensor::full({c, c, 3, 3}, 1.0, true), Tensor::zeros({c}, true),
                         {.stride = 1, .padding = dil, .dilation = dil}};
    };
    CdfBlock blk;
    blk.d1 = onesw(1);
    blk.d2 = onesw(2);
    blk.d4 = onesw(4);
    blk.fuse = {Tensor::full({1, 4 * c, 1, 1}, 1.0, true), Tensor::zeros({1}, true), {}};
    const Tensor x = Tensor::full({1, c, 33, 33}, v);
    const Tensor y = cdf_forward(x, blk);
    // Interior (>= 8 px from the border): each 3x3 all-ones conv over a
    // constant field multiplies by 9*c. h1 = 9c*v; h2 = 9c*(v+h1); h3 =
    // 9c*(v+h1+h2); fuse sums all channels.
    const double h1 = 9.0 * c * v;
    const double h2 = 9.0 * c * (v + h1);
    const double h3 = 9.0 * c * (v + h1 + h2);
    const double want = c * (v + h1 + h2 + h3);
    const int mid = 16;
    CHECK(y.data()[static_cast<std::size_t>(mid) * 33 + mid] ==
          doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("cdf_forward: effective receptive field of h3 is 15x15") {
    // Impulse through the three dilated convs (relu is inert on positives):
    // support widens by 2*(1+2+4) = 14, i.e. a 15-pixel extent per axis.
    const int n = 33, mid = 16;
    auto onesw = [&](int dil) {
        return ConvLayer{Tensor::full({1, 1, 3, 3}, 1.0, true), Tensor::zeros({1}, true),
                         {.stride = 1, .padding = dil, .dilation = dil}};
    };
    CdfBlock blk;
    blk.d1 = onesw(1);
    blk.d2 = onesw(2);
    blk.d4 = onesw(4);
    // fuse reads h3 only, so the output support equals h3's support
    std::vector<double> fw = {0.0, 0.0, 0.0, 1.0};
    blk.fuse = {Tensor::from_values({1, 4, 1, 1}, fw, true), Tensor::zeros({1}, true), {}};
    std::vector<double> xv(static_cast<std::size_t>(n) * n, 0.0);
    xv[static_cast<std::size_t>(mid) * n + mid] = 1.0;
    const Tensor y = cdf_forward(Tensor::from_values({1, 1, n, n}, xv), blk);
    int lo = n, hi = -1;
    for (int r = 0; r < n; ++r)
        for (int cc = 0; cc < n; ++cc)
            if (y.data()[static_cast<std::size_t>(r) * n + cc] > 0.0) {
                lo = std::min({lo, r, cc});
                hi = std::max({hi, r, cc});
            }
    CHECK(hi - lo + 1 == 15);
}

TEST_CASE("bswca_forward: zero output projections reproduce the RGB stream") {
    SplitMix64 rng(65);
    const int c = 4;
    BswcaBlock blk;
    blk.window = 2;
    for (int b = 0; b < 4; ++b) {
        AttentionParams p;
        p.heads = 2;
        p.wq = random_tensor(rng, {c, c});
        p.wk = random_tensor(rng, {c, c});
        p.wv = random_tensor(rng, {c, c});
        p.wo = Tensor::zeros({c, c});
        blk.band[static_cast<std::size_t>(b)] = p;
    }
    const Tensor f_rgb = random_tensor(rng, {2, c, 8, 8});
    const Tensor f_gray = random_tensor(rng, {2, c, 8, 8});
    const Tensor out = bswca_forward(f_rgb, f_gray, blk);
    CHECK(max_abs_diff(out, f_rgb) <= 1e-6);
}

TEST_CASE("bswca_forward: gradient reaches the grayscale stream iff wo != 0") {
    SplitMix64 rng(66);
    const int c = 4;
    auto make_block = [&](bool zero_wo) {
        BswcaBlock blk;
        blk.window = 2;
        for (int b = 0; b < 4; ++b) {
            AttentionParams p;
            p.heads = 2;
            p.wq = random_tensor(rng, {c, c});
            p.wk = random_tensor(rng, {c, c});
            p.wv = random_tensor(rng, {c, c});
            p.wo = zero_wo ? Tensor::zeros({c, c}) : random_tensor(rng, {c, c});
            blk.band[static_cast<std::size_t>(b)] = p;
        }
        return blk;
    };
    for (bool zero_wo : {true, false}) {
        const BswcaBlock blk = make_block(zero_wo);
        Tensor f_rgb = random_tensor(rng, {1, c, 8, 8});
        Tensor f_gray = random_tensor(rng, {1, c, 8, 8});
        f_gray.set_requires_grad(true);
        const Tensor out = bswca_forward(f_rgb, f_gray, blk);
        std::vector<double> w(out.numel(), 1.0);
        Tensor s = reduce_dot(out, w);
        s.backward();
        double gmax = 0.0;
        if (f_gray.has_grad())
            for (double g : f_gray.grad()) gmax = std::max(gmax, std::fabs(g));
        if (zero_wo)
            CHECK(gmax == 0.0);
        else
            CHECK(gmax > 0.0);
    }
}

TEST_CASE("forward shapes and sigmoid range") {
    SegModel m(tiny_config(), 5);
    SplitMix64 rng(67);
    const Tensor img = random_tensor(rng, {2, 3, 64, 64}, 0.0, 1.0);
    const Tensor logits = m.forward(img);
    REQUIRE(logits.shape() == std::vector<int>{2, 1, 64, 64});
    const Tensor p = sigmoid(logits);
    for (std::size_t i = 0; i < p.numel(); ++i) {
        CHECK(p.data()[i] > 0.0);
        CHECK(p.data()[i] < 1.0);
    }
    CHECK_THROWS_AS(m.forward(random_tensor(rng, {1, 3, 48, 48})), std::invalid_argument);
}

TEST_CASE("identity at init: full forward equals rgb_only forward") {
    const SegModel full(tiny_config(), 11);
    const SegModel rgb = full.ablate(AblationMode::rgb_only);
    SplitMix64 rng(68);
    for (int i = 0; i < 10; ++i) {
        const Tensor img = random_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0);
        CHECK(max_abs_diff(full.forward(img), rgb.forward(img)) <= 1e-5);
    }
}

TEST_CASE("add_fusion with zero gray features equals rgb path") {
    // With the gray stem + stages zeroed the gray features are all zero, so
    // elementwise-add fusion reduces to the rgb path.
    SegModel addm = SegModel(tiny_config(), 12).ablate(AblationMode::add_fusion);
    for (const auto& [name, t] : addm.named_parameters()) {
        if (name.rfind("gray.", 0) == 0) {
            Tensor shared = t;
            std::fill(shared.values().begin(), shared.values().end(), 0.0);
        }
    }
    const SegModel rgb = addm.ablate(AblationMode::rgb_only);
    SplitMix64 rng(69);
    const Tensor img = random_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0);
    // gray features are zero except that group_norm's beta is zero and gamma
    // scales zero-mean zeros: encode(0-weights) is exactly zero everywhere.
    CHECK(max_abs_diff(addm.forward(img), rgb.forward(img)) <= 1e-9);
}

TEST_CASE("ablation parameter accounting") {
    const SegModel full(tiny_config(), 13);
    const SegModel rgb = full.ablate(AblationMode::rgb_only);
    const SegModel addf = full.ablate(AblationMode::add_fusion);

    std::size_t gray_params = 0, bswca_params = 0;
    for (const auto& [name, t] : full.named_parameters()) {
        if (name.rfind("gray.", 0) == 0) gray_params += t.numel();
        if (name.rfind("bswca", 0) == 0) bswca_params += t.numel();
    }
    CHECK(full.parameter_count() ==
          rgb.parameter_count() + gray_params + bswca_params);
    CHECK(addf.parameter_count() == full.parameter_count() - bswca_params);
    CHECK_THROWS_AS(ablation_from_string("bogus"), std::invalid_argument);
}

TEST_CASE("end-to-end gradient check on a sampled parameter subset") {
    ModelConfig cfg = tiny_config();
    SegModel model = SegModel(cfg, 21);
    // Perturb the attention output projections so the gray branch carries
    // gradient as well.
    SplitMix64 prng(70);
    for (const auto& [name, t] : model.named_parameters()) {
        if (name.find(".wo") != std::string::npos) {
            Tensor shared = t;
            for (double& v : shared.values()) v = prng.next_range(-0.05, 0.05);
        }
    }
    SplitMix64 rng(71);
    const Tensor img = random_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0);
    std::vector<double> tv(static_cast<std::size_t>(32) * 32, 0.0);
    for (std::size_t i = 0; i < tv.size(); ++i) tv[i] = rng.next_double() < 0.3 ? 1.0 : 0.0;
    const Tensor target = Tensor::from_values({1, 1, 32, 32}, tv);

    auto loss_fn = [&]() {
        return dice_bce_loss(model.forward(img), target);
    };

    // Analytic gradients
    for (const Tensor& p : model.parameters()) {
        Tensor shared = p;
        shared.zero_grad();
    }
    Tensor loss = loss_fn();
    loss.backward();

    // Sample 5 parameter coordinates across distinct tensors.
    const auto& named = model.named_parameters();
    SplitMix64 pick(72);
    int checked = 0;
    double max_rel = 0.0;
    std::vector<std::string> tried;
    while (checked < 5) {
        const std::size_t ti = static_cast<std::size_t>(pick.next_below(named.size()));
        const auto& [name, t] = named[ti];
        if (!t.has_grad()) continue;
        const std::size_t ci = static_cast<std::size_t>(pick.next_below(t.numel()));
        const double ana = t.grad()[ci];
        if (std::fabs(ana) < 1e-7) continue;  // skip numerically dead coords
        Tensor shared = t;
        const double x0 = shared.values()[ci];
        const double h = 1e-4 * std::max(1.0, std::fabs(x0));
        shared.values()[ci] = x0 + h;
        double fp, fm;
        {
            NoGradGuard ng;
            fp = loss_fn().item();
            shared.values()[ci] = x0 - h;
            fm = loss_fn().item();
        }
        shared.values()[ci] = x0;
        const double num = (fp - fm) / (2.0 * h);
        const double rel = std::fabs(num - ana) / std::max({std::fabs(num), std::fabs(ana), 1e-6});
        INFO(name << "[" << ci << "] analytic " << ana << " numeric " << num);
        CHECK(rel <= 1e-3);
        max_rel = std::max(max_rel, rel);
        ++checked;
    }
    INFO("max rel err " << max_rel);
    CHECK(checked == 5);
}

TEST_CASE("gradient reaches the gray encoder once wo is nonzero") {
    SegModel model = SegModel(tiny_config(), 23);
    SplitMix64 prng(73);
    for (const auto& [name, t] : model.named_parameters()) {
        if (name.find(".wo") != std::string::npos) {
            Tensor shared = t;
            for (double& v : shared.values()) v = prng.next_range(-0.05, 0.05);
        }
    }
    SplitMix64 rng(74);
    const Tensor img = random_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0);
    std::vector<double> tv(static_cast<std::size_t>(32) * 32, 0.0);
    for (std::size_t i = 0; i < tv.size() / 2; ++i) tv[i] = 1.0;
    Tensor loss = dice_bce_loss(model.forward(img),
                                Tensor::from_values({1, 1, 32, 32}, tv));
    loss.backward();
    double gmax = 0.0;
    for (const auto& [name, t] : model.named_parameters())
        if (name.rfind("gray.", 0) == 0 && t.has_grad())
            for (double g : t.grad()) gmax = std::max(gmax, std::fabs(g));
    CHECK(gmax > 0.0);
}

TEST_CASE("forward determinism: same seed, bitwise-identical loss twice") {
    SplitMix64 rng(75);
    const Tensor img = random_tensor(rng, {2, 3, 32, 32}, 0.0, 1.0);
    std::vector<double> tv(static_cast<std::size_t>(2) * 32 * 32, 0.0);
    for (std::size_t i = 0; i < tv.size(); i += 3) tv[i] = 1.0;
    const Tensor target = Tensor::from_values({2, 1, 32, 32}, tv);
    auto run = [&]() {
        SegModel m(tiny_config(), 31);
        Tensor loss = dice_bce_loss(m.forward(img), target);
        loss.backward();
        double gsum = 0.0;
        for (const Tensor& p : m.parameters())
            if (p.has_grad())
                for (double g : p.grad()) gsum += g;
        return std::pair{loss.item(), gsum};
    };
    const auto a = run(), b = run();
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
}

TEST_CASE("checkpoint round trip preserves topology and values") {
    namespace fs = std::filesystem;
    const fs::path path = fs::temp_directory_path() / "waveseg_test_ckpt.bin";
    SegModel m(tiny_config(), 41);
    m.save_checkpoint(path.string());
    const SegModel loaded = SegModel::load_checkpoint(path.string());
    CHECK(loaded.config() == m.config());
    CHECK(loaded.parameter_count() == m.parameter_count());
    SplitMix64 rng(76);
    const Tensor img = random_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0);
    CHECK(max_abs_diff(loaded.forward(img), m.forward(img)) == 0.0);
    fs::remove(path);
}

TEST_CASE("stage windows shrink with the feature maps") {
    SegModel m(tiny_config(), 51);
    // 64 input: stage 2 maps are 16x16 -> bands 8x8 -> window 4
    CHECK(m.stage_window(2, 64, 64) == 4);
    CHECK(m.stage_window(3, 64, 64) == 4);
    // stage 4 maps are 4x4 -> bands 2x2 -> window 2
    CHECK(m.stage_window(4, 64, 64) == 2);
    // 32 input: stage 4 maps are 2x2 -> bands 1x1 -> window 1
    CHECK(m.stage_window(4, 32, 32) == 1);
}
