// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "waveseg/contrast.hpp"
#include "waveseg/datagen.hpp"
#include "waveseg/rng.hpp"

using namespace waveseg;
namespace fs = std::filesystem;

namespace {

SynthConfig small_cfg() {
    SynthConfig cfg;
    cfg.seed = 7;
    cfg.count = 6;
    cfg.size = 32;
    return cfg;
}

BinaryMask random_mask(SplitMix64& rng, int h, int w, double p) {
    BinaryMask m(h, w);
    for (auto& b : m.v) b = rng.next_double() < p ? 1 : 0;
    return m;
}

}  // namespace

TEST_CASE("generator determinism: identical configs give identical corpora") {
    const SynthConfig cfg = small_cfg();
    const Dataset a = synth_generate(cfg);
    const Dataset b = synth_generate(cfg);
    CHECK(corpus_sha256(a) == corpus_sha256(b));
    SynthConfig other = cfg;
    other.seed = 8;
    CHECK(corpus_sha256(synth_generate(other)) != corpus_sha256(a));
}

TEST_CASE("every emitted mask has polyp fraction in [0.04, 0.30]") {
    SynthConfig cfg = small_cfg();
    cfg.count = 40;
    cfg.size = 64;
    const Dataset ds = synth_generate(cfg);
    for (const Sample& s : ds.samples) {
        const double frac = static_cast<double>(s.mask.count_ones()) /
                            static_cast<double>(s.mask.size());
        CHECK(frac >= 0.04);
        CHECK(frac <= 0.30);
    }
}

TEST_CASE("achromatic mode produces exactly equal channel planes") {
    SynthConfig cfg = small_cfg();
    cfg.chroma_mode = ChromaMode::achromatic;
    const Dataset ds = synth_generate(cfg);
    for (const Sample& s : ds.samples)
        for (std::size_t i = 0; i < s.image.channels[0].size(); ++i) {
            CHECK(s.image.channels[0].v[i] == s.image.channels[1].v[i]);
            CHECK(s.image.channels[0].v[i] == s.image.channels[2].v[i]);
        }
}

TEST_CASE("splits are disjoint, exhaustive and deterministic") {
    SynthConfig cfg = small_cfg();
    cfg.count = 25;
    const Dataset a = synth_generate(cfg);
    const Dataset b = synth_generate(cfg);
    REQUIRE(a.split.size() == a.samples.size());
    CHECK(a.count_of(Split::train) + a.count_of(Split::val) + a.count_of(Split::test) ==
          a.samples.size());
    for (std::size_t i = 0; i < a.split.size(); ++i) CHECK(a.split[i] == b.split[i]);
    // floored val/test: 25 * 0.1 = 2.5 -> 2 each, train = 21
    CHECK(a.count_of(Split::val) == 2);
    CHECK(a.count_of(Split::test) == 2);
    CHECK(a.count_of(Split::train) == 21);
}

TEST_CASE("synth config validation") {
    SynthConfig cfg = small_cfg();
    cfg.size = 48;
    CHECK_THROWS_AS(synth_generate(cfg), std::invalid_argument);
    cfg = small_cfg();
    cfg.luma_delta = 0.7;
    CHECK_THROWS_AS(synth_generate(cfg), std::invalid_argument);
    cfg = small_cfg();
    cfg.count = 0;
    CHECK_THROWS_AS(synth_generate(cfg), std::invalid_argument);
}

TEST_CASE("dataset save/load round trip") {
    const fs::path dir = fs::temp_directory_path() / "waveseg_test_ds";
    fs::remove_all(dir);
    const SynthConfig cfg = small_cfg();
    const Dataset ds = synth_generate(cfg);
    save_dataset(ds, cfg, dir.string());
    CHECK(fs::exists(dir / "manifest.json"));

    LoadReport rep;
    const Dataset back = load_dataset(dir.string(), {}, &rep);
    REQUIRE(back.samples.size() == ds.samples.size());
    CHECK(rep.excluded_degenerate == 0);
    // Quantized at generation time, so the round trip is exact.
    CHECK(corpus_sha256(back) == corpus_sha256(ds));
    fs::remove_all(dir);
}

TEST_CASE("load_dataset error paths") {
    const fs::path dir = fs::temp_directory_path() / "waveseg_test_bad";
    fs::remove_all(dir);
    CHECK_THROWS_WITH_AS(load_dataset((dir / "nope").string(), {}),
                         doctest::Contains("images"), std::runtime_error);

    fs::create_directories(dir / "images");
    fs::create_directories(dir / "masks");
    CHECK_THROWS_WITH_AS(load_dataset(dir.string(), {}),
                         doctest::Contains("no samples"), std::runtime_error);

    // one pair lands in train under default ratios
    const SynthConfig cfg = [] {
        SynthConfig c = small_cfg();
        c.count = 1;
        return c;
    }();
    save_dataset(synth_generate(cfg), cfg, dir.string());
    const Dataset one = load_dataset(dir.string(), {});
    REQUIRE(one.samples.size() == 1);
    CHECK(one.split[0] == Split::train);

    // missing mask is an error naming the stem
    fs::remove(dir / "masks" / "s00000.png");
    CHECK_THROWS_WITH_AS(load_dataset(dir.string(), {}),
                         doctest::Contains("s00000"), std::runtime_error);
    fs::remove_all(dir);
}

TEST_CASE("rerunning the same split seed gives the same assignment") {
    const fs::path dir = fs::temp_directory_path() / "waveseg_test_split";
    fs::remove_all(dir);
    SynthConfig cfg = small_cfg();
    cfg.count = 12;
    save_dataset(synth_generate(cfg), cfg, dir.string());
    LoadSpec spec;
    spec.split_seed = 99;
    const Dataset a = load_dataset(dir.string(), spec);
    const Dataset b = load_dataset(dir.string(), spec);
    for (std::size_t i = 0; i < a.split.size(); ++i) CHECK(a.split[i] == b.split[i]);
    fs::remove_all(dir);
}

TEST_CASE("dice and iou closed forms") {
    BinaryMask a(4, 4, 1), b(4, 4, 1);
    CHECK(dice(a, b) == 1.0);
    CHECK(iou(a, b) == 1.0);

    BinaryMask c(4, 4, 0), d(4, 4, 0);
    c.at(0, 0) = 1;
    d.at(3, 3) = 1;
    CHECK(dice(c, d) == 0.0);
    CHECK(iou(c, d) == 0.0);

    // pred = exactly half of gt
    BinaryMask gt(2, 2, 0), pred(2, 2, 0);
    gt.at(0, 0) = gt.at(0, 1) = 1;
    pred.at(0, 0) = 1;
    CHECK(dice(pred, gt) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(iou(pred, gt) == doctest::Approx(0.5).epsilon(1e-15));

    // empty vs empty is defined as 1
    BinaryMask e1(2, 2, 0), e2(2, 2, 0);
    CHECK(dice(e1, e2) == 1.0);
    CHECK(iou(e1, e2) == 1.0);

    CHECK_THROWS_AS(dice(BinaryMask(2, 2), BinaryMask(2, 4)), std::invalid_argument);
}

TEST_CASE("dice = 2*iou/(1+iou) on random mask pairs") {
    SplitMix64 rng(88);
    for (int trial = 0; trial < 1000; ++trial) {
        const BinaryMask a = random_mask(rng, 8, 8, 0.4);
        const BinaryMask b = random_mask(rng, 8, 8, 0.4);
        const double d = dice(a, b), j = iou(a, b);
        CHECK(std::fabs(d - 2.0 * j / (1.0 + j)) <= 1e-12);
        CHECK(d >= j);
        if (d != 0.0 && d != 1.0) CHECK(d > j);
    }
}

TEST_CASE("summarize_runs: single run has zero std; perfect oracle scores 1") {
    RunMetrics r1{1, 0.9, 0.8, 10};
    const MetricsSummary s1 = summarize_runs({r1}, Split::test);
    CHECK(s1.dice_std == 0.0);
    CHECK(s1.runs == 1);

    RunMetrics r2{2, 0.8, 0.7, 10};
    const MetricsSummary s2 = summarize_runs({r1, r2}, Split::test);
    CHECK(s2.dice_mean == doctest::Approx(0.85).epsilon(1e-15));
    // sample std of {0.9, 0.8}
    CHECK(s2.dice_std == doctest::Approx(std::sqrt(0.005)).epsilon(1e-12));
}

TEST_CASE("seed-7 opposed corpus: GRAY beats RGB_MEAN in every detail band") {
    SynthConfig cfg;  // defaults: seed 7, count 50, size 64
    cfg.chroma_mode = ChromaMode::opposed;
    const Dataset ds = synth_generate(cfg);
    std::vector<CorpusSample> corpus;
    for (const Sample& s : ds.samples) corpus.push_back({&s.image, &s.mask, s.id});
    const ContrastReport rep = analyze_corpus(corpus, 3, 1e-8);
    const Verdict v = compare_gray_vs_rgb(rep);
    CHECK(v.total == 9);
    CHECK(v.gray_higher == 9);
}

TEST_CASE("luma-matched synthetic pairs keep GRAY and RGB_MEAN close") {
    SynthConfig cfg = small_cfg();
    cfg.chroma_mode = ChromaMode::achromatic;
    cfg.count = 4;
    const Dataset ds = synth_generate(cfg);
    std::vector<CorpusSample> corpus;
    for (const Sample& s : ds.samples) corpus.push_back({&s.image, &s.mask, s.id});
    const ContrastReport rep = analyze_corpus(corpus, 2, 1e-8);
    for (int l = 1; l <= 2; ++l)
        for (Band b : {Band::HL, Band::LH, Band::HH}) {
            const double g = rep.find(l, b, Modality::GRAY).ci;
            const double rm = rep.find(l, b, Modality::RGB_MEAN).ci;
            CHECK(std::fabs(g - rm) <= 1e-9);
        }
}
