// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/contrast.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "waveseg/kernels.hpp"

namespace waveseg {

const char* band_name(Band b) {
    switch (b) {
        case Band::HL: return "HL";
        case Band::LH: return "LH";
        case Band::HH: return "HH";
        case Band::LL: return "LL";
    }
    return "?";
}

const char* modality_name(Modality m) {
    switch (m) {
        case Modality::GRAY: return "GRAY";
        case Modality::R: return "R";
        case Modality::G: return "G";
        case Modality::B: return "B";
        case Modality::RGB_MEAN: return "RGB_MEAN";
    }
    return "?";
}

const ContrastEntry& ContrastReport::find(int level, Band b, Modality m) const {
    for (const ContrastEntry& e : entries)
        if (e.level == level && e.band == b && e.modality == m) return e;
    throw std::out_of_range("ContrastReport: no such entry");
}

Matrix2D to_grayscale(const RgbImage& img) {
    Matrix2D out(img.height, img.width);
    const double* r = img.channels[0].v.data();
    const double* g = img.channels[1].v.data();
    const double* b = img.channels[2].v.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        out.v[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
    return out;
}

namespace {

struct CiResult {
    double ci = 0.0;
    bool empty_region = false;
};

CiResult contrast_index_ex(const Matrix2D& coeffs, const BinaryMask& mask,
                           double epsilon) {
    if (coeffs.rows != mask.height || coeffs.cols != mask.width)
        throw std::invalid_argument("contrast_index: coefficient/mask dimensions differ");
    if (!(epsilon > 0.0))
        throw std::invalid_argument("contrast_index: epsilon must be positive");
    double sum_in = 0.0, sum_out = 0.0;
    std::size_t n_in = 0;
    kern::masked_abs_sums(coeffs.v.data(), mask.v.data(), coeffs.size(), sum_in,
                          sum_out, n_in);
    const std::size_t n_out = coeffs.size() - n_in;
    if (n_in == 0 || n_out == 0) return {0.0, true};
    const double mu_in = sum_in / static_cast<double>(n_in);
    const double mu_out = sum_out / static_cast<double>(n_out);
    return {std::fabs(mu_in - mu_out) / (mu_in + mu_out + epsilon), false};
}

}  // namespace

double contrast_index(const Matrix2D& coeffs, const BinaryMask& mask, double epsilon) {
    return contrast_index_ex(coeffs, mask, epsilon).ci;
}

BinaryMask downsample_mask(const BinaryMask& mask, int level) {
    if (level < 1) throw std::invalid_argument("downsample_mask: level must be >= 1");
    const int f = 1 << level;
    if (mask.height % f != 0 || mask.width % f != 0)
        throw std::invalid_argument("downsample_mask: dimensions not divisible by 2^level");
    BinaryMask out(mask.height / f, mask.width / f);
    const int block = f * f;
    for (int r = 0; r < out.height; ++r) {
        for (int c = 0; c < out.width; ++c) {
            int ones = 0;
            for (int dr = 0; dr < f; ++dr)
                for (int dc = 0; dc < f; ++dc)
                    ones += mask.at(r * f + dr, c * f + dc) != 0;
            out.at(r, c) = 2 * ones >= block ? 1 : 0;
        }
    }
    return out;
}

namespace {

// Keys in canonical report order.
struct Key {
    int level;
    Band band;
    Modality modality;
};

std::vector<Key> canonical_keys(int levels) {
    static constexpr Modality kModalities[] = {Modality::GRAY, Modality::R,
                                               Modality::G, Modality::B,
                                               Modality::RGB_MEAN};
    std::vector<Key> keys;
    for (int l = 1; l <= levels; ++l) {
        std::vector<Band> bands = {Band::HL, Band::LH, Band::HH};
        if (l == levels) bands.push_back(Band::LL);
        for (Band b : bands)
            for (Modality m : kModalities) keys.push_back({l, b, m});
    }
    return keys;
}

const Matrix2D& pick_band(const WaveletPyramid& pyr, int level, Band b) {
    const DetailBands& d = pyr.details[static_cast<std::size_t>(level - 1)];
    switch (b) {
        case Band::HL: return d.hl;
        case Band::LH: return d.lh;
        case Band::HH: return d.hh;
        case Band::LL: return pyr.approx;
    }
    throw std::logic_error("pick_band");
}

struct PairResult {
    // Indexed like canonical_keys; empty flag per key.
    std::vector<double> ci;
    std::vector<bool> empty;
};

PairResult analyze_pair_raw(const RgbImage& img, const BinaryMask& mask,
                            int levels, double epsilon) {
    if (img.height != mask.height || img.width != mask.width)
        throw std::invalid_argument("analyze_pair: image/mask dimensions differ");
    const int div = 1 << levels;
    if (img.height % div != 0 || img.width % div != 0)
        throw std::invalid_argument("analyze_pair: dimensions not divisible by 2^levels");

    const Matrix2D gray = to_grayscale(img);
    const WaveletPyramid pyr_gray = wavedec2(gray, levels);
    const WaveletPyramid pyr_r = wavedec2(img.channels[0], levels);
    const WaveletPyramid pyr_g = wavedec2(img.channels[1], levels);
    const WaveletPyramid pyr_b = wavedec2(img.channels[2], levels);

    std::vector<BinaryMask> masks;
    for (int l = 1; l <= levels; ++l) masks.push_back(downsample_mask(mask, l));

    PairResult res;
    for (int l = 1; l <= levels; ++l) {
        std::vector<Band> bands = {Band::HL, Band::LH, Band::HH};
        if (l == levels) bands.push_back(Band::LL);
        const BinaryMask& m = masks[static_cast<std::size_t>(l - 1)];
        for (Band b : bands) {
            const CiResult g = contrast_index_ex(pick_band(pyr_gray, l, b), m, epsilon);
            const CiResult r = contrast_index_ex(pick_band(pyr_r, l, b), m, epsilon);
            const CiResult gg = contrast_index_ex(pick_band(pyr_g, l, b), m, epsilon);
            const CiResult bb = contrast_index_ex(pick_band(pyr_b, l, b), m, epsilon);
            const bool empty = g.empty_region;  // same mask for all modalities
            const double rgb_mean = (r.ci + gg.ci + bb.ci) / 3.0;
            for (double ci : {g.ci, r.ci, gg.ci, bb.ci, rgb_mean}) {
                res.ci.push_back(ci);
                res.empty.push_back(empty);
            }
        }
    }
    return res;
}

}  // namespace

ContrastReport analyze_pair(const RgbImage& img, const BinaryMask& mask,
                            int levels, double epsilon) {
    if (mask.degenerate())
        throw std::invalid_argument("analyze_pair: degenerate mask (all zero or all one)");
    const PairResult raw = analyze_pair_raw(img, mask, levels, epsilon);
    const std::vector<Key> keys = canonical_keys(levels);
    ContrastReport rep;
    rep.levels = levels;
    rep.epsilon = epsilon;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        ContrastEntry e;
        e.level = keys[i].level;
        e.band = keys[i].band;
        e.modality = keys[i].modality;
        e.ci = raw.ci[i];
        e.n_samples = raw.empty[i] ? 0 : 1;
        e.n_skipped = raw.empty[i] ? 1 : 0;
        rep.entries.push_back(e);
    }
    return rep;
}

ContrastReport analyze_corpus(const std::vector<CorpusSample>& samples,
                              int levels, double epsilon) {
    if (samples.empty()) throw std::invalid_argument("analyze_corpus: empty corpus");
    const std::vector<Key> keys = canonical_keys(levels);
    std::vector<double> sums(keys.size(), 0.0);
    std::vector<std::size_t> counts(keys.size(), 0), skips(keys.size(), 0);
    std::size_t degenerate = 0;

    for (const CorpusSample& s : samples) {
        if (s.mask->degenerate()) {
            ++degenerate;
            for (std::size_t i = 0; i < keys.size(); ++i) ++skips[i];
            continue;
        }
        const PairResult raw = analyze_pair_raw(*s.image, *s.mask, levels, epsilon);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            if (raw.empty[i]) {
                ++skips[i];
            } else {
                sums[i] += raw.ci[i];
                ++counts[i];
            }
        }
    }
    if (degenerate == samples.size())
        throw std::invalid_argument("analyze_corpus: all samples have degenerate masks");

    ContrastReport rep;
    rep.levels = levels;
    rep.epsilon = epsilon;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        ContrastEntry e;
        e.level = keys[i].level;
        e.band = keys[i].band;
        e.modality = keys[i].modality;
        e.ci = counts[i] > 0 ? sums[i] / static_cast<double>(counts[i]) : 0.0;
        e.n_samples = counts[i];
        e.n_skipped = skips[i];
        rep.entries.push_back(e);
    }
    return rep;
}

void write_contrast_csv(const ContrastReport& report, std::ostream& os) {
    os << "level,band,modality,ci,n_samples,n_skipped\n";
    char buf[64];
    for (const ContrastEntry& e : report.entries) {
        std::snprintf(buf, sizeof(buf), "%.9g", e.ci);
        os << e.level << ',' << band_name(e.band) << ',' << modality_name(e.modality)
           << ',' << buf << ',' << e.n_samples << ',' << e.n_skipped << '\n';
    }
}

void write_contrast_csv(const ContrastReport& report, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_contrast_csv(report, f);
}

Verdict compare_gray_vs_rgb(const ContrastReport& report, double tolerance) {
    Verdict v;
    bool all_equal = true;
    for (int l = 1; l <= report.levels; ++l) {
        for (Band b : {Band::HL, Band::LH, Band::HH}) {
            const double g = report.find(l, b, Modality::GRAY).ci;
            const double r = report.find(l, b, Modality::RGB_MEAN).ci;
            BandVerdict bv{l, b, g, r, 0};
            if (std::fabs(g - r) > tolerance) {
                bv.relation = g > r ? 1 : -1;
                all_equal = false;
            }
            if (bv.relation == 1) ++v.gray_higher;
            ++v.total;
            v.bands.push_back(bv);
        }
    }
    v.all_equal = all_equal;
    return v;
}

std::string Verdict::summary(int levels) const {
    std::ostringstream os;
    if (all_equal) {
        os << "GRAY == RGB_MEAN (within tolerance) in all " << total
           << " detail bands (" << levels << " levels)";
    } else {
        os << "GRAY > RGB_MEAN in " << gray_higher << "/" << total
           << " detail bands (" << levels << " levels)";
    }
    return os.str();
}

}  // namespace waveseg
