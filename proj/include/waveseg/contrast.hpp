// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Contrast-index analysis of polyp/background separability per wavelet
// sub-band, comparing the grayscale plane against individual RGB channels.

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "waveseg/image.hpp"
#include "waveseg/wavelet.hpp"

namespace waveseg {

enum class Band { HL, LH, HH, LL };
enum class Modality { GRAY, R, G, B, RGB_MEAN };

const char* band_name(Band b);
const char* modality_name(Modality m);

/// One (level, band, modality) cell of a contrast report. For corpus reports
/// `ci` is the mean over contributing samples; `n_samples` counts contributors
/// and `n_skipped` counts samples excluded for this key (degenerate mask at
/// full resolution, or a region that became empty after mask downsampling).
struct ContrastEntry {
    int level = 0;
    Band band = Band::HL;
    Modality modality = Modality::GRAY;
    double ci = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_skipped = 0;
};

struct ContrastReport {
    int levels = 0;
    double epsilon = 0.0;
    std::vector<ContrastEntry> entries;  // canonical order: level asc,
                                         // bands HL,LH,HH (LL last at the
                                         // coarsest level), modalities
                                         // GRAY,R,G,B,RGB_MEAN

    const ContrastEntry& find(int level, Band b, Modality m) const;
};

/// ITU-R BT.601 luma: 0.299 R + 0.587 G + 0.114 B.
Matrix2D to_grayscale(const RgbImage& img);

/// |mean(|coeffs| in mask) - mean(|coeffs| outside)| /
/// (mean_in + mean_out + epsilon); 0 when either region is empty.
double contrast_index(const Matrix2D& coeffs, const BinaryMask& mask, double epsilon);

/// Factor-2^level block majority vote; ties count as polyp.
BinaryMask downsample_mask(const BinaryMask& mask, int level);

ContrastReport analyze_pair(const RgbImage& img, const BinaryMask& mask,
                            int levels, double epsilon);

struct CorpusSample {
    const RgbImage* image;
    const BinaryMask* mask;
    std::string id;
};

/// Per-key mean of per-image CIs. Samples with a degenerate full-resolution
/// mask are skipped and counted; throws if every sample is degenerate.
ContrastReport analyze_corpus(const std::vector<CorpusSample>& samples,
                              int levels, double epsilon);

/// CSV with header level,band,modality,ci,n_samples,n_skipped; 9 significant
/// digits, LF line endings.
void write_contrast_csv(const ContrastReport& report, std::ostream& os);
void write_contrast_csv(const ContrastReport& report, const std::string& path);

/// GRAY vs RGB_MEAN comparison over detail bands.
struct BandVerdict {
    int level;
    Band band;
    double gray_ci;
    double rgb_mean_ci;
    int relation;  // +1 gray greater, -1 smaller, 0 equal within tolerance
};

struct Verdict {
    std::vector<BandVerdict> bands;
    int gray_higher = 0;
    int total = 0;
    bool all_equal = false;

    std::string summary(int levels) const;
};

Verdict compare_gray_vs_rgb(const ContrastReport& report, double tolerance = 1e-9);

}  // namespace waveseg
