// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic low-contrast polyp corpus, on-disk dataset handling
// and the Dice/IoU evaluation protocol. All randomness flows through
// SplitMix64 streams so a config reproduces a corpus byte for byte.

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "waveseg/image.hpp"

namespace waveseg {

enum class Split { train, val, test };
enum class ChromaMode { achromatic, matched, opposed };

const char* split_name(Split s);
const char* chroma_name(ChromaMode m);
ChromaMode chroma_from_string(const std::string& s);

struct SynthConfig {
    std::uint64_t seed = 7;
    int count = 50;
    int size = 64;                 // square, divisible by 32
    double luma_delta = 0.08;      // polyp/background luminance gap
    ChromaMode chroma_mode = ChromaMode::matched;
    double illumination_gradient = 0.10;  // linear shading amplitude
    double noise_sigma = 0.03;            // per-channel Gaussian noise
    std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};

    void validate() const;
};

struct Sample {
    RgbImage image;
    BinaryMask mask;
    std::string id;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<Split> split;  // parallel to samples

    std::vector<std::size_t> indices_of(Split s) const;
    std::size_t count_of(Split s) const { return indices_of(s).size(); }
};

/// Sample i is generated from SplitMix64(seed + i); the draw order (base
/// color, shading angle, polyp sign, blob, noise) is part of the format.
/// Emitted masks always have a polyp fraction in [0.04, 0.30]; out-of-range
/// blobs are resampled internally. Pixel values are quantized to 8-bit levels
/// so the in-memory corpus equals its PNG round trip exactly.
Dataset synth_generate(const SynthConfig& cfg);

/// Writes images/<id>.png, masks/<id>.png and manifest.json (config echo,
/// per-sample SHA-256, corpus SHA-256).
void save_dataset(const Dataset& ds, const SynthConfig& cfg, const std::string& dir);

struct LoadSpec {
    std::array<double, 3> split_ratios = {0.8, 0.1, 0.1};
    std::uint64_t split_seed = 0;
};

struct LoadReport {
    std::size_t loaded = 0;
    std::size_t excluded_degenerate = 0;
    std::vector<std::string> warnings;
};

/// Loads images/ + masks/ pairs matched by file stem; 8-bit values scaled to
/// [0,1], masks thresholded at 128. Split assignment is a seeded shuffle with
/// val/test counts floored and train taking the remainder.
Dataset load_dataset(const std::string& dir, const LoadSpec& spec,
                     LoadReport* report = nullptr);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// 2|P&G| / (|P|+|G|); empty vs empty is 1.
double dice(const BinaryMask& pred, const BinaryMask& gt);
/// |P&G| / |P|G|union; empty vs empty is 1.
double iou(const BinaryMask& pred, const BinaryMask& gt);

struct RunMetrics {
    std::uint64_t seed = 0;  // training seed that produced the run
    double dice_mean = 0.0;
    double iou_mean = 0.0;
    std::size_t n_samples = 0;
};

struct MetricsSummary {
    std::string split;
    std::size_t runs = 0;
    double dice_mean = 0.0, dice_std = 0.0;
    double iou_mean = 0.0, iou_std = 0.0;
    std::vector<RunMetrics> per_run;
};

/// Mean and sample standard deviation (n-1; 0 when runs == 1) across runs.
MetricsSummary summarize_runs(const std::vector<RunMetrics>& runs, Split split);

// ---------------------------------------------------------------------------
// Hashing
// ---------------------------------------------------------------------------

std::string sha256_hex(const std::uint8_t* data, std::size_t n);

/// Hash of one sample's quantized pixels + mask (the serialized form).
std::string sample_sha256(const Sample& s);

/// Hash over all per-sample hashes in corpus order.
std::string corpus_sha256(const Dataset& ds);

// 8-bit conversions shared by storage and hashing.
std::vector<std::uint8_t> image_to_bytes(const RgbImage& img);   // interleaved RGB
std::vector<std::uint8_t> mask_to_bytes(const BinaryMask& m);    // 0/255
RgbImage image_from_bytes(int h, int w, const std::uint8_t* rgb);
BinaryMask mask_from_bytes(int h, int w, const std::uint8_t* gray);

}  // namespace waveseg
