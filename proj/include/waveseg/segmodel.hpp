// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Dual-encoder segmentation network. Two four-stage Res2-style encoders (RGB
// and luma-replicated grayscale) exchange information per stage through
// band-specific window cross-attention in the Haar domain; a cascade-dilated
// decoder fuses the top three stages and emits full-resolution logits.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "waveseg/ops.hpp"
#include "waveseg/rng.hpp"

namespace waveseg {

enum class AblationMode { full, rgb_only, add_fusion, no_cdf };

const char* ablation_name(AblationMode m);
AblationMode ablation_from_string(const std::string& s);

struct ModelConfig {
    int in_channels = 3;
    std::vector<int> widths = {16, 32, 64, 128};  // stage channel counts
    int scale = 4;      // res2 channel-group count
    int window = 4;     // attention window on sub-band maps (shrunk per stage
                        // when the maps are smaller)
    int heads = 4;
    int gn_groups = 8;  // per-norm cap; groups = min(gn_groups, C)
    AblationMode mode = AblationMode::full;

    bool operator==(const ModelConfig&) const = default;
};

struct ConvLayer {
    Tensor w, b;
    ConvSpec spec;
};

struct NormLayer {
    Tensor gamma, beta;
    int groups = 1;
};

/// Pre-activation Res2 block: 1x1 in, hierarchical 3x3 group convs
/// z1 = y1, z_i = conv3x3(act(norm(y_i + z_{i-1}))), concat, 1x1 out,
/// residual add. Norm+relu precede every convolution.
struct Res2Block {
    int scale = 4;
    NormLayer norm_in;
    ConvLayer conv_in;                 // 1x1, C -> C
    std::vector<NormLayer> norm_mid;   // scale-1 entries
    std::vector<ConvLayer> conv_mid;   // scale-1 3x3 convs, C/s -> C/s
    NormLayer norm_out;
    ConvLayer conv_out;                // 1x1, C -> C
};

/// Band-specific window cross-attention: one independent parameter set per
/// Haar band, applied in the order LL, HL, LH, HH.
struct BswcaBlock {
    std::array<AttentionParams, 4> band;
    int window = 4;
};

/// Cascade dilated fusion: h1 = act(d1(x)), h2 = act(d2(x+h1)),
/// h3 = act(d4(x+h1+h2)), out = 1x1(concat(x, h1, h2, h3)).
struct CdfBlock {
    ConvLayer d1, d2, d4;  // 3x3, dilations 1/2/4, paddings 1/2/4
    ConvLayer fuse;        // 1x1, 4C -> Cout
};

struct EncoderStage {
    NormLayer pre;    // pre-activation before the downsample conv
    ConvLayer down;   // 2x2 stride-2
    Res2Block res2;
};

struct Encoder {
    ConvLayer stem;  // 3x3 stride-1
    std::vector<EncoderStage> stages;
};

Tensor res2_forward(const Tensor& x, const Res2Block& blk);
Tensor bswca_forward(const Tensor& f_rgb, const Tensor& f_gray, const BswcaBlock& blk);
Tensor cdf_forward(const Tensor& x, const CdfBlock& blk);

class SegModel {
public:
    SegModel(const ModelConfig& cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    /// images: N x 3 x H x W in [0,1], H and W divisible by 32.
    /// Returns N x 1 x H x W logits.
    Tensor forward(const Tensor& images) const;

    /// Structurally modified copy. Parameters shared with this model keep
    /// their current values; parameters that exist only in the target mode
    /// are freshly initialized from this model's seed.
    SegModel ablate(AblationMode mode) const;

    std::vector<Tensor> parameters() const;
    const std::vector<std::pair<std::string, Tensor>>& named_parameters() const {
        return params_;
    }
    std::size_t parameter_count() const;

    void save_checkpoint(const std::string& path) const;
    static SegModel load_checkpoint(const std::string& path);

    /// Window size actually used at encoder stage `i` (1-based) for an input
    /// with the given spatial extent.
    int stage_window(int stage, int input_h, int input_w) const;

private:
    void build();
    Tensor param(const std::string& name, std::vector<int> shape, double bound);
    ConvLayer make_conv(const std::string& name, int cin, int cout, int k,
                        ConvSpec spec, bool zero = false);
    NormLayer make_norm(const std::string& name, int c);
    AttentionParams make_attention(const std::string& name, int c);

    std::array<Tensor, 4> encode(const Encoder& enc, const Tensor& input) const;

    ModelConfig cfg_;
    std::uint64_t seed_;
    SplitMix64 init_rng_;
    std::vector<std::pair<std::string, Tensor>> params_;

    Encoder rgb_, gray_;
    std::vector<BswcaBlock> bswca_;          // stages 2..4
    std::vector<CdfBlock> cdf_;              // decoder, coarse to fine
    std::vector<ConvLayer> simple_dec_;      // no_cdf replacement convs
    std::vector<NormLayer> glue_norm_;       // before the reduce 1x1s
    std::vector<ConvLayer> glue_reduce_;
    NormLayer head_norm_;
    ConvLayer head_;
};

}  // namespace waveseg
