// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/segmodel.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <sstream>

namespace waveseg {

using nlohmann::json;

const char* ablation_name(AblationMode m) {
    switch (m) {
        case AblationMode::full: return "full";
        case AblationMode::rgb_only: return "rgb_only";
        case AblationMode::add_fusion: return "add_fusion";
        case AblationMode::no_cdf: return "no_cdf";
    }
    return "?";
}

AblationMode ablation_from_string(const std::string& s) {
    if (s == "full") return AblationMode::full;
    if (s == "rgb_only") return AblationMode::rgb_only;
    if (s == "add_fusion") return AblationMode::add_fusion;
    if (s == "no_cdf") return AblationMode::no_cdf;
    throw std::invalid_argument("unknown ablation mode: " + s);
}

// ---------------------------------------------------------------------------
// Block forwards
// ---------------------------------------------------------------------------

namespace {

Tensor norm_act(const Tensor& x, const NormLayer& n) {
    return relu(group_norm(x, n.groups, n.gamma, n.beta));
}

Tensor apply_conv(const Tensor& x, const ConvLayer& c) {
    return conv2d(x, c.w, c.b, c.spec);
}

}  // namespace

Tensor res2_forward(const Tensor& x, const Res2Block& blk) {
    const int c = x.dim(1);
    if (blk.scale < 1 || c % blk.scale != 0)
        throw std::invalid_argument("res2_forward: channels not divisible by scale");
    Tensor u = apply_conv(norm_act(x, blk.norm_in), blk.conv_in);
    const int cg = c / blk.scale;
    std::vector<Tensor> zs;
    zs.reserve(static_cast<std::size_t>(blk.scale));
    Tensor prev;
    for (int i = 0; i < blk.scale; ++i) {
        Tensor yi = narrow_channels(u, i * cg, cg);
        if (i == 0) {
            prev = yi;
        } else {
            Tensor t = norm_act(add(yi, prev), blk.norm_mid[static_cast<std::size_t>(i - 1)]);
            prev = apply_conv(t, blk.conv_mid[static_cast<std::size_t>(i - 1)]);
        }
        zs.push_back(prev);
    }
    Tensor cat = blk.scale == 1 ? zs[0] : concat_channels(zs);
    Tensor o = apply_conv(norm_act(cat, blk.norm_out), blk.conv_out);
    return add(x, o);
}

Tensor bswca_forward(const Tensor& f_rgb, const Tensor& f_gray, const BswcaBlock& blk) {
    if (f_rgb.shape() != f_gray.shape())
        throw std::invalid_argument("bswca_forward: stream shapes differ");
    const int n = f_rgb.dim(0), c = f_rgb.dim(1), h = f_rgb.dim(2), w = f_rgb.dim(3);
    if (h % 2 != 0 || w % 2 != 0)
        throw std::invalid_argument("bswca_forward: H and W must be even");
    const int h2 = h / 2, w2 = w / 2;
    if (blk.window < 1 || h2 % blk.window != 0 || w2 % blk.window != 0)
        throw std::invalid_argument("bswca_forward: sub-band maps not divisible by window");

    const Tensor bands_rgb = haar_analysis_stack(f_rgb);
    const Tensor bands_gray = haar_analysis_stack(f_gray);
    std::vector<Tensor> fused;
    fused.reserve(4);
    for (int b = 0; b < 4; ++b) {
        const Tensor br = narrow_channels(bands_rgb, b * c, c);
        const Tensor bg = narrow_channels(bands_gray, b * c, c);
        const Tensor q = window_partition(br, blk.window);
        const Tensor kv = window_partition(bg, blk.window);
        const Tensor attn = cross_attention(q, kv, blk.band[static_cast<std::size_t>(b)]);
        fused.push_back(add(br, window_merge(attn, blk.window, n, c, h2, w2)));
    }
    return haar_synthesis_stack(concat_channels(fused));
}

Tensor cdf_forward(const Tensor& x, const CdfBlock& blk) {
    const Tensor h1 = relu(apply_conv(x, blk.d1));
    const Tensor h2 = relu(apply_conv(add(x, h1), blk.d2));
    const Tensor h3 = relu(apply_conv(add(add(x, h1), h2), blk.d4));
    return apply_conv(concat_channels({x, h1, h2, h3}), blk.fuse);
}

// ---------------------------------------------------------------------------
// Model assembly
// ---------------------------------------------------------------------------

SegModel::SegModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), init_rng_(seed) {
    if (cfg_.widths.size() != 4)
        throw std::invalid_argument("SegModel: exactly four stage widths expected");
    for (int w : cfg_.widths) {
        if (w < 1 || w % cfg_.scale != 0)
            throw std::invalid_argument("SegModel: widths must be positive multiples of scale");
    }
    for (std::size_t i = 1; i < 4; ++i)
        if (cfg_.widths[i] % cfg_.heads != 0)
            throw std::invalid_argument("SegModel: fused stage widths must be divisible by heads");
    build();
}

Tensor SegModel::param(const std::string& name, std::vector<int> shape, double bound) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> v(n, 0.0);
    if (bound > 0.0)
        for (double& x : v) x = init_rng_.next_range(-bound, bound);
    Tensor t = Tensor::from_values(std::move(shape), std::move(v), true);
    params_.emplace_back(name, t);
    return t;
}

ConvLayer SegModel::make_conv(const std::string& name, int cin, int cout, int k,
                              ConvSpec spec, bool zero) {
    const double bound = zero ? 0.0 : std::sqrt(1.0 / (static_cast<double>(cin) * k * k));
    ConvLayer c;
    c.w = param(name + ".w", {cout, cin, k, k}, bound);
    c.b = param(name + ".b", {cout}, 0.0);
    c.spec = spec;
    return c;
}

NormLayer SegModel::make_norm(const std::string& name, int c) {
    NormLayer n;
    n.groups = std::min(cfg_.gn_groups, c);
    if (c % n.groups != 0)
        throw std::invalid_argument("SegModel: channel count " + std::to_string(c) +
                                    " incompatible with group count");
    n.gamma = param(name + ".gamma", {c}, 0.0);
    std::fill(n.gamma.values().begin(), n.gamma.values().end(), 1.0);
    n.beta = param(name + ".beta", {c}, 0.0);
    return n;
}

AttentionParams SegModel::make_attention(const std::string& name, int c) {
    const double bound = std::sqrt(1.0 / static_cast<double>(c));
    AttentionParams p;
    p.heads = cfg_.heads;
    p.wq = param(name + ".wq", {c, c}, bound);
    p.wk = param(name + ".wk", {c, c}, bound);
    p.wv = param(name + ".wv", {c, c}, bound);
    // Zero output projection: the attention branch starts as an exact no-op
    // through its residual, so a fresh full model equals its rgb_only ablation.
    p.wo = param(name + ".wo", {c, c}, 0.0);
    return p;
}

void SegModel::build() {
    const auto& w = cfg_.widths;
    const bool has_gray = cfg_.mode != AblationMode::rgb_only;
    const bool has_bswca =
        cfg_.mode == AblationMode::full || cfg_.mode == AblationMode::no_cdf;
    const bool has_cdf = cfg_.mode != AblationMode::no_cdf;

    auto build_encoder = [&](const char* prefix) {
        Encoder enc;
        enc.stem = make_conv(std::string(prefix) + ".stem", cfg_.in_channels, w[0], 3,
                             {.stride = 1, .padding = 1});
        int prev = w[0];
        for (int s = 1; s <= 4; ++s) {
            std::ostringstream base;
            base << prefix << ".s" << s;
            EncoderStage stage;
            stage.pre = make_norm(base.str() + ".pre", prev);
            stage.down = make_conv(base.str() + ".down", prev, w[static_cast<std::size_t>(s - 1)],
                                   2, {.stride = 2, .padding = 0});
            const int c = w[static_cast<std::size_t>(s - 1)];
            Res2Block r;
            r.scale = cfg_.scale;
            r.norm_in = make_norm(base.str() + ".res2.norm_in", c);
            r.conv_in = make_conv(base.str() + ".res2.conv_in", c, c, 1, {});
            const int cg = c / cfg_.scale;
            for (int i = 1; i < cfg_.scale; ++i) {
                std::ostringstream mid;
                mid << base.str() << ".res2.mid" << i;
                r.norm_mid.push_back(make_norm(mid.str() + ".norm", cg));
                r.conv_mid.push_back(
                    make_conv(mid.str() + ".conv", cg, cg, 3, {.stride = 1, .padding = 1}));
            }
            r.norm_out = make_norm(base.str() + ".res2.norm_out", c);
            r.conv_out = make_conv(base.str() + ".res2.conv_out", c, c, 1, {});
            stage.res2 = std::move(r);
            enc.stages.push_back(std::move(stage));
            prev = c;
        }
        return enc;
    };

    rgb_ = build_encoder("rgb");
    if (has_gray) gray_ = build_encoder("gray");

    if (has_bswca) {
        for (int s = 2; s <= 4; ++s) {
            const int c = w[static_cast<std::size_t>(s - 1)];
            BswcaBlock blk;
            blk.window = cfg_.window;
            static constexpr const char* kBands[4] = {"ll", "hl", "lh", "hh"};
            for (int b = 0; b < 4; ++b) {
                std::ostringstream name;
                name << "bswca" << s << "." << kBands[b];
                blk.band[static_cast<std::size_t>(b)] = make_attention(name.str(), c);
            }
            bswca_.push_back(std::move(blk));
        }
    }

    // Decoder: block k consumes ck channels and emits ok.
    const int dec_in[3] = {w[3], w[2], w[1]};
    const int dec_out[3] = {w[2], w[1], w[0]};
    for (int k = 0; k < 3; ++k) {
        std::ostringstream base;
        base << "dec.cdf" << 4 - k;
        if (has_cdf) {
            CdfBlock blk;
            blk.d1 = make_conv(base.str() + ".d1", dec_in[k], dec_in[k], 3,
                               {.stride = 1, .padding = 1, .dilation = 1});
            blk.d2 = make_conv(base.str() + ".d2", dec_in[k], dec_in[k], 3,
                               {.stride = 1, .padding = 2, .dilation = 2});
            blk.d4 = make_conv(base.str() + ".d4", dec_in[k], dec_in[k], 3,
                               {.stride = 1, .padding = 4, .dilation = 4});
            blk.fuse = make_conv(base.str() + ".fuse", 4 * dec_in[k], dec_out[k], 1, {});
            cdf_.push_back(std::move(blk));
        } else {
            std::ostringstream sname;
            sname << "dec.simple" << 4 - k;
            simple_dec_.push_back(make_conv(sname.str(), dec_in[k], dec_out[k], 3,
                                            {.stride = 1, .padding = 1}));
        }
        if (k < 2) {
            // Glue after upsampling: concat halves back to dec_in[k+1].
            std::ostringstream gname;
            gname << "dec.glue" << 3 - k;
            const int cat_c = dec_out[k] + w[static_cast<std::size_t>(2 - k)];
            glue_norm_.push_back(make_norm(gname.str() + ".norm", cat_c));
            glue_reduce_.push_back(make_conv(gname.str() + ".reduce", cat_c, dec_in[k + 1], 1, {}));
        }
    }

    head_norm_ = make_norm("head.norm", w[0]);
    head_ = make_conv("head", w[0], 1, 1, {});
}

int SegModel::stage_window(int stage, int input_h, int input_w) const {
    const int h2 = (input_h >> stage) / 2;
    const int w2 = (input_w >> stage) / 2;
    int v = std::min({cfg_.window, h2, w2});
    while (v > 1 && (h2 % v != 0 || w2 % v != 0)) --v;
    return std::max(v, 1);
}

std::array<Tensor, 4> SegModel::encode(const Encoder& enc, const Tensor& input) const {
    std::array<Tensor, 4> feats;
    Tensor x = apply_conv(input, enc.stem);
    for (int s = 0; s < 4; ++s) {
        const EncoderStage& st = enc.stages[static_cast<std::size_t>(s)];
        x = apply_conv(norm_act(x, st.pre), st.down);
        x = res2_forward(x, st.res2);
        feats[static_cast<std::size_t>(s)] = x;
    }
    return feats;
}

namespace {

// Luma plane replicated to the stem width so both encoders share a topology.
Tensor replicate_luma(const Tensor& images) {
    const int n = images.dim(0), h = images.dim(2), w = images.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> v(images.numel());
    const double* src = images.data();
    for (int ni = 0; ni < n; ++ni) {
        const double* r = src + static_cast<std::size_t>(ni) * 3 * plane;
        const double* g = r + plane;
        const double* b = g + plane;
        double* dst = v.data() + static_cast<std::size_t>(ni) * 3 * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            const double luma = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
            dst[i] = luma;
            dst[plane + i] = luma;
            dst[2 * plane + i] = luma;
        }
    }
    return Tensor::from_values({n, 3, h, w}, std::move(v));
}

}  // namespace

Tensor SegModel::forward(const Tensor& images) const {
    if (images.shape().size() != 4 || images.dim(1) != cfg_.in_channels)
        throw std::invalid_argument("forward: expected N x 3 x H x W images");
    const int h = images.dim(2), w = images.dim(3);
    if (h % 32 != 0 || w % 32 != 0)
        throw std::invalid_argument("forward: H and W must be divisible by 32, got " +
                                    std::to_string(h) + "x" + std::to_string(w));

    const std::array<Tensor, 4> rgb_f = encode(rgb_, images);
    std::array<Tensor, 4> fused = rgb_f;

    if (cfg_.mode != AblationMode::rgb_only) {
        const std::array<Tensor, 4> gray_f = encode(gray_, replicate_luma(images));
        for (int s = 2; s <= 4; ++s) {
            const std::size_t i = static_cast<std::size_t>(s - 1);
            if (cfg_.mode == AblationMode::add_fusion) {
                fused[i] = add(rgb_f[i], gray_f[i]);
            } else {
                BswcaBlock blk = bswca_[static_cast<std::size_t>(s - 2)];
                blk.window = stage_window(s, h, w);
                fused[i] = bswca_forward(rgb_f[i], gray_f[i], blk);
            }
        }
    }

    auto dec_block = [&](int k, const Tensor& x) {
        if (cfg_.mode == AblationMode::no_cdf)
            return apply_conv(x, simple_dec_[static_cast<std::size_t>(k)]);
        return cdf_forward(x, cdf_[static_cast<std::size_t>(k)]);
    };

    Tensor d = dec_block(0, fused[3]);
    for (int k = 0; k < 2; ++k) {
        d = upsample_nearest_2x(d);
        d = concat_channels({d, fused[static_cast<std::size_t>(2 - k)]});
        d = apply_conv(norm_act(d, glue_norm_[static_cast<std::size_t>(k)]),
                       glue_reduce_[static_cast<std::size_t>(k)]);
        d = dec_block(k + 1, d);
    }
    const Tensor logits = apply_conv(norm_act(d, head_norm_), head_);
    return upsample_bilinear(logits, 4);
}

SegModel SegModel::ablate(AblationMode mode) const {
    ModelConfig cfg = cfg_;
    cfg.mode = mode;
    SegModel out(cfg, seed_);
    // Keep the weights this model already has for every shared parameter.
    for (auto& [name, tensor] : out.params_) {
        for (const auto& [src_name, src] : params_) {
            if (src_name == name) {
                if (src.shape() != tensor.shape())
                    throw std::logic_error("ablate: shape drift on " + name);
                tensor.values() = src.values();
                break;
            }
        }
    }
    return out;
}

std::vector<Tensor> SegModel::parameters() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [name, t] : params_) out.push_back(t);
    return out;
}

std::size_t SegModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : params_) n += t.numel();
    return n;
}

// ---------------------------------------------------------------------------
// Checkpoint container: "WSEGCKPT" magic, u32 version, u32 JSON header
// length, JSON header (config, seed, tensor directory), then one float64
// little-endian payload per tensor in directory order.
// ---------------------------------------------------------------------------

namespace {

json config_to_json(const ModelConfig& cfg) {
    return json{{"in_channels", cfg.in_channels}, {"widths", cfg.widths},
                {"scale", cfg.scale},             {"window", cfg.window},
                {"heads", cfg.heads},             {"gn_groups", cfg.gn_groups},
                {"mode", ablation_name(cfg.mode)}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.in_channels = j.at("in_channels").get<int>();
    cfg.widths = j.at("widths").get<std::vector<int>>();
    cfg.scale = j.at("scale").get<int>();
    cfg.window = j.at("window").get<int>();
    cfg.heads = j.at("heads").get<int>();
    cfg.gn_groups = j.at("gn_groups").get<int>();
    cfg.mode = ablation_from_string(j.at("mode").get<std::string>());
    return cfg;
}

constexpr char kMagic[8] = {'W', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void SegModel::save_checkpoint(const std::string& path) const {
    json tensors = json::array();
    for (const auto& [name, t] : params_)
        tensors.push_back(json{{"name", name}, {"shape", t.shape()}});
    const json header = {{"format_version", kVersion},
                         {"config", config_to_json(cfg_)},
                         {"seed", seed_},
                         {"tensors", tensors}};
    const std::string htext = header.dump();

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    f.write(kMagic, 8);
    write_u32(f, kVersion);
    write_u32(f, static_cast<std::uint32_t>(htext.size()));
    f.write(htext.data(), static_cast<std::streamsize>(htext.size()));
    for (const auto& [name, t] : params_)
        f.write(reinterpret_cast<const char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

SegModel SegModel::load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a waveseg checkpoint: " + path);
    const std::uint32_t version = read_u32(f);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t hlen = read_u32(f);
    std::string htext(hlen, '\0');
    f.read(htext.data(), hlen);
    if (!f) throw std::runtime_error("truncated checkpoint header: " + path);
    const json header = json::parse(htext);

    SegModel model(config_from_json(header.at("config")),
                   header.at("seed").get<std::uint64_t>());

    // The directory must match the freshly built topology exactly; report a
    // field-by-field diff when it does not.
    const json& tensors = header.at("tensors");
    std::ostringstream diff;
    bool ok = tensors.size() == model.params_.size();
    if (!ok)
        diff << "tensor count: expected " << model.params_.size() << ", found "
             << tensors.size() << "\n";
    for (std::size_t i = 0; i < tensors.size() && i < model.params_.size(); ++i) {
        const std::string name = tensors[i].at("name").get<std::string>();
        const std::vector<int> shape = tensors[i].at("shape").get<std::vector<int>>();
        if (name != model.params_[i].first || shape != model.params_[i].second.shape()) {
            ok = false;
            diff << "entry " << i << ": expected " << model.params_[i].first << " [";
            for (int d : model.params_[i].second.shape()) diff << d << " ";
            diff << "], found " << name << " [";
            for (int d : shape) diff << d << " ";
            diff << "]\n";
        }
    }
    if (!ok)
        throw std::runtime_error("checkpoint topology mismatch:\n" + diff.str());

    for (auto& [name, t] : model.params_) {
        f.read(reinterpret_cast<char*>(t.data()),
               static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!f) throw std::runtime_error("truncated checkpoint payload at " + name);
    }
    return model;
}

}  // namespace waveseg
