// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/datagen.hpp"

#include <openssl/evp.h>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "waveseg/png_io.hpp"
#include "waveseg/rng.hpp"

namespace waveseg {

namespace fs = std::filesystem;
using nlohmann::json;

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "?";
}

const char* chroma_name(ChromaMode m) {
    switch (m) {
        case ChromaMode::achromatic: return "achromatic";
        case ChromaMode::matched: return "matched";
        case ChromaMode::opposed: return "opposed";
    }
    return "?";
}

ChromaMode chroma_from_string(const std::string& s) {
    if (s == "achromatic") return ChromaMode::achromatic;
    if (s == "matched") return ChromaMode::matched;
    if (s == "opposed") return ChromaMode::opposed;
    throw std::invalid_argument("unknown chroma mode: " + s);
}

void SynthConfig::validate() const {
    if (count < 1) throw std::invalid_argument("synth: count must be >= 1");
    if (size < 32 || size % 32 != 0)
        throw std::invalid_argument("synth: size must be a positive multiple of 32");
    if (!(luma_delta > 0.0 && luma_delta < 0.5))
        throw std::invalid_argument("synth: luma_delta must be in (0, 0.5)");
    if (noise_sigma < 0.0 || illumination_gradient < 0.0)
        throw std::invalid_argument("synth: noise/illumination must be non-negative");
    double total = 0.0;
    for (double r : split_ratios) {
        if (r < 0.0) throw std::invalid_argument("synth: negative split ratio");
        total += r;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw std::invalid_argument("synth: split ratios must sum to 1");
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(i);
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic generation
// ---------------------------------------------------------------------------

namespace {

struct Ellipse {
    double cx, cy, a, b, phi;
};

BinaryMask rasterize(const std::vector<Ellipse>& es, int size) {
    BinaryMask m(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const double px = x + 0.5, py = y + 0.5;
            for (const Ellipse& e : es) {
                const double dx = px - e.cx, dy = py - e.cy;
                const double cs = std::cos(e.phi), sn = std::sin(e.phi);
                const double u = (dx * cs + dy * sn) / e.a;
                const double v = (-dx * sn + dy * cs) / e.b;
                if (u * u + v * v <= 1.0) {
                    m.at(y, x) = 1;
                    break;
                }
            }
        }
    }
    return m;
}

// Draw order is part of the corpus format; every attempt consumes a fixed
// prefix of the stream plus its own blob draws.
BinaryMask draw_blob(SplitMix64& rng, int size) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        const int n_ell = 2 + static_cast<int>(rng.next_below(5));
        const double cx0 = rng.next_range(0.30, 0.70) * size;
        const double cy0 = rng.next_range(0.30, 0.70) * size;
        std::vector<Ellipse> es;
        for (int e = 0; e < n_ell; ++e) {
            Ellipse el;
            el.cx = cx0 + rng.next_range(-0.12, 0.12) * size;
            el.cy = cy0 + rng.next_range(-0.12, 0.12) * size;
            el.a = rng.next_range(0.06, 0.22) * size;
            el.b = rng.next_range(0.06, 0.22) * size;
            el.phi = rng.next_range(0.0, M_PI);
            es.push_back(el);
        }
        BinaryMask m = rasterize(es, size);
        const double frac = static_cast<double>(m.count_ones()) /
                            static_cast<double>(m.size());
        if (frac >= 0.04 && frac <= 0.30) return m;
    }
    throw std::runtime_error("synth: blob resampling failed to converge");
}

double quantize8(double v) {
    const double c = std::min(1.0, std::max(0.0, v));
    return std::round(c * 255.0) / 255.0;
}

}  // namespace

Dataset synth_generate(const SynthConfig& cfg) {
    cfg.validate();
    const int size = cfg.size;
    Dataset ds;
    ds.samples.reserve(static_cast<std::size_t>(cfg.count));

    for (int idx = 0; idx < cfg.count; ++idx) {
        SplitMix64 rng(cfg.seed + static_cast<std::uint64_t>(idx));

        double base[3];
        for (double& b : base) b = rng.next_range(0.30, 0.60);
        if (cfg.chroma_mode == ChromaMode::achromatic) base[1] = base[2] = base[0];
        const double theta = rng.next_range(0.0, 2.0 * M_PI);
        const double sign = rng.next_double() < 0.5 ? 1.0 : -1.0;
        const BinaryMask mask = draw_blob(rng, size);

        // Per-channel polyp offsets. Opposed mode keeps the luma gap intact
        // while pushing R up and B down in a ratio that cancels in luma and
        // removes the blue channel's edge entirely.
        double shift[3] = {cfg.luma_delta, cfg.luma_delta, cfg.luma_delta};
        if (cfg.chroma_mode == ChromaMode::opposed) {
            const double chroma = cfg.luma_delta * (0.114 / 0.299);
            shift[0] = cfg.luma_delta + chroma;
            shift[2] = cfg.luma_delta - chroma * (0.299 / 0.114);
        }

        const int nch = cfg.chroma_mode == ChromaMode::achromatic ? 1 : 3;
        std::vector<double> noise(static_cast<std::size_t>(size) * size * nch);
        for (double& v : noise) v = rng.next_normal() * cfg.noise_sigma;

        RgbImage img(size, size);
        const double gx = std::cos(theta), gy = std::sin(theta);
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * size + x;
                const double shading =
                    cfg.illumination_gradient * (((x + 0.5) / size - 0.5) * gx +
                                                 ((y + 0.5) / size - 0.5) * gy);
                const bool in = mask.at(y, x) != 0;
                for (int ch = 0; ch < 3; ++ch) {
                    const double nz = noise[i * nch + (nch == 1 ? 0 : ch)];
                    const double v =
                        base[ch] + shading + (in ? sign * shift[ch] : 0.0) + nz;
                    img.channels[static_cast<std::size_t>(ch)].v[i] = quantize8(v);
                }
            }
        }

        char id[16];
        std::snprintf(id, sizeof(id), "s%05d", idx);
        ds.samples.push_back({std::move(img), mask, id});
    }

    // Seeded-shuffle split with floored val/test counts, train = remainder.
    std::vector<std::size_t> order(ds.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 split_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    split_rng.shuffle(order);
    const std::size_t n = order.size();
    const std::size_t n_val = static_cast<std::size_t>(cfg.split_ratios[1] * n);
    const std::size_t n_test = static_cast<std::size_t>(cfg.split_ratios[2] * n);
    ds.split.assign(n, Split::train);
    for (std::size_t i = 0; i < n_val; ++i) ds.split[order[i]] = Split::val;
    for (std::size_t i = n_val; i < n_val + n_test; ++i) ds.split[order[i]] = Split::test;
    return ds;
}

// ---------------------------------------------------------------------------
// 8-bit conversions and hashing
// ---------------------------------------------------------------------------

std::vector<std::uint8_t> image_to_bytes(const RgbImage& img) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(img.height) * img.width * 3);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
            for (int ch = 0; ch < 3; ++ch)
                out[i * 3 + static_cast<std::size_t>(ch)] = static_cast<std::uint8_t>(
                    std::lround(img.channels[static_cast<std::size_t>(ch)].v[i] * 255.0));
        }
    return out;
}

std::vector<std::uint8_t> mask_to_bytes(const BinaryMask& m) {
    std::vector<std::uint8_t> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m.v[i] ? 255 : 0;
    return out;
}

RgbImage image_from_bytes(int h, int w, const std::uint8_t* rgb) {
    RgbImage img(h, w);
    for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i)
        for (int ch = 0; ch < 3; ++ch)
            img.channels[static_cast<std::size_t>(ch)].v[i] =
                rgb[i * 3 + static_cast<std::size_t>(ch)] / 255.0;
    return img;
}

BinaryMask mask_from_bytes(int h, int w, const std::uint8_t* gray) {
    BinaryMask m(h, w);
    for (std::size_t i = 0; i < m.size(); ++i) m.v[i] = gray[i] >= 128 ? 1 : 0;
    return m;
}

std::string sha256_hex(const std::uint8_t* data, std::size_t n) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data, n, md, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xf]);
    }
    return out;
}

std::string sample_sha256(const Sample& s) {
    std::vector<std::uint8_t> buf;
    const auto img = image_to_bytes(s.image);
    const auto msk = mask_to_bytes(s.mask);
    buf.reserve(s.id.size() + 8 + img.size() + msk.size());
    buf.insert(buf.end(), s.id.begin(), s.id.end());
    for (int v : {s.image.height, s.image.width})
        for (int b = 0; b < 4; ++b) buf.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xff));
    buf.insert(buf.end(), img.begin(), img.end());
    buf.insert(buf.end(), msk.begin(), msk.end());
    return sha256_hex(buf.data(), buf.size());
}

std::string corpus_sha256(const Dataset& ds) {
    std::string all;
    for (const Sample& s : ds.samples) all += sample_sha256(s);
    return sha256_hex(reinterpret_cast<const std::uint8_t*>(all.data()), all.size());
}

// ---------------------------------------------------------------------------
// Storage
// ---------------------------------------------------------------------------

void save_dataset(const Dataset& ds, const SynthConfig& cfg, const std::string& dir) {
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "masks");
    json samples = json::array();
    for (const Sample& s : ds.samples) {
        Png8 img{s.image.width, s.image.height, 3, image_to_bytes(s.image)};
        write_png((fs::path(dir) / "images" / (s.id + ".png")).string(), img);
        Png8 msk{s.mask.width, s.mask.height, 1, mask_to_bytes(s.mask)};
        write_png((fs::path(dir) / "masks" / (s.id + ".png")).string(), msk);
        samples.push_back({{"id", s.id}, {"sha256", sample_sha256(s)}});
    }
    const json manifest = {
        {"config",
         {{"seed", cfg.seed},
          {"count", cfg.count},
          {"size", cfg.size},
          {"luma_delta", cfg.luma_delta},
          {"chroma_mode", chroma_name(cfg.chroma_mode)},
          {"illumination_gradient", cfg.illumination_gradient},
          {"noise_sigma", cfg.noise_sigma},
          {"split_ratios", cfg.split_ratios}}},
        {"samples", samples},
        {"corpus_sha256", corpus_sha256(ds)}};
    std::ofstream f(fs::path(dir) / "manifest.json", std::ios::binary);
    if (!f) throw std::runtime_error("cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir, const LoadSpec& spec, LoadReport* report) {
    const fs::path images = fs::path(dir) / "images";
    const fs::path masks = fs::path(dir) / "masks";
    if (!fs::is_directory(images))
        throw std::runtime_error("no images directory under " + dir);
    if (!fs::is_directory(masks))
        throw std::runtime_error("no masks directory under " + dir);

    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(images))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            stems.push_back(entry.path().stem().string());
    std::sort(stems.begin(), stems.end());
    if (stems.empty()) throw std::runtime_error("no samples found in " + dir);

    LoadReport local;
    Dataset ds;
    for (const std::string& stem : stems) {
        const fs::path ipath = images / (stem + ".png");
        const fs::path mpath = masks / (stem + ".png");
        if (!fs::exists(mpath))
            throw std::runtime_error("missing mask for image '" + stem + "' (expected " +
                                     mpath.string() + ")");
        const Png8 ip = read_png(ipath.string());
        const Png8 mp = read_png(mpath.string());
        if (ip.channels != 3)
            throw std::runtime_error("image '" + stem + "' is not RGB");
        if (mp.channels != 1)
            throw std::runtime_error("mask '" + stem + "' is not grayscale");
        if (ip.width != mp.width || ip.height != mp.height)
            throw std::runtime_error("image/mask dimensions differ for '" + stem + "'");
        Sample s{image_from_bytes(ip.height, ip.width, ip.pixels.data()),
                 mask_from_bytes(mp.height, mp.width, mp.pixels.data()), stem};
        if (s.mask.degenerate()) {
            ++local.excluded_degenerate;
            local.warnings.push_back("excluded '" + stem + "': degenerate mask");
            continue;
        }
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty())
        throw std::runtime_error("no usable samples found in " + dir);
    local.loaded = ds.samples.size();

    std::vector<std::size_t> order(ds.samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    SplitMix64 rng(spec.split_seed ^ 0x9e3779b97f4a7c15ull);
    rng.shuffle(order);
    const std::size_t n = order.size();
    const std::size_t n_val = static_cast<std::size_t>(spec.split_ratios[1] * n);
    const std::size_t n_test = static_cast<std::size_t>(spec.split_ratios[2] * n);
    ds.split.assign(n, Split::train);
    for (std::size_t i = 0; i < n_val; ++i) ds.split[order[i]] = Split::val;
    for (std::size_t i = n_val; i < n_val + n_test; ++i) ds.split[order[i]] = Split::test;

    if (report) *report = std::move(local);
    return ds;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("metric: mask dimensions differ");
}

}  // namespace

double dice(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_dims(pred, gt);
    std::size_t inter = 0, p = 0, g = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred.v[i] != 0, b = gt.v[i] != 0;
        inter += a && b;
        p += a;
        g += b;
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

double iou(const BinaryMask& pred, const BinaryMask& gt) {
    require_same_dims(pred, gt);
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool a = pred.v[i] != 0, b = gt.v[i] != 0;
        inter += a && b;
        uni += a || b;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

MetricsSummary summarize_runs(const std::vector<RunMetrics>& runs, Split split) {
    if (runs.empty()) throw std::invalid_argument("summarize_runs: no runs");
    MetricsSummary s;
    s.split = split_name(split);
    s.runs = runs.size();
    s.per_run = runs;
    for (const RunMetrics& r : runs) {
        s.dice_mean += r.dice_mean;
        s.iou_mean += r.iou_mean;
    }
    s.dice_mean /= static_cast<double>(runs.size());
    s.iou_mean /= static_cast<double>(runs.size());
    if (runs.size() > 1) {
        double vd = 0.0, vi = 0.0;
        for (const RunMetrics& r : runs) {
            vd += (r.dice_mean - s.dice_mean) * (r.dice_mean - s.dice_mean);
            vi += (r.iou_mean - s.iou_mean) * (r.iou_mean - s.iou_mean);
        }
        s.dice_std = std::sqrt(vd / static_cast<double>(runs.size() - 1));
        s.iou_std = std::sqrt(vi / static_cast<double>(runs.size() - 1));
    }
    return s;
}

}  // namespace waveseg
