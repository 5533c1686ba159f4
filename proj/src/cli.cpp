// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "waveseg/contrast.hpp"
#include "waveseg/datagen.hpp"
#include "waveseg/kernels.hpp"
#include "waveseg/png_io.hpp"
#include "waveseg/selftest.hpp"
#include "waveseg/train.hpp"

namespace waveseg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Shared synthetic-corpus options; used wherever --data can be replaced by an
// in-memory generated corpus.
struct SynthOpts {
    SynthConfig cfg;
    bool requested = false;

    void attach(CLI::App* cmd, const std::string& ratio_default = "0.8,0.1,0.1") {
        cmd->add_flag("--synth", requested, "generate a synthetic corpus instead of reading --data");
        cmd->add_option("--synth-seed", cfg.seed, "corpus seed");
        cmd->add_option("--count", cfg.count, "number of synthetic samples");
        cmd->add_option("--size", cfg.size, "square sample size (multiple of 32)");
        cmd->add_option("--luma-delta", cfg.luma_delta, "polyp/background luminance gap");
        cmd->add_option_function<std::string>(
               "--chroma-mode",
               [this](const std::string& v) { cfg.chroma_mode = chroma_from_string(v); },
               "achromatic | matched | opposed")
            ->default_str("matched");
        cmd->add_option("--noise-sigma", cfg.noise_sigma, "per-channel Gaussian noise sigma");
        cmd->add_option("--illumination", cfg.illumination_gradient,
                        "linear shading amplitude");
        cmd->add_option_function<std::string>(
               "--split-ratios",
               [this](const std::string& v) { cfg.split_ratios = parse_ratios(v); },
               "train,val,test ratios")
            ->default_str(ratio_default);
    }

    static std::array<double, 3> parse_ratios(const std::string& v) {
        std::array<double, 3> out{};
        if (std::sscanf(v.c_str(), "%lf,%lf,%lf", &out[0], &out[1], &out[2]) != 3)
            throw CLI::ValidationError("--split-ratios", "expected three comma-separated numbers");
        return out;
    }

    json echo() const {
        return json{{"seed", cfg.seed},
                    {"count", cfg.count},
                    {"size", cfg.size},
                    {"luma_delta", cfg.luma_delta},
                    {"chroma_mode", chroma_name(cfg.chroma_mode)},
                    {"noise_sigma", cfg.noise_sigma},
                    {"illumination_gradient", cfg.illumination_gradient},
                    {"split_ratios", cfg.split_ratios}};
    }
};

struct DataOpts {
    std::string dir;
    SynthOpts synth;
    std::array<double, 3> load_ratios = {0.8, 0.1, 0.1};
    std::uint64_t split_seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--data", dir, "dataset directory (images/ + masks/)");
        cmd->add_option("--split-seed", split_seed, "seed for the load-time split shuffle");
        synth.attach(cmd);
    }

    Dataset load(json* echo) const {
        if (synth.requested && !dir.empty())
            throw CLI::ValidationError("--data", "give either --data or --synth, not both");
        if (synth.requested) {
            if (echo) *echo = json{{"source", "synth"}, {"synth", synth.echo()}};
            return synth_generate(synth.cfg);
        }
        if (dir.empty())
            throw CLI::ValidationError("--data", "either --data or --synth is required");
        LoadSpec spec;
        spec.split_ratios = synth.cfg.split_ratios;
        spec.split_seed = split_seed;
        LoadReport rep;
        Dataset ds = load_dataset(dir, spec, &rep);
        for (const std::string& w : rep.warnings) std::cerr << "warning: " << w << "\n";
        if (echo)
            *echo = json{{"source", "directory"},
                         {"dir", dir},
                         {"split_ratios", spec.split_ratios},
                         {"split_seed", split_seed},
                         {"loaded", rep.loaded},
                         {"excluded_degenerate", rep.excluded_degenerate}};
        return ds;
    }
};

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << text;
}

json model_echo(const ModelConfig& m) {
    return json{{"widths", m.widths},   {"scale", m.scale},
                {"window", m.window},   {"heads", m.heads},
                {"gn_groups", m.gn_groups}, {"mode", ablation_name(m.mode)}};
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    DataOpts data;
    int levels = 3;
    double epsilon = 1e-8;
    std::string out = "contrast.csv";
};

int cmd_analyze(const AnalyzeArgs& a) {
    json data_echo;
    const Dataset ds = a.data.load(&data_echo);
    std::vector<CorpusSample> corpus;
    corpus.reserve(ds.samples.size());
    for (const Sample& s : ds.samples) corpus.push_back({&s.image, &s.mask, s.id});

    const ContrastReport rep = analyze_corpus(corpus, a.levels, a.epsilon);
    write_contrast_csv(rep, a.out);

    const Verdict v = compare_gray_vs_rgb(rep);
    for (const BandVerdict& b : v.bands) {
        const char* rel = b.relation > 0 ? ">" : (b.relation < 0 ? "<" : "==");
        std::printf("level %d %s: GRAY %.9g %s RGB_MEAN %.9g\n", b.level,
                    band_name(b.band), b.gray_ci, rel, b.rgb_mean_ci);
    }
    std::printf("verdict: %s\n", v.summary(a.levels).c_str());

    json meta = {{"command", "analyze"},
                 {"data", data_echo},
                 {"levels", a.levels},
                 {"epsilon", a.epsilon},
                 {"out", a.out},
                 {"verdict", v.summary(a.levels)},
                 {"gray_higher", v.gray_higher},
                 {"detail_bands", v.total}};
    write_text(a.out + ".meta.json", meta.dump(2) + "\n");
    return 0;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
    SynthOpts synth;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    const Dataset ds = synth_generate(a.synth.cfg);
    save_dataset(ds, a.synth.cfg, a.out);
    std::printf("wrote %zu samples to %s (corpus sha256 %s)\n", ds.samples.size(),
                a.out.c_str(), corpus_sha256(ds).c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainArgs {
    DataOpts data;
    TrainConfig cfg;
    std::string ablate = "full";
    std::string checkpoint = "model.ckpt";
    std::string history = "history.json";
};

int cmd_train(const TrainArgs& a) {
    json data_echo;
    const Dataset ds = a.data.load(&data_echo);
    TrainConfig cfg = a.cfg;
    cfg.mode = ablation_from_string(a.ablate);

    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = train_model(ds, cfg);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    r.model.save_checkpoint(a.checkpoint);

    json epochs = json::array();
    for (const EpochStats& e : r.history) {
        json je = {{"epoch", e.epoch}, {"train_loss", e.train_loss}};
        if (e.has_val) je["val_dice"] = e.val_dice;
        epochs.push_back(je);
    }
    const json hist = {{"command", "train"},
                       {"config",
                        {{"seed", cfg.seed},
                         {"epochs", cfg.epochs},
                         {"max_steps", cfg.max_steps},
                         {"lr", cfg.lr},
                         {"batch", cfg.batch},
                         {"mode", ablation_name(cfg.mode)},
                         {"model", model_echo(cfg.model)},
                         {"data", data_echo}}},
                       {"param_count", r.param_count},
                       {"steps", r.steps},
                       {"best_epoch", r.best_epoch},
                       {"epochs", epochs},
                       {"checkpoint", a.checkpoint}};
    write_text(a.history, hist.dump(2) + "\n");

    std::fprintf(stderr, "trained %ld steps in %.1fs\n", r.steps, secs);
    std::printf("checkpoint: %s\nhistory: %s\nmode: %s\nparams: %zu\n",
                a.checkpoint.c_str(), a.history.c_str(), ablation_name(cfg.mode),
                r.param_count);
    if (!r.history.empty())
        std::printf("final train loss: %.9g\n", r.history.back().train_loss);
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    DataOpts data;
    std::vector<std::string> checkpoints;
    std::vector<std::uint64_t> seeds;  // labels per run
    std::string split = "test";
    double threshold = 0.5;
    std::string out = "metrics.json";
};

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw CLI::ValidationError("--split", "expected train, val or test");
}

int cmd_eval(const EvalArgs& a) {
    json data_echo;
    const Dataset ds = a.data.load(&data_echo);
    const Split split = split_from_string(a.split);

    std::vector<RunMetrics> runs;
    for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
        const SegModel m = SegModel::load_checkpoint(a.checkpoints[i]);
        RunMetrics r = evaluate_model(m, ds, split, a.threshold);
        r.seed = i < a.seeds.size() ? a.seeds[i] : m.seed();
        runs.push_back(r);
    }
    const MetricsSummary sum = summarize_runs(runs, split);

    json per_run = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i)
        per_run.push_back({{"seed", runs[i].seed},
                           {"checkpoint", a.checkpoints[i]},
                           {"dice", runs[i].dice_mean},
                           {"iou", runs[i].iou_mean},
                           {"n_samples", runs[i].n_samples}});
    const json out = {{"command", "eval"},
                      {"config",
                       {{"split", sum.split},
                        {"threshold", a.threshold},
                        {"data", data_echo}}},
                      {"split", sum.split},
                      {"runs", sum.runs},
                      {"dice_mean", sum.dice_mean},
                      {"dice_std", sum.dice_std},
                      {"iou_mean", sum.iou_mean},
                      {"iou_std", sum.iou_std},
                      {"per_run", per_run}};
    write_text(a.out, out.dump(2) + "\n");
    std::printf("%s: dice %.6f +/- %.6f, iou %.6f +/- %.6f over %zu run(s)\n",
                sum.split.c_str(), sum.dice_mean, sum.dice_std, sum.iou_mean,
                sum.iou_std, sum.runs);
    return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferArgs {
    std::string checkpoint;
    std::string image;
    std::string out = "mask.png";
    double threshold = 0.5;
};

int cmd_infer(const InferArgs& a) {
    const SegModel model = SegModel::load_checkpoint(a.checkpoint);
    const Png8 png = read_png(a.image);
    if (png.channels != 3) throw std::runtime_error("infer: image must be RGB: " + a.image);
    const RgbImage img = image_from_bytes(png.height, png.width, png.pixels.data());

    // Pad bottom/right to a multiple of 32 with edge replication, run, crop.
    const int ph = (img.height + 31) / 32 * 32;
    const int pw = (img.width + 31) / 32 * 32;
    RgbImage padded(ph, pw);
    for (int ch = 0; ch < 3; ++ch)
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x)
                padded.channels[static_cast<std::size_t>(ch)].at(y, x) =
                    img.channels[static_cast<std::size_t>(ch)].at(
                        std::min(y, img.height - 1), std::min(x, img.width - 1));

    const BinaryMask pred_padded = predict_mask(model, padded, a.threshold);
    BinaryMask pred(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) pred.at(y, x) = pred_padded.at(y, x);

    write_png(a.out, Png8{pred.width, pred.height, 1, mask_to_bytes(pred)});
    const double frac =
        static_cast<double>(pred.count_ones()) / static_cast<double>(pred.size());
    std::printf("polyp fraction: %.6f\n", frac);

    const json meta = {{"command", "infer"},
                       {"checkpoint", a.checkpoint},
                       {"image", a.image},
                       {"threshold", a.threshold},
                       {"original_size", {img.height, img.width}},
                       {"padded_size", {ph, pw}},
                       {"polyp_fraction", frac},
                       {"out", a.out}};
    write_text(a.out + ".meta.json", meta.dump(2) + "\n");
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"wavelet-domain contrast analysis and dual-encoder polyp segmentation"};
    app.set_config("--config", "", "flat key=value config file; command options use dotted keys");
    app.require_subcommand(1);

    std::string kernels = "auto";
    app.add_option("--kernels", kernels, "kernel backend: auto | scalar | avx2")
        ->check(CLI::IsMember({"auto", "scalar", "avx2"}));

    AnalyzeArgs an;
    CLI::App* analyze = app.add_subcommand("analyze", "per-sub-band contrast-index report");
    an.data.attach(analyze);
    analyze->add_option("--levels", an.levels, "wavelet decomposition levels");
    analyze->add_option("--epsilon", an.epsilon, "CI stabilizer");
    analyze->add_option("--out", an.out, "output CSV path");

    SynthArgs sy;
    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic corpus on disk");
    sy.synth.attach(synth);
    synth->add_option("--out", sy.out, "output directory")->required();

    TrainArgs tr;
    CLI::App* train = app.add_subcommand("train", "train the segmentation model");
    tr.data.attach(train);
    train->add_option("--seed", tr.cfg.seed, "training seed");
    train->add_option("--epochs", tr.cfg.epochs, "number of epochs");
    train->add_option("--max-steps", tr.cfg.max_steps, "stop after this many optimizer steps");
    train->add_option("--lr", tr.cfg.lr, "Adam learning rate");
    train->add_option("--batch", tr.cfg.batch, "batch size");
    train->add_option("--ablate", tr.ablate, "full | rgb_only | add_fusion | no_cdf");
    train->add_option("--checkpoint", tr.checkpoint, "checkpoint output path");
    train->add_option("--history", tr.history, "history JSON output path");

    EvalArgs ev;
    CLI::App* eval = app.add_subcommand("eval", "evaluate checkpoints (Dice/IoU)");
    ev.data.attach(eval);
    eval->add_option("--checkpoint", ev.checkpoints, "checkpoint path (repeat per run)")
        ->required();
    eval->add_option("--seeds", ev.seeds, "run labels (training seeds)");
    eval->add_option("--split", ev.split, "train | val | test");
    eval->add_option("--threshold", ev.threshold, "probability threshold");
    eval->add_option("--out", ev.out, "metrics JSON output path");

    InferArgs in;
    CLI::App* infer = app.add_subcommand("infer", "segment one image");
    infer->add_option("--checkpoint", in.checkpoint, "checkpoint path")->required();
    infer->add_option("--image", in.image, "input RGB PNG")->required();
    infer->add_option("--out", in.out, "output mask PNG");
    infer->add_option("--threshold", in.threshold, "probability threshold");

    CLI::App* selftest = app.add_subcommand("selftest", "run the property suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (kernels != "auto")
            kern::set_backend(kernels == "scalar" ? kern::Backend::scalar
                                                  : kern::Backend::avx2);
        if (*analyze) return cmd_analyze(an);
        if (*synth) return cmd_synth(sy);
        if (*train) return cmd_train(tr);
        if (*eval) return cmd_eval(ev);
        if (*infer) return cmd_infer(in);
        if (*selftest) {
            const auto t0 = std::chrono::steady_clock::now();
            const bool ok = run_selftest(std::cout);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::fprintf(stderr, "selftest finished in %.1fs\n", secs);
            return ok ? 0 : 1;
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        // Runtime failures that indicate bad inputs/paths are usage errors;
        // numeric failures (divergence) are property failures.
        const std::string msg = e.what();
        std::cerr << "error: " << msg << "\n";
        if (msg.find("diverged") != std::string::npos ||
            msg.find("non-finite") != std::string::npos)
            return 1;
        return 2;
    }
    return 2;
}

}  // namespace waveseg
