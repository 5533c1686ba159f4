// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/train.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

#include "waveseg/rng.hpp"

namespace waveseg {

Tensor images_to_tensor(const Dataset& ds, const std::vector<std::size_t>& idx) {
    if (idx.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
    const RgbImage& first = ds.samples[idx[0]].image;
    const int h = first.height, w = first.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> v(idx.size() * 3 * plane);
    for (std::size_t n = 0; n < idx.size(); ++n) {
        const RgbImage& img = ds.samples[idx[n]].image;
        if (img.height != h || img.width != w)
            throw std::invalid_argument("images_to_tensor: mixed sample sizes");
        for (int ch = 0; ch < 3; ++ch)
            std::memcpy(v.data() + (n * 3 + static_cast<std::size_t>(ch)) * plane,
                        img.channels[static_cast<std::size_t>(ch)].v.data(),
                        plane * sizeof(double));
    }
    return Tensor::from_values({static_cast<int>(idx.size()), 3, h, w}, std::move(v));
}

Tensor masks_to_tensor(const Dataset& ds, const std::vector<std::size_t>& idx) {
    const BinaryMask& first = ds.samples[idx[0]].mask;
    const int h = first.height, w = first.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<double> v(idx.size() * plane);
    for (std::size_t n = 0; n < idx.size(); ++n) {
        const BinaryMask& m = ds.samples[idx[n]].mask;
        for (std::size_t i = 0; i < plane; ++i) v[n * plane + i] = m.v[i] ? 1.0 : 0.0;
    }
    return Tensor::from_values({static_cast<int>(idx.size()), 1, h, w}, std::move(v));
}

BinaryMask predict_mask(const SegModel& m, const RgbImage& img, double threshold) {
    NoGradGuard ng;
    std::vector<double> v(static_cast<std::size_t>(img.height) * img.width * 3);
    const std::size_t plane = static_cast<std::size_t>(img.height) * img.width;
    for (int ch = 0; ch < 3; ++ch)
        std::memcpy(v.data() + static_cast<std::size_t>(ch) * plane,
                    img.channels[static_cast<std::size_t>(ch)].v.data(),
                    plane * sizeof(double));
    const Tensor logits =
        m.forward(Tensor::from_values({1, 3, img.height, img.width}, std::move(v)));
    const Tensor probs = sigmoid(logits);
    BinaryMask out(img.height, img.width);
    for (std::size_t i = 0; i < plane; ++i) out.v[i] = probs.data()[i] >= threshold ? 1 : 0;
    return out;
}

RunMetrics evaluate_model(const SegModel& m, const Dataset& ds, Split split,
                          double threshold, int batch) {
    const std::vector<std::size_t> idx = ds.indices_of(split);
    if (idx.empty())
        throw std::invalid_argument(std::string("evaluate: empty split ") + split_name(split));
    NoGradGuard ng;
    RunMetrics r;
    r.n_samples = idx.size();
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(batch)) {
        const std::size_t stop = std::min(idx.size(), start + static_cast<std::size_t>(batch));
        const std::vector<std::size_t> chunk(idx.begin() + static_cast<std::ptrdiff_t>(start),
                                             idx.begin() + static_cast<std::ptrdiff_t>(stop));
        const Tensor probs = sigmoid(m.forward(images_to_tensor(ds, chunk)));
        const int h = probs.dim(2), w = probs.dim(3);
        const std::size_t plane = static_cast<std::size_t>(h) * w;
        for (std::size_t n = 0; n < chunk.size(); ++n) {
            BinaryMask pred(h, w);
            const double* p = probs.data() + n * plane;
            for (std::size_t i = 0; i < plane; ++i) pred.v[i] = p[i] >= threshold ? 1 : 0;
            r.dice_mean += dice(pred, ds.samples[chunk[n]].mask);
            r.iou_mean += iou(pred, ds.samples[chunk[n]].mask);
        }
    }
    r.dice_mean /= static_cast<double>(idx.size());
    r.iou_mean /= static_cast<double>(idx.size());
    return r;
}

TrainResult train_model(const Dataset& ds, const TrainConfig& cfg) {
    const std::vector<std::size_t> train_idx = ds.indices_of(Split::train);
    if (train_idx.empty()) throw std::invalid_argument("train: empty train split");
    const bool has_val = ds.count_of(Split::val) > 0;
    if (cfg.batch < 1) throw std::invalid_argument("train: batch must be >= 1");

    ModelConfig mc = cfg.model;
    mc.mode = AblationMode::full;
    SegModel model = SegModel(mc, cfg.seed).ablate(cfg.mode);

    Adam opt(model.parameters(), cfg.lr);

    TrainResult result{model, {}, 0, 0, model.parameter_count()};
    double best_val = -1.0;
    std::vector<std::vector<double>> best_params;
    auto snapshot = [&]() {
        best_params.clear();
        for (const auto& [name, t] : model.named_parameters())
            best_params.push_back(t.values());
    };

    SplitMix64 epoch_seeds(cfg.seed ^ 0xa5a5a5a55a5a5a5aull);
    long step = 0;
    bool stopped = false;
    for (int epoch = 1; epoch <= cfg.epochs && !stopped; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        SplitMix64 shuffler(epoch_seeds.next_u64());
        shuffler.shuffle(order);

        double loss_sum = 0.0;
        std::size_t loss_n = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
            const std::vector<std::size_t> chunk(
                order.begin() + static_cast<std::ptrdiff_t>(start),
                order.begin() + static_cast<std::ptrdiff_t>(stop));
            double loss_val = 0.0;
            try {
                const Tensor images = images_to_tensor(ds, chunk);
                const Tensor targets = masks_to_tensor(ds, chunk);
                opt.zero_grad();
                Tensor loss = dice_bce_loss(model.forward(images), targets);
                loss_val = loss.item();
                loss.backward();
                opt.step();
            } catch (const std::runtime_error& e) {
                std::ostringstream msg;
                msg << "training diverged at epoch " << epoch << " step " << step + 1
                    << ": " << e.what();
                throw std::runtime_error(msg.str());
            }
            loss_sum += loss_val * static_cast<double>(chunk.size());
            loss_n += chunk.size();
            ++step;
            if (cfg.max_steps > 0 && step >= cfg.max_steps) {
                stopped = true;
                break;
            }
        }

        EpochStats es;
        es.epoch = epoch;
        es.train_loss = loss_sum / static_cast<double>(loss_n);
        es.has_val = has_val;
        if (has_val) {
            es.val_dice = evaluate_model(model, ds, Split::val).dice_mean;
            if (es.val_dice > best_val) {
                best_val = es.val_dice;
                result.best_epoch = epoch;
                snapshot();
            }
        }
        result.history.push_back(es);
    }
    result.steps = step;

    if (has_val && !best_params.empty()) {
        std::size_t i = 0;
        for (const auto& [name, t] : model.named_parameters()) {
            Tensor shared = t;  // same underlying node
            shared.values() = best_params[i++];
        }
    } else {
        result.best_epoch = result.history.empty() ? 0 : result.history.back().epoch;
    }
    result.model = model;
    return result;
}

}  // namespace waveseg
