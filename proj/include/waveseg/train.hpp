// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "waveseg/datagen.hpp"
#include "waveseg/segmodel.hpp"

namespace waveseg {

struct TrainConfig {
    std::uint64_t seed = 1;
    int epochs = 15;
    long max_steps = 0;  // 0 = run all epochs
    double lr = 1e-3;
    int batch = 8;
    AblationMode mode = AblationMode::full;
    ModelConfig model;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double val_dice = 0.0;
    bool has_val = false;
};

struct TrainResult {
    SegModel model;  // best-val parameters (final when there is no val split)
    std::vector<EpochStats> history;
    int best_epoch = 0;
    long steps = 0;
    std::size_t param_count = 0;
};

/// Seeded end-to-end training run. Ablated modes are derived from the full
/// model via ablate() so shared weights start identical across modes.
/// Divergence (non-finite loss) aborts with the offending epoch/step.
TrainResult train_model(const Dataset& ds, const TrainConfig& cfg);

/// Batched inference: sigmoid(logits) thresholded at `threshold`.
BinaryMask predict_mask(const SegModel& m, const RgbImage& img, double threshold = 0.5);

/// Mean Dice/IoU of a model over one dataset split.
RunMetrics evaluate_model(const SegModel& m, const Dataset& ds, Split split,
                          double threshold = 0.5, int batch = 8);

/// Packs [0,1] images into an N x 3 x H x W tensor.
Tensor images_to_tensor(const Dataset& ds, const std::vector<std::size_t>& idx);
Tensor masks_to_tensor(const Dataset& ds, const std::vector<std::size_t>& idx);

}  // namespace waveseg
