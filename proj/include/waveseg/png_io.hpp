// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace waveseg {

/// 8-bit image, interleaved row-major; channels is 1 (gray) or 3 (RGB).
struct Png8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

Png8 read_png(const std::string& path);
void write_png(const std::string& path, const Png8& img);

}  // namespace waveseg
