// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "waveseg/wavelet.hpp"

namespace waveseg {

/// Three-plane RGB image with values in [0, 1].
struct RgbImage {
    int height = 0;
    int width = 0;
    std::array<Matrix2D, 3> channels;  // R, G, B

    RgbImage() = default;
    RgbImage(int h, int w)
        : height(h), width(w),
          channels{Matrix2D(h, w), Matrix2D(h, w), Matrix2D(h, w)} {}

    void validate() const {
        for (const Matrix2D& c : channels) {
            if (c.rows != height || c.cols != width)
                throw std::invalid_argument("RgbImage: plane dimensions disagree");
            for (double v : c.v)
                if (!(v >= 0.0 && v <= 1.0))
                    throw std::invalid_argument("RgbImage: value outside [0,1]");
        }
    }
};

/// Binary mask, 1 = polyp.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> v;

    BinaryMask() = default;
    BinaryMask(int h, int w, std::uint8_t fill = 0)
        : height(h), width(w), v(static_cast<std::size_t>(h) * w, fill) {
        if (h <= 0 || w <= 0) throw std::invalid_argument("BinaryMask: non-positive dims");
    }

    std::uint8_t& at(int r, int c) { return v[static_cast<std::size_t>(r) * width + c]; }
    std::uint8_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * width + c]; }
    std::size_t size() const { return v.size(); }

    std::size_t count_ones() const {
        std::size_t n = 0;
        for (std::uint8_t b : v) n += b != 0;
        return n;
    }
    bool degenerate() const {
        const std::size_t ones = count_ones();
        return ones == 0 || ones == size();
    }
};

}  // namespace waveseg
