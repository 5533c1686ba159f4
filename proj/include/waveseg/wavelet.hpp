// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0
//
// Orthonormal Haar 2D DWT with exact inversion. Sub-band naming: the first
// letter is the filter applied along the horizontal axis (columns), the second
// the filter along the vertical axis (rows); L = low-pass, H = high-pass.
// No boundary handling: callers guarantee even dimensions.

#pragma once

#include <stdexcept>
#include <vector>

namespace waveseg {

/// Dense row-major matrix of doubles (row index = vertical/y position).
struct Matrix2D {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix2D() = default;
    Matrix2D(int r, int c, double fill = 0.0)
        : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {
        if (r <= 0 || c <= 0) throw std::invalid_argument("Matrix2D: non-positive dims");
    }
    Matrix2D(int r, int c, std::vector<double> values)
        : rows(r), cols(c), v(std::move(values)) {
        if (r <= 0 || c <= 0 || v.size() != static_cast<std::size_t>(r) * c)
            throw std::invalid_argument("Matrix2D: size mismatch");
    }

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    std::size_t size() const { return v.size(); }
};

/// One decomposition level: four (H/2 x W/2) coefficient matrices.
struct SubbandSet {
    Matrix2D ll, hl, lh, hh;
};

/// Detail bands of one pyramid level.
struct DetailBands {
    Matrix2D hl, lh, hh;
};

/// Multi-level decomposition; details ordered finest -> coarsest.
struct WaveletPyramid {
    int levels = 0;
    std::vector<DetailBands> details;
    Matrix2D approx;
};

/// Single-level analysis. Throws std::invalid_argument on odd dimensions.
SubbandSet dwt2(const Matrix2D& input);

/// Exact inverse of dwt2. Throws on mismatched band dimensions.
Matrix2D idwt2(const SubbandSet& bands);

/// Recursive analysis of the LL band, `levels` >= 1 times. Input dimensions
/// must be divisible by 2^levels.
WaveletPyramid wavedec2(const Matrix2D& input, int levels);

/// Reconstruction by repeated idwt2, coarsest level first.
Matrix2D waverec2(const WaveletPyramid& pyr);

}  // namespace waveseg
