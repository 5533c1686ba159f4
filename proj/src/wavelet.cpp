// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/wavelet.hpp"

#include <string>

#include "waveseg/kernels.hpp"

namespace waveseg {

SubbandSet dwt2(const Matrix2D& input) {
    if (input.rows < 2 || input.cols < 2 || input.rows % 2 != 0 || input.cols % 2 != 0)
        throw std::invalid_argument("dwt2: dimensions must be even and >= 2, got " +
                                    std::to_string(input.rows) + "x" +
                                    std::to_string(input.cols));
    const int hr = input.rows / 2, hc = input.cols / 2;
    SubbandSet out{Matrix2D(hr, hc), Matrix2D(hr, hc), Matrix2D(hr, hc), Matrix2D(hr, hc)};
    for (int r = 0; r < hr; ++r)
        kern::haar_block_fwd(input.row(2 * r), input.row(2 * r + 1),
                             static_cast<std::size_t>(hc), out.ll.row(r),
                             out.hl.row(r), out.lh.row(r), out.hh.row(r));
    return out;
}

Matrix2D idwt2(const SubbandSet& bands) {
    const Matrix2D& ll = bands.ll;
    auto same = [&](const Matrix2D& m) { return m.rows == ll.rows && m.cols == ll.cols; };
    if (!same(bands.hl) || !same(bands.lh) || !same(bands.hh))
        throw std::invalid_argument("idwt2: sub-band dimensions disagree");
    Matrix2D out(ll.rows * 2, ll.cols * 2);
    for (int r = 0; r < ll.rows; ++r)
        kern::haar_block_inv(ll.row(r), bands.hl.row(r), bands.lh.row(r),
                             bands.hh.row(r), static_cast<std::size_t>(ll.cols),
                             out.row(2 * r), out.row(2 * r + 1));
    return out;
}

WaveletPyramid wavedec2(const Matrix2D& input, int levels) {
    if (levels < 1) throw std::invalid_argument("wavedec2: levels must be >= 1");
    const int div = 1 << levels;
    if (input.rows % div != 0 || input.cols % div != 0 || input.rows < div ||
        input.cols < div)
        throw std::invalid_argument(
            "wavedec2: dimensions " + std::to_string(input.rows) + "x" +
            std::to_string(input.cols) + " not divisible by 2^" +
            std::to_string(levels));
    WaveletPyramid pyr;
    pyr.levels = levels;
    Matrix2D cur = input;
    for (int l = 0; l < levels; ++l) {
        SubbandSet s = dwt2(cur);
        pyr.details.push_back({std::move(s.hl), std::move(s.lh), std::move(s.hh)});
        cur = std::move(s.ll);
    }
    pyr.approx = std::move(cur);
    return pyr;
}

Matrix2D waverec2(const WaveletPyramid& pyr) {
    Matrix2D cur = pyr.approx;
    for (int l = pyr.levels - 1; l >= 0; --l) {
        const DetailBands& d = pyr.details[static_cast<std::size_t>(l)];
        cur = idwt2({std::move(cur), d.hl, d.lh, d.hh});
    }
    return cur;
}

}  // namespace waveseg
