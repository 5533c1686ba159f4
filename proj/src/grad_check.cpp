// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <sstream>

#include "waveseg/kernels.hpp"
#include "waveseg/ops.hpp"
#include "waveseg/rng.hpp"

namespace waveseg {

GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& fn,
                           std::vector<Tensor> inputs, double tol, std::uint64_t seed) {
    for (Tensor& in : inputs) {
        in.set_requires_grad(true);
        in.zero_grad();
    }

    // Scalarize with a fixed random functional so every output coordinate
    // participates.
    Tensor out = fn(inputs);
    SplitMix64 rng(seed);
    std::vector<double> w(out.numel());
    for (double& v : w) v = rng.next_range(-1.0, 1.0);
    Tensor s = reduce_dot(out, w);
    s.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (Tensor& in : inputs)
        analytic.push_back(in.has_grad() ? in.grad()
                                         : std::vector<double>(in.numel(), 0.0));

    auto eval = [&]() {
        NoGradGuard ng;
        Tensor o = fn(inputs);
        return kern::dot(o.data(), w.data(), w.size());
    };

    GradCheckReport rep;
    rep.pass = true;
    for (std::size_t ii = 0; ii < inputs.size(); ++ii) {
        Tensor& in = inputs[ii];
        for (std::size_t j = 0; j < in.numel(); ++j) {
            const double x0 = in.data()[j];
            const double h = 1e-4 * std::max(1.0, std::fabs(x0));
            in.data()[j] = x0 + h;
            const double fp = eval();
            in.data()[j] = x0 - h;
            const double fm = eval();
            in.data()[j] = x0;
            const double num = (fp - fm) / (2.0 * h);
            const double ana = analytic[ii][j];
            std::ostringstream loc;
            loc << "input " << ii << ", coord " << j;
            if (std::isnan(num) || std::isnan(ana)) {
                rep.pass = false;
                rep.max_rel_err = std::numeric_limits<double>::quiet_NaN();
                rep.worst = loc.str() + " (NaN)";
                return rep;
            }
            const double rel =
                std::fabs(num - ana) / std::max({std::fabs(num), std::fabs(ana), 1e-6});
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst = loc.str();
            }
        }
    }
    rep.pass = rep.max_rel_err <= tol;
    return rep;
}

}  // namespace waveseg
