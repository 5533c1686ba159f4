// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace waveseg {

/// Full command-line entry point (analyze / synth / train / eval / infer /
/// selftest). Exit codes: 0 success, 1 property or metric failure,
/// 2 usage/input error.
int run_cli(int argc, const char* const* argv);

}  // namespace waveseg
