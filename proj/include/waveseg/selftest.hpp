// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>

namespace waveseg {

/// Runs the property suite (wavelet reconstruction/energy, CI oracle, kernel
/// backend equivalence, gradient checks, identity-at-init, metric identities)
/// and prints one PASS/FAIL line per property with the measured error and its
/// tolerance. Returns true iff everything passed.
bool run_selftest(std::ostream& os);

}  // namespace waveseg
