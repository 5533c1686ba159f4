// Copyright 2026 The waveseg authors
// SPDX-License-Identifier: Apache-2.0

#include "waveseg/cli.hpp"

int main(int argc, char** argv) { return waveseg::run_cli(argc, argv); }
