// Copyright (c) 2026 The mmssl Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver: synth, pretrain, evaluate, report.
// Exit codes: 0 success, 1 usage error, 2 data or validation error.

#pragma once

#include <iosfwd>

namespace mmssl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mmssl
