// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gdimpute::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
/// Invalid configuration or missing input files.
inline constexpr int kExitConfig = 2;

/// Runs the command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gdimpute::cli
