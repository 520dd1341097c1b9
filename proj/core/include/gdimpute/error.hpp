// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <stdexcept>
#include <string>

namespace gdimpute {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent schema, graph or design.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Dataset contents or CSV structure problems.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration values or missing configured paths.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Model shape mismatches, untrained use, corrupt checkpoints.
class ModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace gdimpute
