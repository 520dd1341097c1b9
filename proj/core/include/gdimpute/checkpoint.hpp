// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "gdimpute/diffusion.hpp"

namespace gdimpute {

inline constexpr int kCheckpointVersion = 1;

/// Binary layout: the 8-byte magic "GDIMPCK1", a little-endian uint32 format
/// version, a little-endian uint64 header length, the JSON header (config,
/// schema, graph, tensor directory) and then every tensor as row-major
/// little-endian float32 in directory order.
std::string serialize_checkpoint(const ImputerModel& model);
ImputerModel deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const ImputerModel& model, const std::filesystem::path& path);
ImputerModel load_checkpoint(const std::filesystem::path& path);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);
/// Short identifier derived from the checkpoint digest.
std::string model_version(const ImputerModel& model);

}  // namespace gdimpute
