// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "gdimpute/error.hpp"

namespace gdimpute {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "GDIMPCK1";

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(std::string_view in, std::size_t at) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string serialize_checkpoint(const ImputerModel& model) {
  json tensors = json::array();
  std::uint64_t offset = 0;
  for (const auto& p : model.parameters().items()) {
    tensors.push_back({{"name", p->name},
                       {"rows", p->value.rows()},
                       {"cols", p->value.cols()},
                       {"trainable", p->trainable},
                       {"offset", offset}});
    offset += static_cast<std::uint64_t>(p->value.size()) * 4;
  }
  const json header{{"format", "gdimpute-checkpoint"},
                    {"version", kCheckpointVersion},
                    {"trained", model.trained()},
                    {"config", model.config().to_json()},
                    {"schema", model.schema().to_json()},
                    {"graph", model.graph().to_json()},
                    {"tensors", tensors}};
  const std::string text = header.dump();

  std::string out(kMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& p : model.parameters().items()) {
    const auto& v = p->value;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v.data()[i])));
    }
  }
  return out;
}

ImputerModel deserialize_checkpoint(std::string_view bytes) {
  const std::size_t prefix = kMagic.size() + 4 + 8;
  if (bytes.size() < prefix || bytes.substr(0, kMagic.size()) != kMagic) {
    throw ModelError("not a gdimpute checkpoint (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(bytes, kMagic.size());
  if (version != kCheckpointVersion) {
    throw ModelError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint64_t>(bytes, kMagic.size() + 4);
  if (header_len > bytes.size() - prefix) throw ModelError("truncated checkpoint header");
  json header;
  try {
    header = json::parse(bytes.substr(prefix, header_len));
  } catch (const json::exception& e) {
    throw ModelError(std::string("corrupt checkpoint header: ") + e.what());
  }
  if (header.value("version", -1) != kCheckpointVersion) throw ModelError("checkpoint header version mismatch");

  auto schema = std::make_shared<const FeatureSchema>(FeatureSchema::from_json(header.at("schema")));
  auto graph = AssemblyGraph::from_json(header.at("graph"), *schema);
  auto config = ImputerConfig::from_json(header.at("config"));
  auto model = ImputerModel::create(schema, std::move(graph), config, 0);

  const std::string_view data = bytes.substr(prefix + header_len);
  std::set<std::string> seen;
  for (const auto& t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    auto* p = model.parameters().find(name);
    if (p == nullptr) throw ModelError("checkpoint tensor '" + name + "' is unknown to this model");
    const auto rows = t.at("rows").get<Eigen::Index>();
    const auto cols = t.at("cols").get<Eigen::Index>();
    if (rows != p->value.rows() || cols != p->value.cols()) {
      throw ModelError("checkpoint tensor '" + name + "' has shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", expected " + std::to_string(p->value.rows()) + "x" +
                       std::to_string(p->value.cols()));
    }
    const auto offset = t.at("offset").get<std::uint64_t>();
    const auto count = static_cast<std::uint64_t>(rows * cols);
    if (offset + count * 4 > data.size()) throw ModelError("checkpoint tensor '" + name + "' is truncated");
    for (std::uint64_t i = 0; i < count; ++i) {
      p->value.data()[i] = static_cast<double>(
          std::bit_cast<float>(get_le<std::uint32_t>(data, static_cast<std::size_t>(offset + 4 * i))));
    }
    seen.insert(name);
  }
  if (seen.size() != model.parameters().size()) throw ModelError("checkpoint is missing model tensors");
  model.set_trained(header.value("trained", false));
  return model;
}

void save_checkpoint(const ImputerModel& model, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing checkpoint '" + path.string() + "'");
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ImputerModel load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(read_file(path)); }

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

std::string file_digest(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string model_version(const ImputerModel& model) {
  return "gdimpute-" + sha256_hex(serialize_checkpoint(model)).substr(0, 12);
}

}  // namespace gdimpute
