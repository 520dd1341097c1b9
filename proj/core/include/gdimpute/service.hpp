// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "gdimpute/diffusion.hpp"

namespace gdimpute {

struct HttpResponse {
  int status = 200;
  nlohmann::json body;
};

/// Request handlers for the completion API. Handlers are pure functions of
/// the loaded model and the request except for the seed generator used when
/// a request carries no seed, which is mutex protected.
class CompletionService {
 public:
  static constexpr int kMaxSamples = 1000;
  static constexpr int kDefaultSamples = 10;
  static constexpr int kHistogramBins = 20;

  CompletionService(ImputerModel model, std::uint64_t seed);

  const ImputerModel& model() const { return model_; }
  const std::string& version() const { return version_; }

  /// GET /v1/health
  HttpResponse health() const;
  /// GET /v1/schema: features, component grouping and graph edges.
  HttpResponse schema() const;
  /// POST /v1/complete with {"values": {name: value}, "k": int, "seed": int}.
  /// Absent or null values are missing. 400 names the offending field; 422
  /// when nothing is missing and k > 1 (copies are still returned); 500
  /// carries an opaque error id.
  HttpResponse complete(const std::string& body);

 private:
  HttpResponse complete_impl(const nlohmann::json& request);
  std::uint64_t next_seed();

  ImputerModel model_;
  std::string version_;
  std::mutex rng_mutex_;
  Rng rng_;
  std::mutex error_mutex_;
  std::uint64_t error_counter_ = 0;
};

/// Summary of K values for one missing feature.
nlohmann::json summarize_feature(const FeatureSpec& spec, const std::vector<Value>& values, int bins);

/// Thin HTTP binding of a CompletionService.
class HttpServer {
 public:
  explicit HttpServer(CompletionService& service);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free port) and returns the bound
  /// port. Throws ConfigError when binding fails.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Splits "host:port"; a bare port binds 127.0.0.1.
std::pair<std::string, int> parse_bind_address(const std::string& address);

}  // namespace gdimpute
