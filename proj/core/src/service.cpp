// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/service.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <httplib.h>

#include "gdimpute/checkpoint.hpp"
#include "gdimpute/error.hpp"

namespace gdimpute {

using nlohmann::json;

namespace {

/// Validation failure tied to one request field.
struct FieldError {
  std::string field;
  std::string message;
};

HttpResponse bad_request(const FieldError& e) {
  return {400, json{{"error", e.message}, {"field", e.field}}};
}

}  // namespace

CompletionService::CompletionService(ImputerModel model, std::uint64_t seed)
    : model_(std::move(model)), version_(model_version(model_)), rng_(seed) {
  if (!model_.trained()) throw ModelError("refusing to serve an untrained model");
}

std::uint64_t CompletionService::next_seed() {
  std::lock_guard lock(rng_mutex_);
  // Keep seeds within the range JSON numbers carry exactly.
  return rng_() >> 11;
}

HttpResponse CompletionService::health() const {
  return {200, json{{"status", "ok"}, {"model_version", version_}}};
}

HttpResponse CompletionService::schema() const {
  const auto& s = model_.schema();
  json components = json::array();
  for (std::size_t c = 0; c < s.component_count(); ++c) {
    json names = json::array();
    for (auto f : s.component_features(c)) names.push_back(s.feature(f).name);
    components.push_back({{"id", s.components()[c]}, {"features", names}});
  }
  return {200, json{{"model_version", version_},
                    {"schema", s.to_json()},
                    {"components", components},
                    {"graph", model_.graph().to_json()}}};
}

json summarize_feature(const FeatureSpec& spec, const std::vector<Value>& values, int bins) {
  if (spec.is_numeric()) {
    std::vector<double> v;
    for (const auto& x : values) v.push_back(std::get<double>(x));
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (double x : v) {
      const double u = spec.normalize(x);
      const auto b = std::clamp(static_cast<long>(std::floor(u * bins)), 0L, static_cast<long>(bins) - 1);
      ++counts[static_cast<std::size_t>(b)];
    }
    return json{{"kind", "numeric"},
                {"mean", mean},
                {"min", *std::min_element(v.begin(), v.end())},
                {"max", *std::max_element(v.begin(), v.end())},
                {"histogram", {{"lo", spec.lo}, {"hi", spec.hi}, {"bins", bins}, {"counts", counts}}}};
  }
  std::vector<int> counts(spec.category_count(), 0);
  for (const auto& x : values) ++counts[*spec.category_index(std::get<std::string>(x))];
  const auto mode = std::max_element(counts.begin(), counts.end()) - counts.begin();
  json by_label = json::object();
  for (std::size_t c = 0; c < counts.size(); ++c) by_label[spec.categories[c]] = counts[c];
  return json{{"kind", "categorical"}, {"mode", spec.categories[static_cast<std::size_t>(mode)]}, {"counts", by_label}};
}

HttpResponse CompletionService::complete(const std::string& body) {
  json request;
  try {
    request = json::parse(body);
  } catch (const json::exception&) {
    return bad_request({"body", "request body is not valid JSON"});
  }
  try {
    return complete_impl(request);
  } catch (const FieldError& e) {
    return bad_request(e);
  } catch (const std::exception& e) {
    std::uint64_t id = 0;
    {
      std::lock_guard lock(error_mutex_);
      id = ++error_counter_;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "err-%08llx", static_cast<unsigned long long>(derive_seed(id, 0) & 0xffffffffULL));
    std::cerr << "gdimpute: internal error " << buf << ": " << e.what() << "\n";
    return {500, json{{"error", "internal error"}, {"id", buf}}};
  }
}

HttpResponse CompletionService::complete_impl(const json& request) {
  const auto& s = model_.schema();
  if (!request.is_object()) throw FieldError{"body", "request body must be a JSON object"};
  for (const auto& [key, _] : request.items()) {
    if (key != "values" && key != "k" && key != "seed") throw FieldError{key, "unknown request field '" + key + "'"};
  }
  int k = kDefaultSamples;
  if (request.contains("k")) {
    const auto& kj = request["k"];
    if (!kj.is_number_integer() || kj.get<long long>() < 1 || kj.get<long long>() > kMaxSamples) {
      throw FieldError{"k", "k must be an integer in [1, " + std::to_string(kMaxSamples) + "]"};
    }
    k = kj.get<int>();
  }
  std::uint64_t seed = 0;
  if (request.contains("seed") && !request["seed"].is_null()) {
    const auto& sj = request["seed"];
    if (!sj.is_number_unsigned()) throw FieldError{"seed", "seed must be a non-negative integer"};
    seed = sj.get<std::uint64_t>();
  } else {
    seed = next_seed();
  }

  std::vector<Value> values(s.size(), Missing{});
  if (request.contains("values")) {
    const auto& vj = request["values"];
    if (!vj.is_object()) throw FieldError{"values", "values must be an object keyed by feature name"};
    for (const auto& [name, v] : vj.items()) {
      const auto f = s.index_of(name);
      if (!f) throw FieldError{name, "unknown feature '" + name + "'"};
      if (v.is_null()) continue;
      const auto& spec = s.feature(*f);
      if (spec.is_numeric()) {
        if (!v.is_number()) throw FieldError{name, "feature '" + name + "' expects a number"};
        const double x = v.get<double>();
        if (!std::isfinite(x) || x < spec.lo || x > spec.hi) {
          throw FieldError{name, "feature '" + name + "' must lie in [" + format_double(spec.lo) + ", " +
                                     format_double(spec.hi) + "]"};
        }
        values[*f] = x;
      } else {
        if (!v.is_string()) throw FieldError{name, "feature '" + name + "' expects a category label"};
        const auto label = v.get<std::string>();
        if (!spec.category_index(label)) {
          throw FieldError{name, "feature '" + name + "' has no category '" + label + "'"};
        }
        values[*f] = label;
      }
    }
  }
  const PartialDesign partial(std::move(values));
  const auto samples = sample(model_, partial, k, seed);

  json completions = json::array();
  for (const auto& d : samples.draws) {
    json row = json::object();
    for (std::size_t f = 0; f < s.size(); ++f) row[s.feature(f).name] = value_to_json(d[f]);
    completions.push_back(std::move(row));
  }
  json missing = json::array();
  json summary = json::object();
  for (auto f : samples.missing_positions()) {
    const auto& spec = s.feature(f);
    missing.push_back(spec.name);
    std::vector<Value> draws;
    for (const auto& d : samples.draws) draws.push_back(d[f]);
    summary[spec.name] = summarize_feature(spec, draws, kHistogramBins);
  }
  json out{{"model_version", version_},
           {"seed", seed},
           {"k", k},
           {"missing", missing},
           {"completions", completions},
           {"summary", summary}};
  if (missing.empty() && k > 1) {
    out["error"] = "every feature is observed; the completions are copies of the request";
    return {422, out};
  }
  return {200, out};
}

// -- HTTP binding ----------------------------------------------------------------

struct HttpServer::Impl {
  CompletionService& service;
  httplib::Server server;

  explicit Impl(CompletionService& s) : service(s) {
    auto send = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json; charset=utf-8");
    };
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Get("/v1/health", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.health());
    });
    server.Get("/v1/schema", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.schema());
    });
    server.Post("/v1/complete", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.complete(req.body));
    });
    server.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  }
};

HttpServer::HttpServer(CompletionService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw ConfigError("cannot bind " + host + " to any port");
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }
void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}
void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

std::pair<std::string, int> parse_bind_address(const std::string& address) {
  std::string host = "127.0.0.1";
  std::string port_text = address;
  if (const auto colon = address.rfind(':'); colon != std::string::npos) {
    host = address.substr(0, colon);
    port_text = address.substr(colon + 1);
    if (host.empty()) host = "127.0.0.1";
  }
  int port = -1;
  try {
    std::size_t used = 0;
    port = std::stoi(port_text, &used);
    if (used != port_text.size()) port = -1;
  } catch (const std::exception&) {
    port = -1;
  }
  if (port < 0 || port > 65535) throw ConfigError("invalid bind address '" + address + "'");
  return {host, port};
}

}  // namespace gdimpute
