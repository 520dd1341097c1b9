// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include "gdimpute/schema.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_set>

#include "gdimpute/error.hpp"

namespace gdimpute {

using nlohmann::json;

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::kNumeric ? "numeric" : "categorical";
}

std::optional<std::size_t> FeatureSpec::category_index(std::string_view label) const {
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (categories[i] == label) return i;
  }
  return std::nullopt;
}

bool operator==(const FeatureSpec& a, const FeatureSpec& b) {
  if (a.name != b.name || a.kind != b.kind || a.component != b.component) return false;
  if (a.is_numeric()) return a.lo == b.lo && a.hi == b.hi;
  return a.categories == b.categories;
}

FeatureSchema FeatureSchema::create(std::vector<std::string> components,
                                    std::vector<FeatureSpec> features) {
  FeatureSchema s;
  std::unordered_set<std::string> seen_components;
  for (const auto& c : components) {
    if (c.empty()) throw SchemaError("component id must be non-empty");
    if (!seen_components.insert(c).second) throw SchemaError("duplicate component '" + c + "'");
  }
  s.components_ = std::move(components);
  s.component_index_.assign(s.components_.size(), {});

  std::unordered_set<std::string> seen_names;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    if (f.name.empty()) throw SchemaError("feature " + std::to_string(i) + " has an empty name");
    if (!seen_names.insert(f.name).second) throw SchemaError("duplicate feature name '" + f.name + "'");
    if (f.is_numeric()) {
      if (!(std::isfinite(f.lo) && std::isfinite(f.hi) && f.lo < f.hi)) {
        throw SchemaError("feature '" + f.name + "' needs a finite range with lo < hi");
      }
      if (!f.categories.empty()) {
        throw SchemaError("numeric feature '" + f.name + "' must not declare categories");
      }
    } else {
      if (f.categories.empty()) throw SchemaError("feature '" + f.name + "' has an empty category list");
      if (f.categories.size() < 2) {
        throw SchemaError("categorical feature '" + f.name + "' needs at least 2 categories");
      }
      std::set<std::string> labels(f.categories.begin(), f.categories.end());
      if (labels.size() != f.categories.size()) {
        throw SchemaError("categorical feature '" + f.name + "' has duplicate labels");
      }
    }
    auto it = std::find(s.components_.begin(), s.components_.end(), f.component);
    if (it == s.components_.end()) {
      throw SchemaError("feature '" + f.name + "' references undeclared component '" + f.component + "'");
    }
    const auto c = static_cast<std::size_t>(it - s.components_.begin());
    s.component_index_[c].push_back(i);
    s.feature_component_.push_back(c);
  }
  for (std::size_t c = 0; c < s.components_.size(); ++c) {
    if (s.component_index_[c].empty()) {
      throw SchemaError("component '" + s.components_[c] + "' has no features");
    }
  }
  s.features_ = std::move(features);
  return s;
}

FeatureSchema FeatureSchema::from_json(const json& doc) {
  try {
    std::vector<std::string> components = doc.at("components").get<std::vector<std::string>>();
    std::vector<FeatureSpec> features;
    for (const auto& f : doc.at("features")) {
      FeatureSpec spec;
      spec.name = f.at("name").get<std::string>();
      const auto kind = f.at("kind").get<std::string>();
      if (kind == "numeric") {
        spec.kind = FeatureKind::kNumeric;
        const auto& range = f.at("range");
        if (!range.is_array() || range.size() != 2) {
          throw SchemaError("feature '" + spec.name + "': range must be [lo, hi]");
        }
        spec.lo = range[0].get<double>();
        spec.hi = range[1].get<double>();
      } else if (kind == "categorical") {
        spec.kind = FeatureKind::kCategorical;
        spec.categories = f.at("categories").get<std::vector<std::string>>();
      } else {
        throw SchemaError("feature '" + spec.name + "': unknown kind '" + kind + "'");
      }
      spec.component = f.at("component").get<std::string>();
      features.push_back(std::move(spec));
    }
    return create(std::move(components), std::move(features));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("schema parse error: ") + e.what());
  }
}

json FeatureSchema::to_json() const {
  json features = json::array();
  for (const auto& f : features_) {
    json j;
    j["name"] = f.name;
    j["kind"] = std::string(to_string(f.kind));
    if (f.is_numeric()) {
      j["range"] = {f.lo, f.hi};
    } else {
      j["categories"] = f.categories;
    }
    j["component"] = f.component;
    features.push_back(std::move(j));
  }
  return json{{"components", components_}, {"features", std::move(features)}};
}

std::optional<std::size_t> FeatureSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> FeatureSchema::component_index(std::string_view id) const {
  for (std::size_t i = 0; i < components_.size(); ++i) {
    if (components_[i] == id) return i;
  }
  return std::nullopt;
}

std::size_t FeatureSchema::numeric_count() const {
  return static_cast<std::size_t>(
      std::count_if(features_.begin(), features_.end(), [](const auto& f) { return f.is_numeric(); }));
}

std::size_t FeatureSchema::categorical_count() const { return size() - numeric_count(); }

bool operator==(const FeatureSchema& a, const FeatureSchema& b) {
  return a.components_ == b.components_ && a.features_ == b.features_;
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw SchemaError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
}

FeatureSchema load_schema(const std::filesystem::path& path) {
  return FeatureSchema::from_json(read_json_file(path));
}

void save_schema(const FeatureSchema& schema, const std::filesystem::path& path) {
  write_json_file(schema.to_json(), path);
}

std::size_t ObservationMask::missing_count() const {
  return static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), false));
}

std::vector<std::size_t> ObservationMask::missing_positions() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < observed_.size(); ++i) {
    if (!observed_[i]) out.push_back(i);
  }
  return out;
}

ObservationMask PartialDesign::mask() const {
  std::vector<bool> bits(values_.size());
  for (std::size_t i = 0; i < values_.size(); ++i) bits[i] = !gdimpute::is_missing(values_[i]);
  return ObservationMask(std::move(bits));
}

std::size_t PartialDesign::missing_count() const {
  return static_cast<std::size_t>(std::count_if(
      values_.begin(), values_.end(), [](const Value& v) { return gdimpute::is_missing(v); }));
}

CompleteDesign::CompleteDesign(std::vector<Value> values) : values_(std::move(values)) {
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (gdimpute::is_missing(values_[i])) {
      throw SchemaError("complete design has a missing value at position " + std::to_string(i));
    }
  }
}

namespace {

void validate_entry(const FeatureSpec& f, const Value& v) {
  if (gdimpute::is_missing(v)) return;
  if (f.is_numeric()) {
    const auto* d = std::get_if<double>(&v);
    if (d == nullptr) throw SchemaError("feature '" + f.name + "' expects a number");
    if (!std::isfinite(*d) || *d < f.lo || *d > f.hi) {
      throw SchemaError("feature '" + f.name + "' value " + format_double(*d) + " outside [" +
                        format_double(f.lo) + ", " + format_double(f.hi) + "]");
    }
  } else {
    const auto* s = std::get_if<std::string>(&v);
    if (s == nullptr) throw SchemaError("feature '" + f.name + "' expects a category label");
    if (!f.category_index(*s)) {
      throw SchemaError("feature '" + f.name + "' has unknown category '" + *s + "'");
    }
  }
}

}  // namespace

void validate(const FeatureSchema& schema, const PartialDesign& design) {
  if (design.size() != schema.size()) {
    throw SchemaError("design has " + std::to_string(design.size()) + " values, schema declares " +
                      std::to_string(schema.size()));
  }
  for (std::size_t i = 0; i < design.size(); ++i) validate_entry(schema.feature(i), design[i]);
}

void validate(const FeatureSchema& schema, const CompleteDesign& design) {
  validate(schema, design.to_partial());
}

bool is_valid(const FeatureSchema& schema, const CompleteDesign& design) {
  try {
    validate(schema, design);
    return true;
  } catch (const SchemaError&) {
    return false;
  }
}

PartialDesign apply_mask(const CompleteDesign& design, const ObservationMask& mask) {
  if (mask.size() != design.size()) {
    throw SchemaError("mask length " + std::to_string(mask.size()) + " does not match design length " +
                      std::to_string(design.size()));
  }
  std::vector<Value> values = design.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask.missing(i)) values[i] = Missing{};
  }
  return PartialDesign(std::move(values));
}

EncodedRow encode(const FeatureSchema& schema, const PartialDesign& design) {
  if (design.size() != schema.size()) throw SchemaError("design length does not match schema");
  EncodedRow row;
  row.value.assign(design.size(), 0.0);
  row.observed.assign(design.size(), 0);
  for (std::size_t i = 0; i < design.size(); ++i) {
    if (design.is_missing(i)) continue;
    const auto& f = schema.feature(i);
    row.observed[i] = 1;
    if (f.is_numeric()) {
      row.value[i] = f.normalize(std::get<double>(design[i]));
    } else {
      const auto idx = f.category_index(std::get<std::string>(design[i]));
      if (!idx) throw SchemaError("feature '" + f.name + "' has unknown category");
      row.value[i] = static_cast<double>(*idx);
    }
  }
  return row;
}

EncodedRow encode(const FeatureSchema& schema, const CompleteDesign& design) {
  return encode(schema, design.to_partial());
}

CompleteDesign decode(const FeatureSchema& schema, std::span<const double> value) {
  if (value.size() != schema.size()) throw SchemaError("encoded row length does not match schema");
  std::vector<Value> out;
  out.reserve(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    const auto& f = schema.feature(i);
    if (f.is_numeric()) {
      out.emplace_back(std::clamp(f.denormalize(value[i]), f.lo, f.hi));
    } else {
      const auto c = static_cast<long>(std::lround(value[i]));
      const auto idx = std::clamp<long>(c, 0, static_cast<long>(f.category_count()) - 1);
      out.emplace_back(f.categories[static_cast<std::size_t>(idx)]);
    }
  }
  return CompleteDesign(std::move(out));
}

double normalized_scalar(const FeatureSpec& spec, const Value& value) {
  if (spec.is_numeric()) return spec.normalize(std::get<double>(value));
  const auto idx = spec.category_index(std::get<std::string>(value));
  if (!idx) throw SchemaError("feature '" + spec.name + "' has unknown category");
  return static_cast<double>(*idx) / static_cast<double>(spec.category_count() - 1);
}

json value_to_json(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  return nullptr;
}

Value value_from_json(const FeatureSpec& spec, const json& j) {
  if (j.is_null()) return Missing{};
  if (spec.is_numeric()) {
    if (!j.is_number()) throw SchemaError("feature '" + spec.name + "' expects a number");
    return j.get<double>();
  }
  if (!j.is_string()) throw SchemaError("feature '" + spec.name + "' expects a category label");
  return j.get<std::string>();
}

AssemblyGraph AssemblyGraph::create(const FeatureSchema& schema,
                                    const std::vector<std::pair<std::string, std::string>>& edges) {
  std::vector<Edge> idx;
  for (const auto& [a, b] : edges) {
    const auto ia = schema.component_index(a);
    const auto ib = schema.component_index(b);
    if (!ia) throw SchemaError("edge endpoint '" + a + "' is not a component");
    if (!ib) throw SchemaError("edge endpoint '" + b + "' is not a component");
    idx.emplace_back(*ia, *ib);
  }
  AssemblyGraph g = from_indices(schema.component_count(), std::move(idx));
  g.nodes_ = schema.components();
  return g;
}

AssemblyGraph AssemblyGraph::from_indices(std::size_t node_count, std::vector<Edge> edges) {
  AssemblyGraph g;
  g.nodes_.resize(node_count);
  for (std::size_t i = 0; i < node_count; ++i) g.nodes_[i] = "n" + std::to_string(i);
  std::set<Edge> unique;
  for (auto [a, b] : edges) {
    if (a >= node_count || b >= node_count) throw SchemaError("edge endpoint out of range");
    if (a == b) throw SchemaError("self-loop on node " + std::to_string(a));
    unique.insert({std::min(a, b), std::max(a, b)});
  }
  g.edges_.assign(unique.begin(), unique.end());
  g.build_adjacency();
  return g;
}

void AssemblyGraph::build_adjacency() {
  adjacency_.assign(nodes_.size(), {});
  for (auto [a, b] : edges_) {
    adjacency_[a].push_back(b);
    adjacency_[b].push_back(a);
  }
  for (auto& n : adjacency_) std::sort(n.begin(), n.end());
}

AssemblyGraph AssemblyGraph::from_json(const json& doc, const FeatureSchema& schema) {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  try {
    nodes = doc.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw SchemaError("each edge must be a [a, b] pair");
      const auto a = e[0].get<std::string>();
      const auto b = e[1].get<std::string>();
      if (a == b) throw SchemaError("self-loop on '" + a + "'");
      edges.emplace_back(a, b);
    }
  } catch (const json::exception& e) {
    throw SchemaError(std::string("graph parse error: ") + e.what());
  }
  const std::set<std::string> declared(nodes.begin(), nodes.end());
  const std::set<std::string> expected(schema.components().begin(), schema.components().end());
  if (declared.size() != nodes.size()) throw SchemaError("graph declares duplicate nodes");
  for (const auto& [a, b] : edges) {
    if (!declared.contains(a)) throw SchemaError("edge endpoint '" + a + "' is not a declared node");
    if (!declared.contains(b)) throw SchemaError("edge endpoint '" + b + "' is not a declared node");
  }
  if (declared != expected) {
    throw SchemaError("graph node set does not match the schema's component set");
  }
  return create(schema, edges);
}

json AssemblyGraph::to_json() const {
  json edges = json::array();
  for (auto [a, b] : edges_) edges.push_back({nodes_[a], nodes_[b]});
  return json{{"nodes", nodes_}, {"edges", std::move(edges)}};
}

bool AssemblyGraph::is_connected() const {
  if (nodes_.empty()) return true;
  std::vector<bool> seen(nodes_.size(), false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t count = 1;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    for (auto v : adjacency_[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        q.push(v);
      }
    }
  }
  return count == nodes_.size();
}

AssemblyGraph load_graph(const std::filesystem::path& path, const FeatureSchema& schema) {
  return AssemblyGraph::from_json(read_json_file(path), schema);
}

void save_graph(const AssemblyGraph& graph, const std::filesystem::path& path) {
  write_json_file(graph.to_json(), path);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace gdimpute
