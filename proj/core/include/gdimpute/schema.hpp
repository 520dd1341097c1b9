// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace gdimpute {

enum class FeatureKind { kNumeric, kCategorical };

std::string_view to_string(FeatureKind kind);

/// One design parameter. Numeric features carry a closed range used for
/// validation and min-max normalization; categorical features carry an
/// ordered label list whose index is the integer code used by encoders.
struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::kNumeric;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<std::string> categories;
  std::string component;

  bool is_numeric() const { return kind == FeatureKind::kNumeric; }
  bool is_categorical() const { return kind == FeatureKind::kCategorical; }
  std::size_t category_count() const { return categories.size(); }

  /// Index of `label` in `categories`, or nullopt.
  std::optional<std::size_t> category_index(std::string_view label) const;

  double normalize(double value) const { return (value - lo) / (hi - lo); }
  double denormalize(double unit) const { return lo + unit * (hi - lo); }
};

class FeatureSchema {
 public:
  FeatureSchema() = default;

  /// Validates and builds a schema. Throws SchemaError on duplicate names,
  /// undeclared components, empty ranges or category lists.
  static FeatureSchema create(std::vector<std::string> components,
                              std::vector<FeatureSpec> features);

  static FeatureSchema from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  std::size_t size() const { return features_.size(); }
  const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }
  std::span<const FeatureSpec> features() const { return features_; }

  std::size_t component_count() const { return components_.size(); }
  const std::vector<std::string>& components() const { return components_; }
  /// Feature positions belonging to component `c`, in schema order.
  const std::vector<std::size_t>& component_features(std::size_t c) const {
    return component_index_.at(c);
  }
  std::size_t component_of(std::size_t feature) const {
    return feature_component_.at(feature);
  }

  std::optional<std::size_t> index_of(std::string_view name) const;
  std::optional<std::size_t> component_index(std::string_view id) const;

  std::size_t numeric_count() const;
  std::size_t categorical_count() const;

  friend bool operator==(const FeatureSchema& a, const FeatureSchema& b);

 private:
  std::vector<std::string> components_;
  std::vector<FeatureSpec> features_;
  std::vector<std::vector<std::size_t>> component_index_;
  std::vector<std::size_t> feature_component_;
};

bool operator==(const FeatureSpec& a, const FeatureSpec& b);

FeatureSchema load_schema(const std::filesystem::path& path);
void save_schema(const FeatureSchema& schema, const std::filesystem::path& path);

/// Missing-value sentinel. Deliberately distinct from numeric zero.
struct Missing {
  friend bool operator==(Missing, Missing) { return true; }
};

using Value = std::variant<Missing, double, std::string>;

inline bool is_missing(const Value& v) { return std::holds_alternative<Missing>(v); }

class ObservationMask {
 public:
  ObservationMask() = default;
  explicit ObservationMask(std::vector<bool> observed) : observed_(std::move(observed)) {}
  static ObservationMask all(std::size_t n, bool observed) {
    return ObservationMask(std::vector<bool>(n, observed));
  }

  std::size_t size() const { return observed_.size(); }
  bool observed(std::size_t i) const { return observed_.at(i); }
  bool missing(std::size_t i) const { return !observed_.at(i); }
  void set(std::size_t i, bool observed) { observed_.at(i) = observed; }
  std::size_t missing_count() const;
  std::vector<std::size_t> missing_positions() const;
  const std::vector<bool>& bits() const { return observed_; }

  friend bool operator==(const ObservationMask&, const ObservationMask&) = default;

 private:
  std::vector<bool> observed_;
};

/// A design row in which any entry may be the missing sentinel. The mask is
/// derived from the sentinel positions, so the two can never disagree.
class PartialDesign {
 public:
  PartialDesign() = default;
  explicit PartialDesign(std::vector<Value> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  const Value& operator[](std::size_t i) const { return values_.at(i); }
  const std::vector<Value>& values() const { return values_; }
  bool is_missing(std::size_t i) const { return gdimpute::is_missing(values_.at(i)); }
  ObservationMask mask() const;
  std::size_t missing_count() const;

  void set(std::size_t i, Value v) { values_.at(i) = std::move(v); }

  friend bool operator==(const PartialDesign&, const PartialDesign&) = default;

 private:
  std::vector<Value> values_;
};

/// A design row with every entry present.
class CompleteDesign {
 public:
  CompleteDesign() = default;
  /// Throws SchemaError if any entry is missing.
  explicit CompleteDesign(std::vector<Value> values);

  std::size_t size() const { return values_.size(); }
  const Value& operator[](std::size_t i) const { return values_.at(i); }
  const std::vector<Value>& values() const { return values_; }
  double number(std::size_t i) const { return std::get<double>(values_.at(i)); }
  const std::string& label(std::size_t i) const { return std::get<std::string>(values_.at(i)); }

  PartialDesign to_partial() const { return PartialDesign(values_); }

  friend bool operator==(const CompleteDesign&, const CompleteDesign&) = default;

 private:
  std::vector<Value> values_;
};

/// Throws SchemaError naming the offending feature if `design` has the
/// wrong length, a value of the wrong kind, an out-of-range number or an
/// unknown label.
void validate(const FeatureSchema& schema, const PartialDesign& design);
void validate(const FeatureSchema& schema, const CompleteDesign& design);
bool is_valid(const FeatureSchema& schema, const CompleteDesign& design);

/// Hides every position where `mask` is false. Observed entries are copied
/// unchanged.
PartialDesign apply_mask(const CompleteDesign& design, const ObservationMask& mask);

/// Numeric encoding of a row consumed by the learned modules: numeric
/// features hold min-max normalized values, categorical features hold the
/// label index. Entries at unobserved positions carry arbitrary payload and
/// must never be read by consumers.
struct EncodedRow {
  std::vector<double> value;
  std::vector<std::uint8_t> observed;

  std::size_t size() const { return value.size(); }
};

EncodedRow encode(const FeatureSchema& schema, const PartialDesign& design);
EncodedRow encode(const FeatureSchema& schema, const CompleteDesign& design);
/// Inverse of encode for fully observed rows (numeric values are clamped to
/// the schema range, category codes rounded and clamped).
CompleteDesign decode(const FeatureSchema& schema, std::span<const double> value);

/// Normalized scalar view used by metrics: numeric min-max value in [0,1],
/// categorical code / (C-1).
double normalized_scalar(const FeatureSpec& spec, const Value& value);

nlohmann::json value_to_json(const Value& v);
Value value_from_json(const FeatureSpec& spec, const nlohmann::json& j);

class AssemblyGraph {
 public:
  using Edge = std::pair<std::size_t, std::size_t>;

  AssemblyGraph() = default;

  /// Nodes follow schema component order. Edges are undirected; duplicate
  /// edges collapse. Throws SchemaError for unknown endpoints or self-loops.
  static AssemblyGraph create(const FeatureSchema& schema,
                              const std::vector<std::pair<std::string, std::string>>& edges);
  static AssemblyGraph from_indices(std::size_t node_count, std::vector<Edge> edges);
  static AssemblyGraph from_json(const nlohmann::json& doc, const FeatureSchema& schema);
  nlohmann::json to_json() const;

  std::size_t node_count() const { return nodes_.size(); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  /// Neighbours of node `i`, excluding `i` itself, ascending.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_.at(i); }
  std::size_t degree(std::size_t i) const { return adjacency_.at(i).size(); }
  bool is_connected() const;

  friend bool operator==(const AssemblyGraph& a, const AssemblyGraph& b) {
    return a.nodes_ == b.nodes_ && a.edges_ == b.edges_;
  }

 private:
  void build_adjacency();

  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

AssemblyGraph load_graph(const std::filesystem::path& path, const FeatureSchema& schema);
void save_graph(const AssemblyGraph& graph, const std::filesystem::path& path);

/// Reads a JSON document from disk; throws ConfigError when the file cannot
/// be opened and SchemaError when it does not parse.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);

}  // namespace gdimpute
