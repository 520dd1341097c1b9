// Copyright 2026 The gdimpute Authors
// SPDX-License-Identifier: Apache-2.0
// Licensed under the Apache License, Version 2.0.

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "gdimpute/dataset.hpp"
#include "gdimpute/error.hpp"

namespace gdimpute {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  char c;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw DataError("unterminated quoted field in CSV");
  if (field_started || !record.empty()) end_record();
  return records;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace {

std::vector<std::vector<std::string>> read_records(const std::filesystem::path& path,
                                                   const FeatureSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  auto records = parse_csv(in);
  if (records.empty()) throw DataError("'" + path.string() + "' has no header");
  const auto& header = records.front();
  if (header.size() != schema.size()) {
    throw DataError("header has " + std::to_string(header.size()) + " columns, schema declares " +
                    std::to_string(schema.size()));
  }
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] != schema.feature(i).name) {
      throw DataError("header column " + std::to_string(i + 1) + " is '" + header[i] +
                      "', expected '" + schema.feature(i).name + "'");
    }
  }
  return records;
}

std::string where(std::size_t row, const FeatureSpec& f) {
  return "row " + std::to_string(row) + ", column '" + f.name + "'";
}

Value parse_cell(const FeatureSpec& f, const std::string& cell, std::size_t row) {
  if (cell.empty()) return Missing{};
  if (f.is_numeric()) {
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    while (first < last && *first == ' ') ++first;
    if (first < last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
      throw DataError(where(row, f) + ": cannot parse '" + cell + "' as a number");
    }
    if (v < f.lo || v > f.hi) {
      throw DataError(where(row, f) + ": value " + cell + " outside [" + format_double(f.lo) + ", " +
                      format_double(f.hi) + "]");
    }
    return v;
  }
  if (!f.category_index(cell)) throw DataError(where(row, f) + ": unknown category '" + cell + "'");
  return cell;
}

std::vector<Value> parse_row(const FeatureSchema& schema, const std::vector<std::string>& record,
                             std::size_t row) {
  if (record.size() != schema.size()) {
    throw DataError("row " + std::to_string(row) + " has " + std::to_string(record.size()) +
                    " cells, expected " + std::to_string(schema.size()));
  }
  std::vector<Value> values;
  values.reserve(record.size());
  for (std::size_t i = 0; i < record.size(); ++i) {
    values.push_back(parse_cell(schema.feature(i), record[i], row));
  }
  return values;
}

std::string render(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return format_double(*d);
  if (const auto* s = std::get_if<std::string>(&v)) return csv_escape(*s);
  return {};
}

template <typename Row>
void write_rows(const std::filesystem::path& path, const FeatureSchema& schema,
                const std::vector<Row>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (i) out << ',';
    out << csv_escape(schema.feature(i).name);
  }
  out << '\n';
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out << ',';
      out << render(r[i]);
    }
    out << '\n';
  }
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::shared_ptr<const FeatureSchema> schema) {
  const auto records = read_records(path, *schema);
  Dataset ds;
  ds.provenance = Provenance::kLoaded;
  for (std::size_t r = 1; r < records.size(); ++r) {
    auto values = parse_row(*schema, records[r], r);
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (is_missing(values[i])) {
        throw DataError(where(r, schema->feature(i)) + ": empty cell in a complete dataset");
      }
    }
    ds.rows.emplace_back(std::move(values));
  }
  ds.schema = std::move(schema);
  return ds;
}

std::vector<PartialDesign> load_partial_csv(const std::filesystem::path& path,
                                            const FeatureSchema& schema) {
  const auto records = read_records(path, schema);
  std::vector<PartialDesign> rows;
  for (std::size_t r = 1; r < records.size(); ++r) rows.emplace_back(parse_row(schema, records[r], r));
  return rows;
}

void write_csv(const std::filesystem::path& path, const FeatureSchema& schema,
               const std::vector<CompleteDesign>& rows) {
  write_rows(path, schema, rows);
}

void write_csv(const std::filesystem::path& path, const FeatureSchema& schema,
               const std::vector<PartialDesign>& rows) {
  write_rows(path, schema, rows);
}

}  // namespace gdimpute
