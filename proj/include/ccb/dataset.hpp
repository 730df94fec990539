#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ccb/common.hpp"
#include "ccb/context.hpp"

namespace ccb {

// How to turn a raw CSV into a labeled binary stream. The label column
// defaults to the last one; label values are mapped through label_map with
// anything unmapped going to default_label (KDD mapping: "normal." -> 0,
// any attack -> 1). Categorical columns are ordinal- or one-hot-encoded.
struct DatasetSchema {
  int label_column = -1;  // -1: last column
  std::map<std::string, int> label_map = {{"normal.", 0}};
  std::optional<int> default_label = 1;  // nullopt: unmapped label is an error
  bool has_header = false;

  enum class Encoding { Ordinal, OneHot };
  enum class UnknownPolicy { Error, OtherBucket };
  struct CategoricalColumn {
    Encoding encoding = Encoding::Ordinal;
    std::vector<std::string> dictionary;  // empty: built from data in first-seen order
    UnknownPolicy unknown = UnknownPolicy::OtherBucket;
  };
  std::map<int, CategoricalColumn> categorical;  // keyed by raw column index
};

struct Dataset {
  std::vector<std::vector<double>> features;  // stream order preserved
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  std::string provenance;

  std::size_t size() const { return labels.size(); }
  int feature_dim() const { return features.empty() ? 0 : static_cast<int>(features[0].size()); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end != nullptr && *end == '\0';
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const DatasetSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_csv: cannot open " + path);

  Dataset ds;
  ds.provenance = path;
  // working dictionaries for categorical columns (copied so first-seen
  // building does not mutate the schema)
  std::map<int, DatasetSchema::CategoricalColumn> cats = schema.categorical;

  std::string line;
  std::int64_t line_no = 0;
  int n_columns = -1;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = detail::split_csv_line(line);
    if (line_no == 1 && schema.has_header) {
      header = fields;
      continue;
    }
    if (n_columns < 0) {
      n_columns = static_cast<int>(fields.size());
      if (n_columns < 2)
        throw ConfigError("load_csv: line " + std::to_string(line_no) + ": need >= 2 columns");
    } else if (static_cast<int>(fields.size()) != n_columns) {
      throw ConfigError("load_csv: line " + std::to_string(line_no) + ": expected " +
                        std::to_string(n_columns) + " fields, got " +
                        std::to_string(fields.size()));
    }
    const int label_col = schema.label_column < 0 ? n_columns - 1 : schema.label_column;

    // label
    const std::string& raw_label = fields[static_cast<std::size_t>(label_col)];
    int label;
    if (auto it = schema.label_map.find(raw_label); it != schema.label_map.end()) {
      label = it->second;
    } else if (schema.default_label.has_value()) {
      label = *schema.default_label;
    } else {
      throw ConfigError("load_csv: line " + std::to_string(line_no) + ": unmapped label '" +
                        raw_label + "'");
    }

    // features
    std::vector<double> row;
    row.reserve(static_cast<std::size_t>(n_columns - 1));
    for (int c = 0; c < n_columns; ++c) {
      if (c == label_col) continue;
      const std::string& f = fields[static_cast<std::size_t>(c)];
      auto cat = cats.find(c);
      if (cat != cats.end()) {
        auto& dict = cat->second.dictionary;
        std::size_t idx = dict.size();
        for (std::size_t k = 0; k < dict.size(); ++k)
          if (dict[k] == f) {
            idx = k;
            break;
          }
        const bool unknown = idx == dict.size();
        if (unknown) {
          if (schema.categorical.at(c).dictionary.empty()) {
            dict.push_back(f);  // first-seen ordinal build
          } else if (cat->second.unknown == DatasetSchema::UnknownPolicy::Error) {
            throw ConfigError("load_csv: line " + std::to_string(line_no) +
                              ": unknown category '" + f + "' in column " + std::to_string(c));
          }
        }
        if (cat->second.encoding == DatasetSchema::Encoding::Ordinal) {
          row.push_back(static_cast<double>(idx));
        } else {
          for (std::size_t k = 0; k < dict.size(); ++k)
            row.push_back(k == idx ? 1.0 : 0.0);  // unknown -> all zeros
        }
        continue;
      }
      double v;
      if (!detail::parse_number(f, v))
        throw ConfigError("load_csv: line " + std::to_string(line_no) +
                          ": non-numeric field '" + f + "' in column " + std::to_string(c));
      row.push_back(v);
    }

    if (!ds.features.empty() && row.size() != ds.features[0].size())
      throw ConfigError("load_csv: line " + std::to_string(line_no) +
                        ": inconsistent encoded width");
    ds.features.push_back(std::move(row));
    ds.labels.push_back(label);
  }

  if (!ds.features.empty()) {
    for (std::size_t c = 0; c < ds.features[0].size(); ++c) {
      std::string name = "c" + std::to_string(c);
      if (!header.empty() && c < header.size()) name = header[c];
      ds.feature_names.push_back(name);
    }
  }
  return ds;
}

// Serializes the parsed form (numeric features + 0/1 label).
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("save_csv: cannot open " + path);
  out.precision(17);
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (double v : ds.features[r]) out << v << ',';
    out << ds.labels[r] << '\n';
  }
}

// Context extraction modes: previous true label, one normalized feature, or
// normalized time.
struct ContextMode {
  enum class Kind { PrevLabel, Feature, Time };
  Kind kind = Kind::PrevLabel;
  std::string feature_name;
  bool log_scale = true;  // log1p before min-max (heavy-tailed counters)
};

class ContextExtractor {
 public:
  ContextExtractor() = default;
  ContextExtractor(const ContextMode& mode, const Dataset& ds, std::int64_t T)
      : mode_(mode), T_(std::max<std::int64_t>(T, 1)) {
    if (mode_.kind != ContextMode::Kind::Feature) return;
    col_ = -1;
    for (std::size_t c = 0; c < ds.feature_names.size(); ++c)
      if (ds.feature_names[c] == mode_.feature_name) col_ = static_cast<int>(c);
    if (col_ < 0) throw ConfigError("context: unknown feature '" + mode_.feature_name + "'");
    lo_ = std::numeric_limits<double>::infinity();
    hi_ = -lo_;
    for (const auto& row : ds.features) {
      const double v = transform(row[static_cast<std::size_t>(col_)]);
      lo_ = std::min(lo_, v);
      hi_ = std::max(hi_, v);
    }
  }

  // t is the 1-based slot; row t-1 of the stream is current.
  Context at(std::int64_t t, const Dataset& ds) const {
    switch (mode_.kind) {
      case ContextMode::Kind::PrevLabel:
        return Context({t <= 1 ? 0.0 : static_cast<double>(ds.labels[static_cast<std::size_t>(t - 2)])});
      case ContextMode::Kind::Time:
        return Context({static_cast<double>(t) / static_cast<double>(T_)});
      case ContextMode::Kind::Feature: {
        if (hi_ <= lo_) return Context({0.5});  // constant column
        const double v = transform(ds.features[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(col_)]);
        return Context({std::clamp((v - lo_) / (hi_ - lo_), 0.0, 1.0)});
      }
    }
    throw ConfigError("context: unknown mode");
  }

 private:
  double transform(double v) const { return mode_.log_scale ? std::log1p(std::max(v, 0.0)) : v; }

  ContextMode mode_;
  std::int64_t T_ = 1;
  int col_ = -1;
  double lo_ = 0.0, hi_ = 1.0;
};

}  // namespace ccb
