#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "signolearn/error.hpp"
#include "signolearn/rng.hpp"

namespace signolearn {

enum class TaskKind { Classify, Regress };

/// N x m feature matrix (row-major) with either class labels or real targets.
struct Dataset {
  TaskKind task = TaskKind::Classify;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<double> targets;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;

  std::span<const double> row(std::size_t i) const { return {features.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {features.data() + i * cols, cols}; }
  double& at(std::size_t i, std::size_t j) { return features[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return features[i * cols + j]; }

  bool empty() const { return rows == 0; }

  std::size_t num_classes() const {
    if (!class_names.empty()) return class_names.size();
    int mx = -1;
    for (int y : labels) mx = std::max(mx, y);
    return static_cast<std::size_t>(mx + 1);
  }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(num_classes(), 0);
    for (int y : labels) ++counts[static_cast<std::size_t>(y)];
    return counts;
  }

  /// Rows in the given order; metadata is shared.
  Dataset subset(std::span<const std::size_t> idx) const {
    Dataset out;
    out.task = task;
    out.cols = cols;
    out.rows = idx.size();
    out.feature_names = feature_names;
    out.class_names = class_names;
    out.features.reserve(idx.size() * cols);
    for (std::size_t i : idx) {
      auto r = row(i);
      out.features.insert(out.features.end(), r.begin(), r.end());
      if (task == TaskKind::Classify) {
        out.labels.push_back(labels[i]);
      } else {
        out.targets.push_back(targets[i]);
      }
    }
    return out;
  }

  void validate() const {
    if (features.size() != rows * cols) {
      throw Error(ErrorCode::LengthMismatch, "feature matrix size does not match rows x cols");
    }
    if (!feature_names.empty() && feature_names.size() != cols) {
      throw Error(ErrorCode::NameCountMismatch, "feature name count does not match columns");
    }
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (!std::isfinite(features[i])) {
        throw Error(ErrorCode::ParseError, "non-finite feature in row " + std::to_string(i / cols),
                    i / cols);
      }
    }
    if (task == TaskKind::Classify) {
      if (labels.size() != rows) throw Error(ErrorCode::LengthMismatch, "label count != rows");
      const auto c = static_cast<int>(num_classes());
      for (std::size_t i = 0; i < rows; ++i) {
        if (labels[i] < 0 || labels[i] >= c) {
          throw Error(ErrorCode::ParseError, "label out of range in row " + std::to_string(i), i);
        }
      }
    } else if (targets.size() != rows) {
      throw Error(ErrorCode::LengthMismatch, "target count != rows");
    }
  }
};

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<int> parse_label_int(const std::string& s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) return std::nullopt;
  return v;
}

}  // namespace detail

/// Loads a header-first CSV. Non-negative integer class labels are used as
/// given; any other label column is encoded in order of first appearance.
inline Dataset load_csv(std::istream& in, const std::string& target_column, TaskKind task) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::trim(line).empty()) {
      header = detail::split_csv_line(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorCode::EmptyFile, "no header row");
  for (auto& h : header) h = detail::trim(h);

  const auto target_it = std::find(header.begin(), header.end(), target_column);
  if (target_it == header.end()) {
    throw Error(ErrorCode::MissingColumn, "target column '" + target_column + "' not in header");
  }
  const std::size_t target_col = static_cast<std::size_t>(target_it - header.begin());

  Dataset d;
  d.task = task;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != target_col) d.feature_names.push_back(header[c]);
  }
  d.cols = d.feature_names.size();

  std::vector<std::string> raw_labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(header.size()),
                  line_no);
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const std::string cell = detail::trim(fields[c]);
      if (cell.empty()) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + " column '" + header[c] + "' is empty",
                    line_no);
      }
      if (c == target_col) {
        if (task == TaskKind::Classify) {
          raw_labels.push_back(cell);
        } else {
          auto v = detail::parse_double(cell);
          if (!v) {
            throw Error(ErrorCode::ParseError,
                        "line " + std::to_string(line_no) + " target '" + cell + "' is not numeric",
                        line_no);
          }
          d.targets.push_back(*v);
        }
        continue;
      }
      auto v = detail::parse_double(cell);
      if (!v) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(line_no) + " column '" + header[c] +
                        "' is not numeric ('" + cell + "')",
                    line_no);
      }
      d.features.push_back(*v);
    }
    ++d.rows;
  }
  if (d.rows == 0) throw Error(ErrorCode::EmptyFile, "no data rows");

  if (task == TaskKind::Classify) {
    const bool integral = std::all_of(raw_labels.begin(), raw_labels.end(),
                                      [](const std::string& s) { return detail::parse_label_int(s).has_value(); });
    if (integral) {
      int mx = 0;
      for (const auto& s : raw_labels) {
        const int v = *detail::parse_label_int(s);
        d.labels.push_back(v);
        mx = std::max(mx, v);
      }
      for (int c = 0; c <= mx; ++c) d.class_names.push_back(std::to_string(c));
    } else {
      std::map<std::string, int> code;
      for (const auto& s : raw_labels) {
        auto [it, inserted] = code.emplace(s, static_cast<int>(d.class_names.size()));
        if (inserted) d.class_names.push_back(s);
        d.labels.push_back(it->second);
      }
    }
  }
  d.validate();
  return d;
}

inline Dataset load_csv(const std::string& path, const std::string& target_column, TaskKind task) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return load_csv(in, target_column, task);
}

// ---------------------------------------------------------------------------
// Positivity scaling

enum class PreStep { SignedLog1p, Standardize };

inline std::string to_string(PreStep s) {
  return s == PreStep::SignedLog1p ? "signed-log1p" : "standardize";
}

/// Optional named transforms followed by per-feature MinMax into [lo, hi].
/// Out-of-range values are clamped, so every output is strictly positive.
struct Scaler {
  double lo = 1.0;
  double hi = 10.0;
  std::vector<PreStep> steps;
  std::vector<double> mean;
  std::vector<double> stdev;
  std::vector<double> min;
  std::vector<double> max;

  std::size_t dim() const { return min.size(); }

  double pre(std::size_t j, double v) const {
    for (PreStep s : steps) {
      if (s == PreStep::SignedLog1p) {
        v = std::copysign(std::log1p(std::abs(v)), v);
      } else {
        v = (v - mean[j]) / stdev[j];
      }
    }
    return v;
  }

  double apply(std::size_t j, double v) const {
    const double p = pre(j, v);
    const double range = max[j] - min[j];
    if (!(range > 0.0) || p <= min[j]) return lo;
    if (p >= max[j]) return hi;
    const double out = lo + (hi - lo) * (p - min[j]) / range;
    return std::clamp(out, lo, hi);
  }

  std::vector<double> apply_row(std::span<const double> x) const {
    if (x.size() != dim()) throw Error(ErrorCode::DimensionMismatch, "scaler dimension mismatch");
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = apply(j, x[j]);
    return out;
  }
};

inline Scaler fit_scaler(const Dataset& train, double lo = 1.0, double hi = 10.0,
                         std::vector<PreStep> steps = {}) {
  if (!(lo > 0.0) || !(hi > lo)) {
    throw Error(ErrorCode::InvalidRange, "scaler range must satisfy 0 < lo < hi");
  }
  if (train.empty()) throw Error(ErrorCode::EmptyData, "cannot fit a scaler on no rows");
  Scaler sc;
  sc.lo = lo;
  sc.hi = hi;
  sc.steps = std::move(steps);
  const std::size_t m = train.cols;
  sc.mean.assign(m, 0.0);
  sc.stdev.assign(m, 1.0);
  sc.min.assign(m, 0.0);
  sc.max.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    // Each pre-step is fitted on the output of the steps before it.
    std::vector<double> col(train.rows);
    for (std::size_t i = 0; i < train.rows; ++i) col[i] = train.at(i, j);
    for (PreStep s : sc.steps) {
      if (s == PreStep::SignedLog1p) {
        for (double& v : col) v = std::copysign(std::log1p(std::abs(v)), v);
      } else {
        double mu = 0.0;
        for (double v : col) mu += v;
        mu /= static_cast<double>(col.size());
        double var = 0.0;
        for (double v : col) var += (v - mu) * (v - mu);
        const double sd = std::sqrt(var / static_cast<double>(col.size()));
        sc.mean[j] = mu;
        sc.stdev[j] = sd > 0.0 ? sd : 1.0;
        for (double& v : col) v = (v - mu) / sc.stdev[j];
      }
    }
    const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
    sc.min[j] = *mn;
    sc.max[j] = *mx;
  }
  return sc;
}

inline Dataset apply_scaler(const Scaler& sc, const Dataset& data) {
  if (data.cols != sc.dim()) throw Error(ErrorCode::DimensionMismatch, "scaler dimension mismatch");
  Dataset out = data;
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out.at(i, j) = sc.apply(j, data.at(i, j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

struct SplitSpec {
  double test_fraction = 0.2;
  bool stratified = true;
  std::uint64_t seed = 42;
  std::optional<double> val_fraction;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct DataSplit {
  Dataset train;
  Dataset test;
  std::optional<Dataset> val;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
  std::vector<std::size_t> val_index;
};

/// Index partition of `rows` (given as original indices). The held-out share
/// of each stratum is round(fraction * stratum size).
inline SplitIndices split_indices(const Dataset& data, std::span<const std::size_t> rows,
                                  double fraction, bool stratified, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "split fraction must lie in (0, 1)");
  }
  if (stratified && data.task != TaskKind::Classify) {
    throw Error(ErrorCode::InvalidConfig, "stratified split requires class labels");
  }
  std::vector<std::vector<std::size_t>> strata;
  if (stratified) {
    strata.resize(data.num_classes());
    for (std::size_t i : rows) strata[static_cast<std::size_t>(data.labels[i])].push_back(i);
  } else {
    strata.emplace_back(rows.begin(), rows.end());
  }
  SplitIndices out;
  for (std::size_t c = 0; c < strata.size(); ++c) {
    auto& group = strata[c];
    if (group.empty()) continue;
    SplitMix64 rng(derive_seed(seed, c));
    shuffle(std::span<std::size_t>(group), rng);
    const auto n_hold = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(group.size())));
    if (n_hold < 1 || n_hold >= group.size()) {
      throw Error(ErrorCode::ClassTooSmall,
                  (stratified ? "class " + std::to_string(c) : std::string("dataset")) + " with " +
                      std::to_string(group.size()) + " rows cannot appear on both sides",
                  c);
    }
    out.test.insert(out.test.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_hold));
    out.train.insert(out.train.end(), group.begin() + static_cast<std::ptrdiff_t>(n_hold), group.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

inline DataSplit split(const Dataset& data, const SplitSpec& spec) {
  if (data.empty()) throw Error(ErrorCode::EmptyData, "cannot split an empty dataset");
  std::vector<std::size_t> all(data.rows);
  for (std::size_t i = 0; i < data.rows; ++i) all[i] = i;
  auto outer = split_indices(data, all, spec.test_fraction, spec.stratified, spec.seed);
  DataSplit out;
  out.test_index = std::move(outer.test);
  if (spec.val_fraction) {
    auto inner = split_indices(data, outer.train, *spec.val_fraction, spec.stratified,
                               derive_seed(spec.seed, 0x7661l));
    out.train_index = std::move(inner.train);
    out.val_index = std::move(inner.test);
    out.val = data.subset(out.val_index);
  } else {
    out.train_index = std::move(outer.train);
  }
  out.train = data.subset(out.train_index);
  out.test = data.subset(out.test_index);
  return out;
}

}  // namespace signolearn
