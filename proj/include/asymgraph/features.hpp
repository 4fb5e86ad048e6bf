#pragma once

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "asymgraph/common.hpp"
#include "asymgraph/graph.hpp"

namespace asymgraph {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense per-product input features, one row per dense id.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  explicit FeatureMatrix(RowMatrix<double> values) : values_(std::move(values)) {
    if (!values_.allFinite()) throw DataError("feature matrix contains non-finite entries");
  }

  std::size_t num_nodes() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(values_.cols()); }
  const RowMatrix<double>& values() const { return values_; }
  auto row(NodeId u) const { return values_.row(u); }

 private:
  RowMatrix<double> values_;
};

struct FeatureFile {
  KeyMap keys;
  FeatureMatrix features;
};

namespace detail {

inline bool parse_double(std::string_view s, double& out) {
  const auto* b = s.data();
  const auto* e = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(b, e, out);
  return ec == std::errc{} && ptr == e && std::isfinite(out);
}

}  // namespace detail

/// Reads `<num_nodes>\t<d_in>` then `<key>\t<f1>,<f2>,...` per product. Row order
/// defines the dense ids unless `existing` is given, in which case rows are placed at
/// the ids of that map and every key must be present in it.
inline FeatureFile read_feature_file(std::istream& in, const KeyMap* existing = nullptr) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      const auto sv = detail::strip_cr(line);
      if (!sv.empty() && sv.front() != '#') {
        line.assign(sv);
        return true;
      }
    }
    return false;
  };
  if (!next_line()) throw DataError("feature file is empty");
  const auto header = detail::split(line, '\t');
  double n_d = 0, d_d = 0;
  if (header.size() != 2 || !detail::parse_double(header[0], n_d) || !detail::parse_double(header[1], d_d) ||
      n_d < 0 || d_d < 1 || n_d != std::floor(n_d) || d_d != std::floor(d_d))
    throw DataError("feature file line " + std::to_string(lineno) + ": expected header <num_nodes>\\t<d_in>");
  const auto n = static_cast<std::size_t>(n_d);
  const auto d = static_cast<std::size_t>(d_d);
  if (existing && existing->size() != n)
    throw DataError("feature file declares " + std::to_string(n) + " products but the key map has " +
                    std::to_string(existing->size()));

  FeatureFile out;
  RowMatrix<double> values(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::vector<char> seen(n, 0);
  std::size_t rows = 0;
  while (next_line()) {
    const auto fields = detail::split(line, '\t');
    if (fields.size() != 2 || fields[0].empty())
      throw DataError("feature file line " + std::to_string(lineno) + ": expected <key>\\t<f1>,<f2>,...");
    const auto parts = detail::split(fields[1], ',');
    if (parts.size() != d)
      throw DataError("feature file line " + std::to_string(lineno) + ": expected " + std::to_string(d) +
                      " values, got " + std::to_string(parts.size()));
    NodeId id = 0;
    if (existing) {
      if (!existing->contains(fields[0]))
        throw DataError("feature file line " + std::to_string(lineno) + ": unknown product key '" +
                        std::string(fields[0]) + "'");
      id = existing->id(fields[0]);
    } else {
      if (out.keys.contains(fields[0]))
        throw DataError("feature file line " + std::to_string(lineno) + ": duplicate key '" +
                        std::string(fields[0]) + "'");
      if (out.keys.size() >= n)
        throw DataError("feature file line " + std::to_string(lineno) + ": more rows than declared (" +
                        std::to_string(n) + ")");
      id = out.keys.insert(std::string(fields[0]));
    }
    if (seen[id]) throw DataError("feature file line " + std::to_string(lineno) + ": duplicate key");
    seen[id] = 1;
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0;
      if (!detail::parse_double(parts[j], v))
        throw DataError("feature file line " + std::to_string(lineno) + ": bad value '" +
                        std::string(parts[j]) + "' at column " + std::to_string(j + 1));
      values(static_cast<Eigen::Index>(id), static_cast<Eigen::Index>(j)) = v;
    }
    ++rows;
  }
  if (rows != n)
    throw DataError("feature file declares " + std::to_string(n) + " products but has " + std::to_string(rows) +
                    " rows");
  if (existing) out.keys = *existing;
  out.features = FeatureMatrix(std::move(values));
  return out;
}

inline void write_feature_file(std::ostream& out, const KeyMap& keys, const FeatureMatrix& features) {
  out << features.num_nodes() << '\t' << features.dim() << '\n';
  const auto& x = features.values();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    out << keys.key(static_cast<NodeId>(i)) << '\t';
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      if (j) out << ',';
      out << fmt::format("{}", x(i, j));
    }
    out << '\n';
  }
}

}  // namespace asymgraph
