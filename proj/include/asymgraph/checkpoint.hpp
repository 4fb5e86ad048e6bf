#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "asymgraph/common.hpp"
#include "asymgraph/features.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/model.hpp"

namespace asymgraph {

// Binary layout (all integers and floats little-endian):
//   magic[8] | u32 version | u32 L | u64 d_in | u64 d_h | W^1..W^L row-major float64
inline constexpr std::array<char, 8> kModelMagic{'A', 'G', 'M', 'O', 'D', 'E', 'L', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointHeader {
  std::uint32_t version = kCheckpointVersion;
  std::uint32_t layers = 0;
  std::uint64_t d_in = 0;
  std::uint64_t d_h = 0;
};

namespace binio {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b{};
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 4);
}

inline void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 8)) throw DataError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

inline std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw DataError("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

inline double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

template <typename Scalar>
void put_matrix(std::ostream& out, const RowMatrix<Scalar>& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(out, static_cast<double>(m.data()[i]));
}

template <typename Scalar>
RowMatrix<Scalar> get_matrix(std::istream& in, std::size_t rows, std::size_t cols) {
  RowMatrix<Scalar> m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(get_f64(in));
  return m;
}

inline void put_magic(std::ostream& out, const std::array<char, 8>& magic) { out.write(magic.data(), 8); }

inline void expect_magic(std::istream& in, const std::array<char, 8>& magic, const char* what) {
  std::array<char, 8> got{};
  if (!in.read(got.data(), 8) || got != magic) throw DataError(std::string("bad magic bytes: not a ") + what);
}

}  // namespace binio

inline void write_header(std::ostream& out, const CheckpointHeader& h) {
  binio::put_u32(out, h.version);
  binio::put_u32(out, h.layers);
  binio::put_u64(out, h.d_in);
  binio::put_u64(out, h.d_h);
}

inline CheckpointHeader read_header(std::istream& in) {
  CheckpointHeader h;
  h.version = binio::get_u32(in);
  if (h.version != kCheckpointVersion)
    throw DataError("checkpoint version " + std::to_string(h.version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  h.layers = binio::get_u32(in);
  h.d_in = binio::get_u64(in);
  h.d_h = binio::get_u64(in);
  if (h.layers < 1 || h.layers > 64 || h.d_in < 1 || h.d_h < 1 || h.d_in > (1u << 20) || h.d_h > (1u << 20))
    throw DataError("checkpoint header has implausible dimensions");
  return h;
}

template <typename Scalar>
CheckpointHeader header_of(const ModelParams<Scalar>& p) {
  return {kCheckpointVersion, static_cast<std::uint32_t>(p.layers()), p.d_in(), p.d_h()};
}

template <typename Scalar>
void write_weights(std::ostream& out, const std::vector<RowMatrix<Scalar>>& ws) {
  for (const auto& w : ws) binio::put_matrix(out, w);
}

template <typename Scalar>
std::vector<RowMatrix<Scalar>> read_weights(std::istream& in, const CheckpointHeader& h) {
  std::vector<RowMatrix<Scalar>> ws;
  for (std::uint32_t l = 0; l < h.layers; ++l)
    ws.push_back(binio::get_matrix<Scalar>(in, l == 0 ? h.d_in : h.d_h, h.d_h));
  return ws;
}

template <typename Scalar>
void save_model(std::ostream& out, const ModelParams<Scalar>& params) {
  binio::put_magic(out, kModelMagic);
  write_header(out, header_of(params));
  write_weights(out, params.weights);
  if (!out) throw DataError("failed to write model checkpoint");
}

template <typename Scalar = double>
ModelParams<Scalar> load_model(std::istream& in) {
  binio::expect_magic(in, kModelMagic, "model checkpoint");
  const auto h = read_header(in);
  ModelParams<Scalar> p;
  p.weights = read_weights<Scalar>(in, h);
  p.validate();
  return p;
}

template <typename Scalar>
void save_model_file(const std::string& path, const ModelParams<Scalar>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  save_model(out, params);
}

template <typename Scalar = double>
ModelParams<Scalar> load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model checkpoint '" + path + "'");
  return load_model<Scalar>(in);
}

// ---------------------------------------------------------------------------
// Embedding dump: `<num_nodes>\t<d_h>` then `<key>\tS:<f1>,...\tT:<f1>,...`

template <typename Scalar>
void write_embeddings(std::ostream& out, const KeyMap& keys, const DualEmbeddings<Scalar>& emb) {
  out << emb.size() << '\t' << emb.dim() << '\n';
  auto put_row = [&](const RowMatrix<Scalar>& m, std::size_t r) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << fmt::format("{}", static_cast<double>(m(static_cast<Eigen::Index>(r), j)));
    }
  };
  for (std::size_t i = 0; i < emb.size(); ++i) {
    out << keys.key(emb.ids[i]) << "\tS:";
    put_row(emb.theta_s, i);
    out << "\tT:";
    put_row(emb.theta_t, i);
    out << '\n';
  }
}

template <typename Scalar = double>
struct EmbeddingFile {
  KeyMap keys;
  DualEmbeddings<Scalar> embeddings;  // row i is key i
};

template <typename Scalar = double>
EmbeddingFile<Scalar> read_embeddings(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw DataError("embedding file is empty");
  ++lineno;
  const auto header = detail::split(detail::strip_cr(line), '\t');
  double n_d = 0, d_d = 0;
  if (header.size() != 2 || !detail::parse_double(header[0], n_d) || !detail::parse_double(header[1], d_d) || d_d < 1)
    throw DataError("embedding file line 1: expected header <num_nodes>\\t<d_h>");
  const auto n = static_cast<std::size_t>(n_d);
  const auto d = static_cast<std::size_t>(d_d);
  EmbeddingFile<Scalar> out;
  RowMatrix<Scalar> s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  RowMatrix<Scalar> t(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  auto parse_row = [&](std::string_view field, std::string_view prefix, RowMatrix<Scalar>& m, std::size_t r) {
    if (field.substr(0, prefix.size()) != prefix)
      throw DataError("embedding file line " + std::to_string(lineno) + ": expected '" + std::string(prefix) + "'");
    const auto parts = detail::split(field.substr(prefix.size()), ',');
    if (parts.size() != d)
      throw DataError("embedding file line " + std::to_string(lineno) + ": expected " + std::to_string(d) + " values");
    for (std::size_t j = 0; j < d; ++j) {
      double v = 0;
      if (!detail::parse_double(parts[j], v))
        throw DataError("embedding file line " + std::to_string(lineno) + ": bad value");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = static_cast<Scalar>(v);
    }
  };
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto sv = detail::strip_cr(line);
    if (sv.empty()) continue;
    const auto fields = detail::split(sv, '\t');
    if (fields.size() != 3) throw DataError("embedding file line " + std::to_string(lineno) + ": expected 3 fields");
    if (rows >= n) throw DataError("embedding file has more rows than declared");
    if (out.keys.contains(fields[0]))
      throw DataError("embedding file line " + std::to_string(lineno) + ": duplicate key");
    out.keys.insert(std::string(fields[0]));
    parse_row(fields[1], "S:", s, rows);
    parse_row(fields[2], "T:", t, rows);
    ++rows;
  }
  if (rows != n) throw DataError("embedding file declares " + std::to_string(n) + " rows but has " + std::to_string(rows));
  std::vector<NodeId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<NodeId>(i);
  out.embeddings = DualEmbeddings<Scalar>(std::move(ids), std::move(s), std::move(t));
  return out;
}

}  // namespace asymgraph
