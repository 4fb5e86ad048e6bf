#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "asymgraph/common.hpp"

namespace asymgraph {

/// Bijection between opaque external product keys and dense ids.
class KeyMap {
 public:
  KeyMap() = default;
  explicit KeyMap(std::vector<std::string> keys) {
    for (auto& k : keys) insert(std::move(k));
  }

  /// Returns the id of `key`, registering it if new.
  NodeId insert(std::string key) {
    auto [it, inserted] = index_.try_emplace(key, static_cast<NodeId>(keys_.size()));
    if (inserted) keys_.push_back(std::move(key));
    return it->second;
  }

  bool contains(std::string_view key) const { return index_.count(std::string(key)) > 0; }

  NodeId id(std::string_view key) const {
    auto it = index_.find(std::string(key));
    if (it == index_.end()) throw DataError("unknown product key '" + std::string(key) + "'");
    return it->second;
  }

  const std::string& key(NodeId id) const {
    if (id >= keys_.size()) throw UsageError("product id " + std::to_string(id) + " out of range");
    return keys_[id];
  }

  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }

 private:
  std::vector<std::string> keys_;
  std::unordered_map<std::string, NodeId> index_;
};

/// Anything that exposes per-node neighbor lists like DirectedProductGraph.
template <typename G>
concept NeighborSource = requires(const G& g, NodeId u) {
  { g.num_nodes() } -> std::convertible_to<std::size_t>;
  { g.neighbors(u, RelationKind::CoPurchase, Direction::Out) } -> std::convertible_to<std::span<const NodeId>>;
};

/// Compressed adjacency: neighbors of row u are targets[offsets[u], offsets[u+1]), sorted ascending.
struct Csr {
  std::vector<std::size_t> offsets{0};
  std::vector<NodeId> targets;

  static Csr from_sorted(std::size_t num_rows, const EdgeList& sorted_unique) {
    Csr c;
    c.offsets.assign(num_rows + 1, 0);
    c.targets.reserve(sorted_unique.size());
    for (const auto& e : sorted_unique) {
      ++c.offsets[e.src + 1];
      c.targets.push_back(e.dst);
    }
    for (std::size_t i = 0; i < num_rows; ++i) c.offsets[i + 1] += c.offsets[i];
    return c;
  }

  std::span<const NodeId> row(NodeId u) const {
    return {targets.data() + offsets[u], targets.data() + offsets[u + 1]};
  }
};

struct GraphStats {
  std::size_t num_nodes = 0;
  std::size_t cp_edges = 0;
  std::size_t cv_pairs = 0;  // undirected co-view pairs (each stored in both directions)
  std::size_t one_way_cp = 0;
  std::size_t reciprocal_cp_pairs = 0;
  double avg_degree = 0.0;      // (cp edges + cv pairs) / nodes
  double directed_share = 0.0;  // one-way cp pairs / all cp-connected pairs
};

/// Directed product graph over co-purchase (directed) and co-view (symmetric) relations.
/// Immutable after construction.
class DirectedProductGraph {
 public:
  DirectedProductGraph() : DirectedProductGraph(0, {}, {}) {}

  /// Builds the graph from dense-id pairs. Self-pairs are dropped, duplicates merged,
  /// co-view pairs stored in both directions.
  DirectedProductGraph(std::size_t num_nodes, EdgeList cp_pairs, const EdgeList& cv_pairs)
      : num_nodes_(num_nodes) {
    auto check = [num_nodes](const Edge& e) {
      if (e.src >= num_nodes || e.dst >= num_nodes)
        throw DataError("edge (" + std::to_string(e.src) + "," + std::to_string(e.dst) +
                        ") references a node outside [0," + std::to_string(num_nodes) + ")");
    };
    std::erase_if(cp_pairs, [](const Edge& e) { return e.src == e.dst; });
    for (const auto& e : cp_pairs) check(e);
    std::sort(cp_pairs.begin(), cp_pairs.end());
    cp_pairs.erase(std::unique(cp_pairs.begin(), cp_pairs.end()), cp_pairs.end());
    cp_edges_ = std::move(cp_pairs);

    cv_edges_.reserve(cv_pairs.size() * 2);
    for (const auto& e : cv_pairs) {
      if (e.src == e.dst) continue;
      check(e);
      cv_edges_.push_back(e);
      cv_edges_.push_back({e.dst, e.src});
    }
    std::sort(cv_edges_.begin(), cv_edges_.end());
    cv_edges_.erase(std::unique(cv_edges_.begin(), cv_edges_.end()), cv_edges_.end());

    cp_out_ = Csr::from_sorted(num_nodes_, cp_edges_);
    cp_in_ = Csr::from_sorted(num_nodes_, reversed_sorted(cp_edges_));
    cv_out_ = Csr::from_sorted(num_nodes_, cv_edges_);
    cv_in_ = Csr::from_sorted(num_nodes_, reversed_sorted(cv_edges_));
  }

  std::size_t num_nodes() const { return num_nodes_; }

  std::span<const NodeId> neighbors(NodeId u, RelationKind kind, Direction dir) const {
    if (u >= num_nodes_)
      throw UsageError("node id " + std::to_string(u) + " out of range (num_nodes=" +
                       std::to_string(num_nodes_) + ")");
    return adjacency(kind, dir).row(u);
  }

  std::size_t degree(NodeId u, RelationKind kind, Direction dir) const {
    return neighbors(u, kind, dir).size();
  }

  bool has_edge(NodeId u, NodeId v, RelationKind kind) const {
    if (u >= num_nodes_ || v >= num_nodes_) return false;
    const auto row = adjacency(kind, Direction::Out).row(u);
    return std::binary_search(row.begin(), row.end(), v);
  }

  /// Co-purchase edges sorted by (src, dst).
  const EdgeList& cp_edges() const { return cp_edges_; }
  /// Co-view edges, both directions materialized, sorted by (src, dst).
  const EdgeList& cv_edges() const { return cv_edges_; }

  /// Co-view pairs with src < dst.
  EdgeList cv_pairs() const {
    EdgeList out;
    out.reserve(cv_edges_.size() / 2);
    for (const auto& e : cv_edges_)
      if (e.src < e.dst) out.push_back(e);
    return out;
  }

  const Csr& adjacency(RelationKind kind, Direction dir) const {
    if (kind == RelationKind::CoPurchase) return dir == Direction::Out ? cp_out_ : cp_in_;
    return dir == Direction::Out ? cv_out_ : cv_in_;
  }

  friend bool operator==(const DirectedProductGraph& a, const DirectedProductGraph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.cp_edges_ == b.cp_edges_ && a.cv_edges_ == b.cv_edges_;
  }

 private:
  static EdgeList reversed_sorted(const EdgeList& edges) {
    EdgeList rev;
    rev.reserve(edges.size());
    for (const auto& e : edges) rev.push_back({e.dst, e.src});
    std::sort(rev.begin(), rev.end());
    return rev;
  }

  std::size_t num_nodes_ = 0;
  EdgeList cp_edges_;
  EdgeList cv_edges_;
  Csr cp_out_, cp_in_, cv_out_, cv_in_;
};

inline DirectedProductGraph build_graph(std::size_t num_nodes, const EdgeList& cp_pairs,
                                        const EdgeList& cv_pairs) {
  return DirectedProductGraph(num_nodes, cp_pairs, cv_pairs);
}

/// Co-purchase edges whose reverse is absent, sorted by (src, dst).
inline EdgeList one_way_cp_edges(const DirectedProductGraph& g) {
  EdgeList out;
  for (const auto& e : g.cp_edges())
    if (!g.has_edge(e.dst, e.src, RelationKind::CoPurchase)) out.push_back(e);
  return out;
}

inline GraphStats graph_stats(const DirectedProductGraph& g) {
  GraphStats s;
  s.num_nodes = g.num_nodes();
  s.cp_edges = g.cp_edges().size();
  s.cv_pairs = g.cv_edges().size() / 2;
  s.one_way_cp = one_way_cp_edges(g).size();
  s.reciprocal_cp_pairs = (s.cp_edges - s.one_way_cp) / 2;
  if (s.num_nodes > 0)
    s.avg_degree = static_cast<double>(s.cp_edges + s.cv_pairs) / static_cast<double>(s.num_nodes);
  const std::size_t pairs = s.one_way_cp + s.reciprocal_cp_pairs;
  if (pairs > 0) s.directed_share = static_cast<double>(s.one_way_cp) / static_cast<double>(pairs);
  return s;
}

/// Same node set and co-view edges as `g`, with the co-purchase edges replaced.
inline DirectedProductGraph with_cp_edges(const DirectedProductGraph& g, const EdgeList& cp) {
  return DirectedProductGraph(g.num_nodes(), cp, g.cv_pairs());
}

/// Same node set and co-purchase edges as `g`, without co-view edges.
inline DirectedProductGraph without_cv(const DirectedProductGraph& g) {
  return DirectedProductGraph(g.num_nodes(), g.cp_edges(), {});
}

// ---------------------------------------------------------------------------
// Edge file: `<src_key>\t<dst_key>\t<cp|cv>`, '#' comments, blank lines ignored.

struct EdgeFileContents {
  EdgeList cp;
  EdgeList cv;
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

inline std::string join_line_numbers(const std::vector<std::size_t>& lines, std::size_t max_shown = 20) {
  std::string out;
  for (std::size_t i = 0; i < lines.size() && i < max_shown; ++i) {
    if (i) out += ",";
    out += std::to_string(lines[i]);
  }
  if (lines.size() > max_shown) out += ",... (" + std::to_string(lines.size()) + " total)";
  return out;
}

}  // namespace detail

/// Parses an edge file. With `register_keys` unknown keys are added to `keys`;
/// otherwise they are collected and reported with their line numbers.
inline EdgeFileContents read_edge_file(std::istream& in, KeyMap& keys, bool register_keys) {
  EdgeFileContents out;
  std::vector<std::size_t> malformed;
  std::vector<std::size_t> unknown;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto sv = detail::strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto fields = detail::split(sv, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() ||
        (fields[2] != "cp" && fields[2] != "cv")) {
      malformed.push_back(lineno);
      continue;
    }
    NodeId u = 0, v = 0;
    if (register_keys) {
      u = keys.insert(std::string(fields[0]));
      v = keys.insert(std::string(fields[1]));
    } else {
      if (!keys.contains(fields[0]) || !keys.contains(fields[1])) {
        unknown.push_back(lineno);
        continue;
      }
      u = keys.id(fields[0]);
      v = keys.id(fields[1]);
    }
    (fields[2] == "cp" ? out.cp : out.cv).push_back({u, v});
  }
  if (!malformed.empty())
    throw DataError("malformed edge line(s): " + detail::join_line_numbers(malformed) +
                    " (expected <src>\\t<dst>\\t<cp|cv>)");
  if (!unknown.empty())
    throw DataError("unknown product key on edge line(s): " + detail::join_line_numbers(unknown));
  return out;
}

/// Writes cp edges then cv pairs (src < dst), each sorted by dense id.
inline void write_edge_file(std::ostream& out, const DirectedProductGraph& g, const KeyMap& keys) {
  for (const auto& e : g.cp_edges()) out << keys.key(e.src) << '\t' << keys.key(e.dst) << "\tcp\n";
  for (const auto& e : g.cv_pairs()) out << keys.key(e.src) << '\t' << keys.key(e.dst) << "\tcv\n";
}

}  // namespace asymgraph
