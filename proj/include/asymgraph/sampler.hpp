#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "asymgraph/common.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/log.hpp"

namespace asymgraph {

/// Per-hop neighbor caps; caps[0] applies to the hop adjacent to the seeds.
struct Fanouts {
  std::vector<std::size_t> caps;

  static Fanouts full(std::size_t layers) {
    return {std::vector<std::size_t>(layers, std::numeric_limits<std::size_t>::max())};
  }

  std::size_t layers() const { return caps.size(); }

  void validate() const {
    if (caps.empty()) throw UsageError("fanouts must have at least one layer");
    for (auto c : caps)
      if (c < 1) throw UsageError("fanout caps must be >= 1");
  }
};

/// Channel bits: which of a node's two representations a layer must produce.
enum Channel : std::uint8_t { kSource = 1, kTarget = 2, kBoth = 3 };

/// The four aggregation routes of one layer. Each route writes one channel of the
/// destination node from one channel of its neighbors:
///   CpOut: source  <- target of co-purchase out-neighbors
///   CvOut: source  <- source of co-view out-neighbors
///   CpIn:  target  <- source of co-purchase in-neighbors
///   CvIn:  target  <- target of co-view in-neighbors
enum class Route : std::uint8_t { CpOut = 0, CvOut = 1, CpIn = 2, CvIn = 3 };
inline constexpr std::array<Route, 4> kRoutes{Route::CpOut, Route::CvOut, Route::CpIn, Route::CvIn};

constexpr Channel route_dst_channel(Route r) {
  return (r == Route::CpOut || r == Route::CvOut) ? kSource : kTarget;
}
constexpr Channel route_src_channel(Route r) {
  return (r == Route::CvOut || r == Route::CpIn) ? kSource : kTarget;
}
constexpr RelationKind route_relation(Route r) {
  return (r == Route::CpOut || r == Route::CpIn) ? RelationKind::CoPurchase : RelationKind::CoView;
}
constexpr Direction route_direction(Route r) {
  return (r == Route::CpOut || r == Route::CvOut) ? Direction::Out : Direction::In;
}

/// One GNN layer: per route, rows are destination nodes (local to layer l) and
/// targets are source nodes (local to layer l-1).
struct Block {
  std::array<Csr, 4> routes;
  const Csr& route(Route r) const { return routes[static_cast<std::size_t>(r)]; }
};

struct ComputationBlocks {
  /// layer_nodes[0] are the input nodes, layer_nodes[L] the seeds. Global ids.
  std::vector<std::vector<NodeId>> layer_nodes;
  /// Channel mask per node per layer.
  std::vector<std::vector<std::uint8_t>> layer_channels;
  /// blocks[l-1] maps layer l-1 onto layer l.
  std::vector<Block> blocks;

  std::size_t num_layers() const { return blocks.size(); }
  const std::vector<NodeId>& seeds() const { return layer_nodes.back(); }
  const std::vector<NodeId>& inputs() const { return layer_nodes.front(); }
};

/// Samples the L-layer computation graph for `seeds` (both channels of every seed).
/// A neighbor list no longer than its cap is taken whole; otherwise exactly `cap`
/// neighbors are drawn uniformly without replacement. Each (relation, direction)
/// gets its own budget. Duplicated seeds are collapsed, keeping first occurrence.
template <NeighborSource Graph>
ComputationBlocks sample_blocks(const Graph& g, std::span<const NodeId> seeds, const Fanouts& fanouts,
                                std::uint64_t rng_seed) {
  fanouts.validate();
  const std::size_t L = fanouts.layers();
  const std::size_t n = g.num_nodes();

  std::vector<std::vector<NodeId>> nodes_rev;
  std::vector<std::vector<std::uint8_t>> channels_rev;
  std::vector<Block> blocks_rev;

  {
    std::vector<NodeId> top;
    std::vector<char> seen(n, 0);
    for (NodeId s : seeds) {
      if (s >= n) throw UsageError("seed id " + std::to_string(s) + " out of range");
      if (!seen[s]) {
        seen[s] = 1;
        top.push_back(s);
      }
    }
    nodes_rev.push_back(std::move(top));
    channels_rev.emplace_back(nodes_rev.back().size(), kBoth);
  }

  std::vector<std::uint8_t> need(n, 0);
  std::vector<NodeId> local(n, 0);
  for (std::size_t hop = 0; hop < L; ++hop) {
    const std::size_t layer = L - hop;
    const std::size_t cap = fanouts.caps[hop];
    const auto& dst_nodes = nodes_rev.back();
    const auto& dst_channels = channels_rev.back();
    const std::size_t m = dst_nodes.size();

    // Sampled global neighbor lists per destination row and route.
    std::array<std::vector<std::vector<NodeId>>, 4> picked;
    for (auto& p : picked) p.assign(m, {});
    parallel_for(m, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) {
        const NodeId u = dst_nodes[i];
        for (Route r : kRoutes) {
          if (!(dst_channels[i] & route_dst_channel(r))) continue;
          const auto nbrs = g.neighbors(u, route_relation(r), route_direction(r));
          auto& out = picked[static_cast<std::size_t>(r)][i];
          if (nbrs.size() <= cap) {
            out.assign(nbrs.begin(), nbrs.end());
          } else {
            std::mt19937_64 rng(derive_seed(rng_seed, layer, u, static_cast<unsigned>(r)));
            out.reserve(cap);
            std::sample(nbrs.begin(), nbrs.end(), std::back_inserter(out), cap, rng);
          }
        }
      }
    });

    std::vector<NodeId> frontier;
    for (Route r : kRoutes) {
      const auto src_ch = route_src_channel(r);
      for (const auto& list : picked[static_cast<std::size_t>(r)])
        for (NodeId v : list) {
          if (!need[v]) frontier.push_back(v);
          need[v] |= src_ch;
        }
    }
    std::sort(frontier.begin(), frontier.end());
    std::vector<std::uint8_t> frontier_channels(frontier.size());
    for (std::size_t j = 0; j < frontier.size(); ++j) {
      local[frontier[j]] = static_cast<NodeId>(j);
      frontier_channels[j] = need[frontier[j]];
      need[frontier[j]] = 0;
    }

    Block block;
    for (Route r : kRoutes) {
      auto& csr = block.routes[static_cast<std::size_t>(r)];
      csr.offsets.assign(m + 1, 0);
      for (std::size_t i = 0; i < m; ++i) {
        for (NodeId v : picked[static_cast<std::size_t>(r)][i]) csr.targets.push_back(local[v]);
        csr.offsets[i + 1] = csr.targets.size();
      }
    }
    blocks_rev.push_back(std::move(block));
    nodes_rev.push_back(std::move(frontier));
    channels_rev.push_back(std::move(frontier_channels));
  }

  ComputationBlocks out;
  out.layer_nodes.assign(std::make_move_iterator(nodes_rev.rbegin()), std::make_move_iterator(nodes_rev.rend()));
  out.layer_channels.assign(std::make_move_iterator(channels_rev.rbegin()),
                            std::make_move_iterator(channels_rev.rend()));
  out.blocks.assign(std::make_move_iterator(blocks_rev.rbegin()), std::make_move_iterator(blocks_rev.rend()));
  return out;
}

/// `per_edge` negatives for each positive edge, stored contiguously.
struct NegativeBatch {
  std::size_t per_edge = 0;
  std::vector<NodeId> ids;
  std::size_t degenerate_edges = 0;  // edges that fell back to sampling with replacement

  std::size_t num_edges() const { return per_edge == 0 ? 0 : ids.size() / per_edge; }
  std::span<const NodeId> for_edge(std::size_t i) const {
    return {ids.data() + i * per_edge, per_edge};
  }
};

/// Draws n_k negatives per positive (u, v) uniformly from the products, excluding u
/// and (when `exclude_positives`) the co-purchase out-neighbors of u.
inline NegativeBatch sample_negatives(const DirectedProductGraph& g, std::span<const Edge> pos_edges,
                                      std::size_t n_k, std::uint64_t rng_seed, bool exclude_positives = true) {
  if (n_k < 1) throw UsageError("n_k must be >= 1");
  const std::size_t n = g.num_nodes();
  if (n < 2 && !pos_edges.empty()) throw DataError("negative sampling needs at least two products");
  NegativeBatch out;
  out.per_edge = n_k;
  out.ids.assign(pos_edges.size() * n_k, 0);
  std::vector<char> degenerate(pos_edges.size(), 0);

  parallel_for(pos_edges.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const NodeId u = pos_edges[i].src;
      std::mt19937_64 rng(derive_seed(rng_seed, i, u));
      std::span<const NodeId> excluded;
      if (exclude_positives) excluded = g.neighbors(u, RelationKind::CoPurchase, Direction::Out);
      const std::size_t allowed = n - 1 - excluded.size();
      NodeId* dst = out.ids.data() + i * n_k;
      auto is_excluded = [&](NodeId z) {
        return z == u || std::binary_search(excluded.begin(), excluded.end(), z);
      };
      if (allowed >= n_k && allowed * 4 >= n) {
        std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
        for (std::size_t s = 0; s < n_k; ++s) {
          NodeId z;
          do z = pick(rng);
          while (is_excluded(z));
          dst[s] = z;
        }
        continue;
      }
      // Sparse allowed set: enumerate it and draw from the list.
      std::vector<NodeId> pool;
      for (NodeId z = 0; z < n; ++z)
        if (!is_excluded(z)) pool.push_back(z);
      if (pool.empty()) {
        for (NodeId z = 0; z < n; ++z)
          if (z != u) pool.push_back(z);
      }
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      if (pool.size() < n_k) degenerate[i] = 1;
      for (std::size_t s = 0; s < n_k; ++s) dst[s] = pool[pick(rng)];
    }
  });
  for (char d : degenerate) out.degenerate_edges += d ? 1 : 0;
  if (out.degenerate_edges > 0)
    logger().warn("negative sampling: {} positive edge(s) had fewer than {} legal negatives; sampled with replacement",
                  out.degenerate_edges, n_k);
  return out;
}

}  // namespace asymgraph
