#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "asymgraph/coldstart.hpp"
#include "asymgraph/common.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/model.hpp"
#include "asymgraph/retrieval.hpp"

namespace asymgraph {

// ---------------------------------------------------------------------------
// Splits

enum class SplitKind : std::uint8_t { EdgeSplit, NodeSplit, SelectionBiasSplit };

inline const char* split_name(SplitKind k) {
  switch (k) {
    case SplitKind::EdgeSplit: return "edge";
    case SplitKind::NodeSplit: return "node";
    case SplitKind::SelectionBiasSplit: return "selection-bias";
  }
  return "?";
}

struct SplitRatios {
  double train = 0.75;
  double val = 0.05;
  double test = 0.20;

  void validate() const {
    if (train < 0 || val < 0 || test < 0) throw UsageError("split ratios must be non-negative");
    if (std::abs(train + val + test - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");
  }
};

/// Train/validation/test partitions of the co-purchase edges (and, for node splits,
/// of the nodes). Co-view edges never enter validation or test sets.
struct EvalSplit {
  SplitKind kind = SplitKind::EdgeSplit;
  SplitRatios ratios;
  std::uint64_t seed = 0;
  EdgeList train;     // co-purchase edges visible during training
  EdgeList train_cv;  // co-view pairs visible during training
  EdgeList val;
  EdgeList test;
  EdgeList synthesized;  // selection-bias only: transitive edges added to test (sorted)
  std::size_t synthesized_candidates = 0;
  std::vector<NodeId> train_nodes, val_nodes, test_nodes;  // node split only

  /// Graph used for training and test-time inference.
  DirectedProductGraph train_graph(std::size_t num_nodes, bool with_cv = true) const {
    return DirectedProductGraph(num_nodes, train, with_cv ? train_cv : EdgeList{});
  }
};

namespace detail {

inline std::array<std::size_t, 3> partition_sizes(std::size_t m, const SplitRatios& r) {
  const auto n_train = static_cast<std::size_t>(std::llround(r.train * static_cast<double>(m)));
  const auto n_val = std::min(m - std::min(m, n_train), static_cast<std::size_t>(std::llround(r.val * static_cast<double>(m))));
  const auto tr = std::min(m, n_train);
  return {tr, n_val, m - tr - n_val};
}

}  // namespace detail

/// Uniform random partition of the co-purchase edges; all co-view pairs stay in training.
inline EvalSplit make_edge_split(const DirectedProductGraph& g, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  EdgeList edges = g.cp_edges();
  std::mt19937_64 rng(derive_seed(seed, 0xE5));
  std::shuffle(edges.begin(), edges.end(), rng);
  const auto [n_train, n_val, n_test] = detail::partition_sizes(edges.size(), ratios);
  EvalSplit s;
  s.kind = SplitKind::EdgeSplit;
  s.ratios = ratios;
  s.seed = seed;
  s.train.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train),
               edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), edges.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  s.train_cv = g.cv_pairs();
  return s;
}

/// Edge split plus transitive test edges (a, c) for every training edge (a, b) and
/// co-view pair (b, c) with (a, c) not a co-purchase edge. At most |test| edges are added.
inline EvalSplit make_selection_bias_split(const DirectedProductGraph& g, const SplitRatios& ratios,
                                           std::uint64_t seed) {
  EvalSplit s = make_edge_split(g, ratios, seed);
  s.kind = SplitKind::SelectionBiasSplit;
  EdgeList cand;
  for (const auto& ab : s.train)
    for (NodeId c : g.neighbors(ab.dst, RelationKind::CoView, Direction::Out))
      if (c != ab.src && !g.has_edge(ab.src, c, RelationKind::CoPurchase)) cand.push_back({ab.src, c});
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  s.synthesized_candidates = cand.size();
  const std::size_t cap = s.test.size();
  if (cand.size() > cap) {
    EdgeList picked;
    std::mt19937_64 rng(derive_seed(seed, 0x5B));
    std::sample(cand.begin(), cand.end(), std::back_inserter(picked), cap, rng);
    cand = std::move(picked);
  }
  s.synthesized = cand;
  s.test.insert(s.test.end(), cand.begin(), cand.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

/// Partition of the nodes. Training sees the induced subgraph on training nodes;
/// validation/test edges are co-purchase edges from held-out nodes to training nodes.
inline EvalSplit make_node_split(const DirectedProductGraph& g, const SplitRatios& ratios, std::uint64_t seed) {
  ratios.validate();
  std::vector<NodeId> nodes(g.num_nodes());
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<NodeId>(i);
  std::mt19937_64 rng(derive_seed(seed, 0xA0));
  std::shuffle(nodes.begin(), nodes.end(), rng);
  const auto [n_train, n_val, n_test] = detail::partition_sizes(nodes.size(), ratios);
  EvalSplit s;
  s.kind = SplitKind::NodeSplit;
  s.ratios = ratios;
  s.seed = seed;
  s.train_nodes.assign(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val_nodes.assign(nodes.begin() + static_cast<std::ptrdiff_t>(n_train),
                     nodes.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test_nodes.assign(nodes.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), nodes.end());
  std::sort(s.train_nodes.begin(), s.train_nodes.end());
  std::sort(s.val_nodes.begin(), s.val_nodes.end());
  std::sort(s.test_nodes.begin(), s.test_nodes.end());

  std::vector<std::uint8_t> part(g.num_nodes(), 0);  // 0 train, 1 val, 2 test
  for (NodeId v : s.val_nodes) part[v] = 1;
  for (NodeId v : s.test_nodes) part[v] = 2;
  for (const auto& e : g.cp_edges()) {
    if (part[e.src] == 0 && part[e.dst] == 0) s.train.push_back(e);
    else if (part[e.src] == 1 && part[e.dst] == 0) s.val.push_back(e);
    else if (part[e.src] == 2 && part[e.dst] == 0) s.test.push_back(e);
  }
  for (const auto& e : g.cv_pairs())
    if (part[e.src] == 0 && part[e.dst] == 0) s.train_cv.push_back(e);
  return s;
}

// ---------------------------------------------------------------------------
// Metrics

inline const std::vector<std::size_t>& default_ks() {
  static const std::vector<std::size_t> ks{5, 10, 20};
  return ks;
}

struct MetricReport {
  std::string task;
  std::vector<std::size_t> ks;
  std::vector<double> hitrate;
  std::vector<double> mrr;
  std::optional<double> auc;
  std::size_t num_queries = 0;
  std::vector<std::pair<std::string, std::string>> notes;  // written as report header lines

  double hitrate_at(std::size_t k) const { return hitrate.at(index_of(k)); }
  double mrr_at(std::size_t k) const { return mrr.at(index_of(k)); }

 private:
  std::size_t index_of(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i)
      if (ks[i] == k) return i;
    throw UsageError("k=" + std::to_string(k) + " not in report");
  }
};

/// HitRate@k and MRR@k from 1-based ranks of each test item (0 = not rankable).
inline MetricReport hitrate_mrr(std::span<const std::size_t> ranks, std::span<const std::size_t> ks) {
  MetricReport r;
  r.ks.assign(ks.begin(), ks.end());
  r.num_queries = ranks.size();
  for (std::size_t k : ks) {
    double hits = 0, rr = 0;
    for (std::size_t rank : ranks)
      if (rank >= 1 && rank <= k) {
        hits += 1.0;
        rr += 1.0 / static_cast<double>(rank);
      }
    const double n = ranks.empty() ? 1.0 : static_cast<double>(ranks.size());
    r.hitrate.push_back(ranks.empty() ? 0.0 : hits / n);
    r.mrr.push_back(ranks.empty() ? 0.0 : rr / n);
  }
  return r;
}

/// Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg).
inline double auc_mann_whitney(std::span<const double> pos, std::span<const double> neg) {
  if (pos.empty() || neg.empty()) throw UsageError("AUC needs at least one positive and one negative score");
  std::vector<double> sorted_neg(neg.begin(), neg.end());
  std::sort(sorted_neg.begin(), sorted_neg.end());
  double wins = 0.0;
  for (double p : pos) {
    const auto lo = std::lower_bound(sorted_neg.begin(), sorted_neg.end(), p);
    const auto hi = std::upper_bound(lo, sorted_neg.end(), p);
    wins += static_cast<double>(lo - sorted_neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// 1-based rank of `target` under ranks_before ordering among ids not skipped.
template <typename Skip>
std::size_t rank_of(std::span<const double> scores, NodeId target, Skip&& skip) {
  if (skip(target)) return 0;
  const double st = scores[target];
  std::size_t better = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    if (id == target || skip(id)) continue;
    if (scores[i] > st || (scores[i] == st && id < target)) ++better;
  }
  return better + 1;
}

/// Filtered ranks for each test edge (u, v): candidates are all products except u and
/// u's co-purchase out-neighbors in `train_graph` (or all but u when unfiltered).
/// `allowed`, when non-empty, further restricts candidates.
template <typename Scalar>
std::vector<std::size_t> filtered_ranks(const DualEmbeddings<Scalar>& emb, const DirectedProductGraph& train_graph,
                                        std::span<const Edge> test, bool filtered = true,
                                        std::span<const std::uint8_t> allowed = {}) {
  // Group by query so each score vector is computed once.
  std::map<NodeId, std::vector<std::size_t>> by_query;
  for (std::size_t i = 0; i < test.size(); ++i) by_query[test[i].src].push_back(i);
  std::vector<std::pair<NodeId, std::vector<std::size_t>>> groups(by_query.begin(), by_query.end());
  std::vector<std::size_t> ranks(test.size(), 0);
  const RowMatrix<double> T = emb.theta_t.template cast<double>();
  parallel_for(groups.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t gi = b; gi < e; ++gi) {
      const NodeId u = groups[gi].first;
      const Eigen::RowVectorXd su = emb.theta_s.row(static_cast<Eigen::Index>(emb.require_row(u))).template cast<double>();
      Eigen::VectorXd scores(static_cast<Eigen::Index>(emb.size()));
      scores.setZero();
      // Score by global id, so rows must be id-ordered.
      const Eigen::VectorXd raw = T * su.transpose();
      for (std::size_t r = 0; r < emb.size(); ++r) scores(static_cast<Eigen::Index>(emb.ids[r])) = raw(static_cast<Eigen::Index>(r));
      const auto nbrs = train_graph.neighbors(u, RelationKind::CoPurchase, Direction::Out);
      auto skip = [&](NodeId id) {
        if (id == u) return true;
        if (!allowed.empty() && !allowed[id]) return true;
        return filtered && std::binary_search(nbrs.begin(), nbrs.end(), id);
      };
      const std::span<const double> sv(scores.data(), static_cast<std::size_t>(scores.size()));
      for (std::size_t idx : groups[gi].second) ranks[idx] = rank_of(sv, test[idx].dst, skip);
    }
  }, 4);
  return ranks;
}

template <typename Scalar>
double relevance(const DualEmbeddings<Scalar>& emb, NodeId q, NodeId v) {
  return static_cast<double>(emb.theta_s.row(static_cast<Eigen::Index>(emb.require_row(q)))
                                 .dot(emb.theta_t.row(static_cast<Eigen::Index>(emb.require_row(v)))));
}

/// Existence AUC: test edges against an equal number of uniform non-edges of `full`.
template <typename Scalar>
double auc_existence(const DualEmbeddings<Scalar>& emb, const DirectedProductGraph& full, std::span<const Edge> test,
                     std::uint64_t seed) {
  std::vector<double> pos, neg;
  for (const auto& e : test) pos.push_back(relevance(emb, e.src, e.dst));
  std::mt19937_64 rng(derive_seed(seed, 0x0E));
  const std::size_t n = full.num_nodes();
  if (n < 2) throw DataError("existence AUC needs at least two products");
  std::uniform_int_distribution<NodeId> pick(0, static_cast<NodeId>(n - 1));
  for (std::size_t i = 0; i < test.size(); ++i) {
    NodeId a, b;
    std::size_t tries = 0;
    do {
      a = pick(rng);
      b = pick(rng);
      if (++tries > 1000000) throw DataError("could not sample a non-edge");
    } while (a == b || full.has_edge(a, b, RelationKind::CoPurchase));
    neg.push_back(relevance(emb, a, b));
  }
  return auc_mann_whitney(pos, neg);
}

/// Direction AUC over one-way edges of `full`: rel(u,v) against rel(v,u).
template <typename Scalar>
double auc_direction(const DualEmbeddings<Scalar>& emb, const DirectedProductGraph& full, std::span<const Edge> test) {
  std::vector<double> pos, neg;
  for (const auto& e : test) {
    if (full.has_edge(e.dst, e.src, RelationKind::CoPurchase)) continue;
    pos.push_back(relevance(emb, e.src, e.dst));
    neg.push_back(relevance(emb, e.dst, e.src));
  }
  return auc_mann_whitney(pos, neg);
}

/// Cold-start ranks for a node split: each test node is embedded from its features
/// via the training graph and ranked against training nodes only.
template <typename Scalar>
std::vector<std::size_t> coldstart_ranks(const DirectedProductGraph& train_graph, const FeatureMatrix& features,
                                         const ModelParams<Scalar>& params, const DualEmbeddings<Scalar>& warm_emb,
                                         const EvalSplit& split, std::size_t k_sim = 5) {
  const auto n = static_cast<NodeId>(train_graph.num_nodes());
  std::vector<std::uint8_t> is_train(n, 0);
  for (NodeId v : split.train_nodes) is_train[v] = 1;
  std::map<NodeId, std::vector<std::size_t>> by_query;
  for (std::size_t i = 0; i < split.test.size(); ++i) by_query[split.test[i].src].push_back(i);
  std::vector<std::pair<NodeId, std::vector<std::size_t>>> groups(by_query.begin(), by_query.end());
  std::vector<std::size_t> ranks(split.test.size(), 0);
  const RowMatrix<double> T = warm_emb.theta_t.template cast<double>();
  parallel_for(groups.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t gi = b; gi < e; ++gi) {
      const NodeId c = groups[gi].first;
      ColdStartRequest req{"", features.row(c), k_sim, RelationKind::CoView};
      const auto cold = attach_and_embed(train_graph, features, params, req, split.train_nodes);
      Eigen::VectorXd scores = Eigen::VectorXd::Zero(n);
      const Eigen::VectorXd raw = T * cold.theta_s.transpose();
      for (std::size_t r = 0; r < warm_emb.size(); ++r) scores(static_cast<Eigen::Index>(warm_emb.ids[r])) = raw(static_cast<Eigen::Index>(r));
      auto skip = [&](NodeId id) { return !is_train[id]; };
      const std::span<const double> sv(scores.data(), static_cast<std::size_t>(scores.size()));
      for (std::size_t idx : groups[gi].second) ranks[idx] = rank_of(sv, split.test[idx].dst, skip);
    }
  }, 4);
  return ranks;
}

// ---------------------------------------------------------------------------
// Report output

inline std::string format_report_tsv(const MetricReport& r) {
  std::string out;
  for (const auto& [k, v] : r.notes) out += fmt::format("# {}: {}\n", k, v);
  out += "task\tmetric\tk\tvalue\n";
  out += fmt::format("{}\tqueries\t-\t{}\n", r.task, r.num_queries);
  for (std::size_t i = 0; i < r.ks.size(); ++i) {
    out += fmt::format("{}\tHitRate\t{}\t{:.6f}\n", r.task, r.ks[i], r.hitrate[i]);
    out += fmt::format("{}\tMRR\t{}\t{:.6f}\n", r.task, r.ks[i], r.mrr[i]);
  }
  if (r.auc) out += fmt::format("{}\tAUC\t-\t{:.6f}\n", r.task, *r.auc);
  return out;
}

inline std::string format_report_summary(const MetricReport& r) {
  std::string out = fmt::format("task: {}  (evaluated items: {})\n", r.task, r.num_queries);
  for (const auto& [k, v] : r.notes) out += fmt::format("  {}: {}\n", k, v);
  for (std::size_t i = 0; i < r.ks.size(); ++i)
    out += fmt::format("  HitRate@{:<3} {:.4f}   MRR@{:<3} {:.4f}\n", r.ks[i], r.hitrate[i], r.ks[i], r.mrr[i]);
  if (r.auc) out += fmt::format("  AUC         {:.4f}\n", *r.auc);
  return out;
}

}  // namespace asymgraph
