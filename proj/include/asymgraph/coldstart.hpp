#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asymgraph/common.hpp"
#include "asymgraph/features.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/model.hpp"
#include "asymgraph/retrieval.hpp"
#include "asymgraph/sampler.hpp"

namespace asymgraph {

struct ColdStartRequest {
  std::string key;
  Eigen::RowVectorXd features;
  std::size_t k_sim = 5;
  RelationKind edge_kind = RelationKind::CoView;  // CoPurchase attaches c -> warm one-way
};

/// A base graph plus one extra node (id = base.num_nodes()) linked to a few warm nodes.
/// The base graph is never modified; merged neighbor lists are held by the overlay.
class ColdOverlay {
 public:
  ColdOverlay(const DirectedProductGraph& base, std::vector<NodeId> warm, RelationKind kind)
      : base_(base), cold_(static_cast<NodeId>(base.num_nodes())), warm_(std::move(warm)), kind_(kind) {
    std::sort(warm_.begin(), warm_.end());
    warm_.erase(std::unique(warm_.begin(), warm_.end()), warm_.end());
    for (NodeId w : warm_) {
      if (w >= base.num_nodes()) throw UsageError("warm id out of range");
      // Neighbor lists of warm nodes that gain the cold node. Co-view links are
      // symmetric; a co-purchase link c -> w only adds c to w's in-list.
      if (kind_ == RelationKind::CoView) {
        merged_.push_back({w, RelationKind::CoView, Direction::Out, with_cold(base.neighbors(w, kind_, Direction::Out))});
        merged_.push_back({w, RelationKind::CoView, Direction::In, with_cold(base.neighbors(w, kind_, Direction::In))});
      } else {
        merged_.push_back({w, RelationKind::CoPurchase, Direction::In,
                           with_cold(base.neighbors(w, kind_, Direction::In))});
      }
    }
  }

  std::size_t num_nodes() const { return base_.num_nodes() + 1; }
  NodeId cold_id() const { return cold_; }
  const std::vector<NodeId>& warm() const { return warm_; }

  std::span<const NodeId> neighbors(NodeId u, RelationKind kind, Direction dir) const {
    if (u == cold_) {
      if (kind != kind_) return {};
      if (kind_ == RelationKind::CoView || dir == Direction::Out) return warm_;
      return {};
    }
    for (const auto& m : merged_)
      if (m.node == u && m.kind == kind && m.dir == dir) return m.list;
    return base_.neighbors(u, kind, dir);
  }

 private:
  struct Merged {
    NodeId node;
    RelationKind kind;
    Direction dir;
    std::vector<NodeId> list;
  };

  std::vector<NodeId> with_cold(std::span<const NodeId> base) const {
    std::vector<NodeId> out(base.begin(), base.end());
    out.push_back(cold_);  // cold id is larger than every base id, so order is kept
    return out;
  }

  const DirectedProductGraph& base_;
  NodeId cold_;
  std::vector<NodeId> warm_;
  RelationKind kind_;
  std::vector<Merged> merged_;
};

/// Base features plus the cold product's row.
class OverlayFeatures {
 public:
  OverlayFeatures(const FeatureMatrix& base, Eigen::RowVectorXd cold) : base_(base), cold_(std::move(cold)) {}

  std::size_t dim() const { return base_.dim(); }
  Eigen::RowVectorXd row(NodeId u) const {
    if (u == base_.num_nodes()) return cold_;
    return base_.row(u);
  }

 private:
  const FeatureMatrix& base_;
  Eigen::RowVectorXd cold_;
};

template <typename Scalar = double>
struct ColdStartResult {
  Eigen::RowVectorXd theta_s;
  Eigen::RowVectorXd theta_t;
  std::vector<NodeId> warm;  // attached warm products, most similar first
  std::vector<double> similarity;
};

/// Warm products most similar to `x` by cosine of input features (ties by id).
/// `eligible`, when non-empty, restricts the candidates.
inline std::vector<Scored> similar_by_features(const FeatureMatrix& features, const Eigen::RowVectorXd& x,
                                               std::size_t k, std::span<const NodeId> eligible = {}) {
  const double xn = x.norm();
  const auto& X = features.values();
  const Eigen::VectorXd dots = X * x.transpose();
  const Eigen::VectorXd norms = X.rowwise().norm();
  std::vector<double> cos(features.num_nodes(), 0.0);
  for (std::size_t i = 0; i < cos.size(); ++i) {
    const double d = norms(static_cast<Eigen::Index>(i)) * xn;
    cos[i] = d > 0 ? dots(static_cast<Eigen::Index>(i)) / d : 0.0;
  }
  if (eligible.empty()) return top_k(cos, k, [](NodeId) { return false; });
  std::vector<char> ok(cos.size(), 0);
  for (NodeId e : eligible) ok.at(e) = 1;
  return top_k(cos, k, [&](NodeId id) { return !ok[id]; });
}

/// Attaches a cold product to its k_sim most feature-similar warm products in a
/// temporary overlay and embeds it with the trained model (full neighborhoods).
template <typename Scalar>
ColdStartResult<Scalar> attach_and_embed(const DirectedProductGraph& g, const FeatureMatrix& features,
                                         const ModelParams<Scalar>& params, const ColdStartRequest& req,
                                         std::span<const NodeId> eligible_warm = {}) {
  if (req.k_sim < 1) throw UsageError("k_sim must be >= 1");
  if (static_cast<std::size_t>(req.features.size()) != features.dim())
    throw DataError("cold product '" + req.key + "' has " + std::to_string(req.features.size()) +
                    " features, expected " + std::to_string(features.dim()));
  if (!req.features.allFinite()) throw DataError("cold product '" + req.key + "' has non-finite features");
  if (req.features.isZero(0.0)) throw DataError("cold product '" + req.key + "' has an all-zero feature vector");
  if (features.num_nodes() != g.num_nodes()) throw DataError("feature rows do not match graph nodes");

  const auto sims = similar_by_features(features, req.features, req.k_sim, eligible_warm);
  ColdStartResult<Scalar> out;
  for (const auto& s : sims) {
    out.warm.push_back(s.id);
    out.similarity.push_back(s.score);
  }
  const ColdOverlay overlay(g, out.warm, req.edge_kind);
  const OverlayFeatures feats(features, req.features);
  const NodeId seed[] = {overlay.cold_id()};
  const auto blocks = sample_blocks(overlay, seed, Fanouts::full(params.layers()), 0);
  const auto emb = forward(blocks, feats, params);
  out.theta_s = emb.theta_s.row(0).template cast<double>();
  out.theta_t = emb.theta_t.row(0).template cast<double>();
  return out;
}

/// Ranks warm targets for a cold source vector; same contract as recommend_related.
inline std::vector<Scored> recommend_for_cold(const Eigen::RowVectorXd& theta_s_cold, const EmbeddingIndex& index,
                                              std::size_t k, std::span<const NodeId> excluded = {}) {
  return index.recommend_for_vector(theta_s_cold, k, excluded);
}

}  // namespace asymgraph
