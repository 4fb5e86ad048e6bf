#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "asymgraph/common.hpp"
#include "asymgraph/features.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/sampler.hpp"

namespace asymgraph {

/// Anything that exposes input feature rows like FeatureMatrix.
template <typename F>
concept FeatureSource = requires(const F& f, NodeId u) {
  { f.dim() } -> std::convertible_to<std::size_t>;
  { f.row(u) };
};

/// Layer weights W^1..W^L. W^1 is d_in x d_h, the rest d_h x d_h. Each W^l is shared by
/// both channels and both relations of its layer.
template <typename Scalar = double>
struct ModelParams {
  std::vector<RowMatrix<Scalar>> weights;

  std::size_t layers() const { return weights.size(); }
  std::size_t d_in() const { return weights.empty() ? 0 : static_cast<std::size_t>(weights.front().rows()); }
  std::size_t d_h() const { return weights.empty() ? 0 : static_cast<std::size_t>(weights.front().cols()); }

  /// Glorot-uniform initialization.
  static ModelParams init(std::size_t d_in, std::size_t d_h, std::size_t layers, std::uint64_t seed) {
    if (d_in < 1 || d_h < 1 || layers < 1) throw UsageError("model dimensions and layer count must be >= 1");
    ModelParams p;
    std::mt19937_64 rng(derive_seed(seed, 0x1417));
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t rows = l == 0 ? d_in : d_h;
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + d_h));
      std::uniform_real_distribution<double> dist(-bound, bound);
      RowMatrix<Scalar> w(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(d_h));
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
      p.weights.push_back(std::move(w));
    }
    return p;
  }

  void validate() const {
    if (weights.empty()) throw UsageError("model has no layers");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      const auto& w = weights[l];
      if (static_cast<std::size_t>(w.cols()) != d_h() || (l > 0 && static_cast<std::size_t>(w.rows()) != d_h()))
        throw DataError("weight matrix " + std::to_string(l + 1) + " has shape " + std::to_string(w.rows()) + "x" +
                        std::to_string(w.cols()) + ", which does not chain");
      if (!w.allFinite()) throw NumericalError("weight matrix " + std::to_string(l + 1) + " is not finite");
    }
  }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    for (const auto& w : weights) out.weights.push_back(w.template cast<Other>());
    return out;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (a.weights.size() != b.weights.size()) return false;
    for (std::size_t l = 0; l < a.weights.size(); ++l)
      if (a.weights[l].rows() != b.weights[l].rows() || a.weights[l].cols() != b.weights[l].cols() ||
          a.weights[l] != b.weights[l])
        return false;
    return true;
  }
};

/// Source and target embeddings for a set of nodes; row i belongs to ids[i].
template <typename Scalar = double>
struct DualEmbeddings {
  std::vector<NodeId> ids;
  RowMatrix<Scalar> theta_s;
  RowMatrix<Scalar> theta_t;

  DualEmbeddings() = default;
  DualEmbeddings(std::vector<NodeId> node_ids, RowMatrix<Scalar> s, RowMatrix<Scalar> t)
      : ids(std::move(node_ids)), theta_s(std::move(s)), theta_t(std::move(t)) {
    reindex();
  }

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(theta_s.cols()); }

  std::optional<std::size_t> row(NodeId id) const {
    auto it = row_of_.find(id);
    if (it == row_of_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require_row(NodeId id) const {
    auto r = row(id);
    if (!r) throw DataError("no embedding for node " + std::to_string(id));
    return *r;
  }

  void reindex() {
    row_of_.clear();
    row_of_.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) row_of_.emplace(ids[i], i);
  }

 private:
  std::unordered_map<NodeId, std::size_t> row_of_;
};

/// Intermediate values of one forward pass, kept for the backward pass.
template <typename Scalar>
struct ForwardCache {
  struct Layer {
    std::array<RowMatrix<Scalar>, 4> agg;  // summed neighbor inputs per route
    std::array<RowMatrix<Scalar>, 4> pre;  // agg * W per route
    RowMatrix<Scalar> out_s, out_t;        // normalized outputs
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norm_s, norm_t;
  };
  std::vector<Layer> layers;  // layers[l-1] is layer l
};

/// dW^l for every layer, plus gradients w.r.t. the layer-0 source/target inputs.
template <typename Scalar = double>
struct GradientSet {
  std::vector<RowMatrix<Scalar>> weights;
  RowMatrix<Scalar> input_s;
  RowMatrix<Scalar> input_t;
};

namespace detail {

template <typename Scalar>
void normalize_rows(const RowMatrix<Scalar>& raw, RowMatrix<Scalar>& out, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& norms) {
  norms = raw.rowwise().norm();
  out = raw;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    if (norms(i) > Scalar(0)) out.row(i) /= norms(i);
}

template <typename Scalar>
RowMatrix<Scalar> aggregate(const Csr& route, const RowMatrix<Scalar>& src, std::size_t rows) {
  RowMatrix<Scalar> agg = RowMatrix<Scalar>::Zero(static_cast<Eigen::Index>(rows), src.cols());
  parallel_for(rows, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      for (std::size_t k = route.offsets[i]; k < route.offsets[i + 1]; ++k)
        agg.row(static_cast<Eigen::Index>(i)) += src.row(route.targets[k]);
  });
  return agg;
}

}  // namespace detail

/// Dual-channel forward pass over sampled blocks:
///   s_u = ReLU(sum_{cp out} t_v W) + ReLU(sum_{cv out} s_v W)
///   t_u = ReLU(sum_{cp in} s_v W) + ReLU(sum_{cv in} t_v W)
/// followed by row-wise L2 normalization at every layer (all-zero rows stay zero).
/// Output rows follow blocks.seeds().
template <typename Scalar, FeatureSource Features>
DualEmbeddings<Scalar> forward(const ComputationBlocks& blocks, const Features& features,
                               const ModelParams<Scalar>& params, ForwardCache<Scalar>* cache = nullptr) {
  params.validate();
  const std::size_t L = params.layers();
  if (blocks.num_layers() != L)
    throw UsageError("blocks have " + std::to_string(blocks.num_layers()) + " layers, model has " + std::to_string(L));
  if (features.dim() != params.d_in())
    throw DataError("feature dimension " + std::to_string(features.dim()) + " does not match model input dimension " +
                    std::to_string(params.d_in()));

  const auto& inputs = blocks.inputs();
  RowMatrix<Scalar> prev_s(static_cast<Eigen::Index>(inputs.size()), static_cast<Eigen::Index>(features.dim()));
  for (std::size_t i = 0; i < inputs.size(); ++i)
    prev_s.row(static_cast<Eigen::Index>(i)) = features.row(inputs[i]).template cast<Scalar>();
  RowMatrix<Scalar> prev_t = prev_s;

  if (cache) cache->layers.assign(L, {});
  for (std::size_t l = 1; l <= L; ++l) {
    const auto& block = blocks.blocks[l - 1];
    const auto& W = params.weights[l - 1];
    const std::size_t m = blocks.layer_nodes[l].size();
    typename ForwardCache<Scalar>::Layer layer;
    RowMatrix<Scalar> raw_s = RowMatrix<Scalar>::Zero(static_cast<Eigen::Index>(m), W.cols());
    RowMatrix<Scalar> raw_t = raw_s;
    for (Route r : kRoutes) {
      const auto idx = static_cast<std::size_t>(r);
      const auto& src = route_src_channel(r) == kSource ? prev_s : prev_t;
      layer.agg[idx] = detail::aggregate(block.route(r), src, m);
      layer.pre[idx] = layer.agg[idx] * W;
      auto& raw = route_dst_channel(r) == kSource ? raw_s : raw_t;
      raw += layer.pre[idx].cwiseMax(Scalar(0));
    }
    detail::normalize_rows(raw_s, layer.out_s, layer.norm_s);
    detail::normalize_rows(raw_t, layer.out_t, layer.norm_t);
    if (!layer.out_s.allFinite() || !layer.out_t.allFinite())
      throw NumericalError("non-finite activation at layer " + std::to_string(l));
    prev_s = layer.out_s;
    prev_t = layer.out_t;
    if (cache) cache->layers[l - 1] = std::move(layer);
  }
  return DualEmbeddings<Scalar>(blocks.seeds(), std::move(prev_s), std::move(prev_t));
}

/// Reverse-mode gradients given dLoss/dtheta_s and dLoss/dtheta_t (rows follow blocks.seeds()).
template <typename Scalar>
GradientSet<Scalar> backward(const ComputationBlocks& blocks, const ForwardCache<Scalar>& cache,
                             const ModelParams<Scalar>& params, const RowMatrix<Scalar>& loss_grad_s,
                             const RowMatrix<Scalar>& loss_grad_t) {
  const std::size_t L = params.layers();
  if (cache.layers.size() != L || blocks.num_layers() != L) throw UsageError("forward cache does not match model");
  const auto seeds = static_cast<Eigen::Index>(blocks.seeds().size());
  if (loss_grad_s.rows() != seeds || loss_grad_t.rows() != seeds ||
      loss_grad_s.cols() != static_cast<Eigen::Index>(params.d_h()) ||
      loss_grad_t.cols() != static_cast<Eigen::Index>(params.d_h()))
    throw UsageError("loss gradient shape does not match the seed embeddings");

  GradientSet<Scalar> grads;
  for (const auto& w : params.weights) grads.weights.push_back(RowMatrix<Scalar>::Zero(w.rows(), w.cols()));

  RowMatrix<Scalar> g_s = loss_grad_s;
  RowMatrix<Scalar> g_t = loss_grad_t;
  for (std::size_t l = L; l >= 1; --l) {
    const auto& layer = cache.layers[l - 1];
    const auto& block = blocks.blocks[l - 1];
    const auto& W = params.weights[l - 1];

    // Through the normalization: (I - theta theta^T) g / ||h||, zero for zero rows.
    auto through_norm = [](const RowMatrix<Scalar>& g, const RowMatrix<Scalar>& out,
                           const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& norms) {
      RowMatrix<Scalar> r(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (norms(i) > Scalar(0)) {
          const Scalar proj = out.row(i).dot(g.row(i));
          r.row(i) = (g.row(i) - proj * out.row(i)) / norms(i);
        } else {
          r.row(i).setZero();
        }
      }
      return r;
    };
    const RowMatrix<Scalar> g_raw_s = through_norm(g_s, layer.out_s, layer.norm_s);
    const RowMatrix<Scalar> g_raw_t = through_norm(g_t, layer.out_t, layer.norm_t);

    const auto prev_rows = static_cast<Eigen::Index>(blocks.layer_nodes[l - 1].size());
    RowMatrix<Scalar> g_prev_s = RowMatrix<Scalar>::Zero(prev_rows, W.rows());
    RowMatrix<Scalar> g_prev_t = g_prev_s;
    for (Route r : kRoutes) {
      const auto idx = static_cast<std::size_t>(r);
      const auto& g_raw = route_dst_channel(r) == kSource ? g_raw_s : g_raw_t;
      const RowMatrix<Scalar> g_pre =
          g_raw.cwiseProduct((layer.pre[idx].array() > Scalar(0)).template cast<Scalar>().matrix());
      grads.weights[l - 1].noalias() += layer.agg[idx].transpose() * g_pre;
      const RowMatrix<Scalar> g_agg = g_pre * W.transpose();
      auto& g_prev = route_src_channel(r) == kSource ? g_prev_s : g_prev_t;
      const auto& csr = block.route(r);
      for (std::size_t i = 0; i + 1 < csr.offsets.size(); ++i)
        for (std::size_t k = csr.offsets[i]; k < csr.offsets[i + 1]; ++k)
          g_prev.row(csr.targets[k]) += g_agg.row(static_cast<Eigen::Index>(i));
    }
    g_s = std::move(g_prev_s);
    g_t = std::move(g_prev_t);
  }
  for (std::size_t l = 0; l < L; ++l)
    if (!grads.weights[l].allFinite()) throw NumericalError("non-finite gradient for weight matrix " + std::to_string(l + 1));
  grads.input_s = std::move(g_s);
  grads.input_t = std::move(g_t);
  return grads;
}

/// Convenience overload that reruns the forward pass.
template <typename Scalar, FeatureSource Features>
GradientSet<Scalar> backward(const ComputationBlocks& blocks, const Features& features,
                             const ModelParams<Scalar>& params, const RowMatrix<Scalar>& loss_grad_s,
                             const RowMatrix<Scalar>& loss_grad_t) {
  ForwardCache<Scalar> cache;
  forward(blocks, features, params, &cache);
  return backward(blocks, cache, params, loss_grad_s, loss_grad_t);
}

/// Embeds every node of `g` in batches of `batch_size`. Full neighborhoods unless
/// `sampled` fanouts are given. Row i is node i.
template <typename Scalar, NeighborSource Graph, FeatureSource Features>
DualEmbeddings<Scalar> embed_all(const Graph& g, const Features& features, const ModelParams<Scalar>& params,
                                 std::size_t batch_size = 1024, const std::optional<Fanouts>& sampled = std::nullopt,
                                 std::uint64_t rng_seed = 0) {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  const std::size_t n = g.num_nodes();
  const auto d = static_cast<Eigen::Index>(params.d_h());
  RowMatrix<Scalar> s = RowMatrix<Scalar>::Zero(static_cast<Eigen::Index>(n), d);
  RowMatrix<Scalar> t = s;
  const Fanouts fan = sampled ? *sampled : Fanouts::full(params.layers());
  std::vector<NodeId> batch;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    batch.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) batch[i - begin] = static_cast<NodeId>(i);
    const auto blocks = sample_blocks(g, batch, fan, derive_seed(rng_seed, begin));
    const auto emb = forward(blocks, features, params);
    s.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) = emb.theta_s;
    t.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) = emb.theta_t;
  }
  std::vector<NodeId> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<NodeId>(i);
  return DualEmbeddings<Scalar>(std::move(ids), std::move(s), std::move(t));
}

}  // namespace asymgraph
