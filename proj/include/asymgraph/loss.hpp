#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "asymgraph/common.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/model.hpp"
#include "asymgraph/sampler.hpp"

namespace asymgraph {

/// How the negative-sample term scores a dot product x.
///   Shifted:      log sigmoid(1 - x)
///   Conventional: log sigmoid(-x)
enum class NegativeForm : std::uint8_t { Shifted, Conventional };

struct LossConfig {
  NegativeForm negative_form = NegativeForm::Shifted;
  std::array<double, 6> weights{1, 1, 1, 1, 1, 1};
};

struct LossBatch {
  EdgeList cp_edges;
  std::vector<std::uint8_t> one_way;  // per cp edge: reverse edge absent from E_cp
  EdgeList cv_edges;
  NegativeBatch negatives;  // negatives.for_edge(i) belong to cp_edges[i]

  /// Fills one_way from the co-purchase edges of `g`.
  void flag_one_way(const DirectedProductGraph& g) {
    one_way.resize(cp_edges.size());
    for (std::size_t i = 0; i < cp_edges.size(); ++i)
      one_way[i] = g.has_edge(cp_edges[i].dst, cp_edges[i].src, RelationKind::CoPurchase) ? 0 : 1;
  }

  /// Every node referenced by the batch, sorted and unique.
  std::vector<NodeId> touched_nodes() const {
    std::vector<NodeId> out;
    out.reserve(2 * cp_edges.size() + 2 * cv_edges.size() + negatives.ids.size());
    for (const auto& e : cp_edges) out.insert(out.end(), {e.src, e.dst});
    for (const auto& e : cv_edges) out.insert(out.end(), {e.src, e.dst});
    out.insert(out.end(), negatives.ids.begin(), negatives.ids.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }
};

/// terms[i] is the i-th log-likelihood sum (<= 0); total = -sum_i weights[i] * terms[i].
struct LossValue {
  double total = 0.0;
  std::array<double, 6> terms{};
};

/// log(sigmoid(x)) without overflow.
inline double log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

inline void check_batch(const LossBatch& batch) {
  if (batch.one_way.size() != batch.cp_edges.size())
    throw UsageError("loss batch: one_way flags do not match cp edges");
  if (batch.negatives.per_edge > 0 && batch.negatives.num_edges() != batch.cp_edges.size())
    throw UsageError("loss batch: negatives do not match cp edges");
}

template <typename Scalar>
double dot(const RowMatrix<Scalar>& a, std::size_t ra, const RowMatrix<Scalar>& b, std::size_t rb) {
  return static_cast<double>(a.row(static_cast<Eigen::Index>(ra)).dot(b.row(static_cast<Eigen::Index>(rb))));
}

}  // namespace detail

/// The six-term asymmetric loss:
///   T1 = sum_{(u,v) in cp}        log sig(s_u . t_v)
///   T2 = sum_{negatives z of u}   log sig(1 - s_u . t_z)
///   T3 = sum_{(u,v) one-way cp}   log sig(s_u . t_v)
///   T4 = sum_{(u,v) one-way cp}   log sig(1 - s_v . t_u)
///   T5 = sum_{(u,v) in cv}        log sig(s_u . s_v)
///   T6 = sum_{(u,v) in cv}        log sig(t_u . t_v)
/// A one-way edge contributes to both T1 and T3.
template <typename Scalar>
LossValue asymmetric_loss(const DualEmbeddings<Scalar>& emb, const LossBatch& batch, const LossConfig& cfg = {}) {
  detail::check_batch(batch);
  const auto& S = emb.theta_s;
  const auto& T = emb.theta_t;
  auto neg = [&](double x) { return cfg.negative_form == NegativeForm::Shifted ? log_sigmoid(1.0 - x) : log_sigmoid(-x); };

  LossValue out;
  for (std::size_t i = 0; i < batch.cp_edges.size(); ++i) {
    const auto ru = emb.require_row(batch.cp_edges[i].src);
    const auto rv = emb.require_row(batch.cp_edges[i].dst);
    const double uv = detail::dot(S, ru, T, rv);
    out.terms[0] += log_sigmoid(uv);
    if (batch.negatives.per_edge > 0)
      for (NodeId z : batch.negatives.for_edge(i)) out.terms[1] += neg(detail::dot(S, ru, T, emb.require_row(z)));
    if (batch.one_way[i]) {
      out.terms[2] += log_sigmoid(uv);
      out.terms[3] += neg(detail::dot(S, rv, T, ru));
    }
  }
  for (const auto& e : batch.cv_edges) {
    const auto ru = emb.require_row(e.src);
    const auto rv = emb.require_row(e.dst);
    out.terms[4] += log_sigmoid(detail::dot(S, ru, S, rv));
    out.terms[5] += log_sigmoid(detail::dot(T, ru, T, rv));
  }
  for (std::size_t k = 0; k < 6; ++k) out.total -= cfg.weights[k] * out.terms[k];
  return out;
}

template <typename Scalar>
struct EmbeddingGrad {
  RowMatrix<Scalar> theta_s;
  RowMatrix<Scalar> theta_t;
};

/// d total / d theta for every embedding row (rows untouched by the batch stay zero).
/// Uses d(-log sig(x))/dx = sig(x) - 1; the shifted negative uses d(-log sig(1-x))/dx = sig(x-1).
template <typename Scalar>
EmbeddingGrad<Scalar> loss_grad(const DualEmbeddings<Scalar>& emb, const LossBatch& batch, const LossConfig& cfg = {}) {
  detail::check_batch(batch);
  const auto& S = emb.theta_s;
  const auto& T = emb.theta_t;
  EmbeddingGrad<Scalar> g{RowMatrix<Scalar>::Zero(S.rows(), S.cols()), RowMatrix<Scalar>::Zero(T.rows(), T.cols())};
  auto pos_coef = [](double x) { return sigmoid(x) - 1.0; };
  auto neg_coef = [&](double x) {
    return cfg.negative_form == NegativeForm::Shifted ? sigmoid(x - 1.0) : sigmoid(x);
  };
  auto add = [](RowMatrix<Scalar>& dst, std::size_t r, const RowMatrix<Scalar>& src, std::size_t rs, double c) {
    dst.row(static_cast<Eigen::Index>(r)) += static_cast<Scalar>(c) * src.row(static_cast<Eigen::Index>(rs));
  };
  const auto& w = cfg.weights;

  for (std::size_t i = 0; i < batch.cp_edges.size(); ++i) {
    const auto ru = emb.require_row(batch.cp_edges[i].src);
    const auto rv = emb.require_row(batch.cp_edges[i].dst);
    const double uv = detail::dot(S, ru, T, rv);
    double c = w[0] * pos_coef(uv);
    if (batch.one_way[i]) c += w[2] * pos_coef(uv);
    add(g.theta_s, ru, T, rv, c);
    add(g.theta_t, rv, S, ru, c);
    if (batch.negatives.per_edge > 0)
      for (NodeId z : batch.negatives.for_edge(i)) {
        const auto rz = emb.require_row(z);
        const double cz = w[1] * neg_coef(detail::dot(S, ru, T, rz));
        add(g.theta_s, ru, T, rz, cz);
        add(g.theta_t, rz, S, ru, cz);
      }
    if (batch.one_way[i]) {
      const double cr = w[3] * neg_coef(detail::dot(S, rv, T, ru));
      add(g.theta_s, rv, T, ru, cr);
      add(g.theta_t, ru, S, rv, cr);
    }
  }
  for (const auto& e : batch.cv_edges) {
    const auto ru = emb.require_row(e.src);
    const auto rv = emb.require_row(e.dst);
    const double cs = w[4] * pos_coef(detail::dot(S, ru, S, rv));
    const double ct = w[5] * pos_coef(detail::dot(T, ru, T, rv));
    add(g.theta_s, ru, S, rv, cs);
    add(g.theta_s, rv, S, ru, cs);
    add(g.theta_t, ru, T, rv, ct);
    add(g.theta_t, rv, T, ru, ct);
  }
  return g;
}

}  // namespace asymgraph
