#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "asymgraph/common.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/log.hpp"
#include "asymgraph/model.hpp"

namespace asymgraph {

enum class RetrievalFilter : std::uint8_t {
  None,
  ExcludeQuery,
  ExcludeTrainNeighbors,  // the query and its co-purchase out-neighbors in the training graph
};

enum class SearchMode : std::uint8_t { Exact, Approximate };

struct Scored {
  NodeId id = 0;
  double score = 0.0;

  friend bool operator==(const Scored&, const Scored&) = default;
};

/// Ranking order: higher score first, ties by ascending id.
inline bool ranks_before(const Scored& a, const Scored& b) {
  return a.score > b.score || (a.score == b.score && a.id < b.id);
}

/// Top-k of `scores` over ids [0, scores.size()) skipping ids where `skip(id)` holds.
template <typename Skip>
std::vector<Scored> top_k(std::span<const double> scores, std::size_t k, Skip&& skip) {
  std::vector<Scored> cand;
  cand.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto id = static_cast<NodeId>(i);
    if (!skip(id)) cand.push_back({id, scores[i]});
  }
  const std::size_t kk = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end(), ranks_before);
  cand.resize(kk);
  return cand;
}

/// Inverted-file partition over target rows: spherical k-means centroids, each
/// query scans the `nprobe` lists whose centroids score highest.
struct InvertedLists {
  RowMatrix<double> centroids;
  std::vector<std::vector<NodeId>> lists;
  std::size_t nprobe = 1;
};

/// Immutable top-k index over trained dual embeddings.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;

  EmbeddingIndex(KeyMap keys, RowMatrix<double> theta_s, RowMatrix<double> theta_t,
                 std::shared_ptr<const DirectedProductGraph> train_graph = nullptr)
      : keys_(std::move(keys)),
        theta_s_(std::move(theta_s)),
        theta_t_(std::move(theta_t)),
        train_graph_(std::move(train_graph)) {
    if (theta_s_.rows() != theta_t_.rows() || theta_s_.cols() != theta_t_.cols())
      throw DataError("source and target embedding matrices differ in shape");
    if (static_cast<std::size_t>(theta_s_.rows()) != keys_.size())
      throw DataError("embedding rows do not match the key map");
    if (train_graph_ && train_graph_->num_nodes() != keys_.size())
      throw DataError("training graph node count does not match the index");
  }

  template <typename Scalar>
  static EmbeddingIndex from_embeddings(KeyMap keys, const DualEmbeddings<Scalar>& emb,
                                        std::shared_ptr<const DirectedProductGraph> train_graph = nullptr) {
    RowMatrix<double> s(static_cast<Eigen::Index>(keys.size()), static_cast<Eigen::Index>(emb.dim()));
    RowMatrix<double> t(s.rows(), s.cols());
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(emb.require_row(static_cast<NodeId>(i)));
      s.row(static_cast<Eigen::Index>(i)) = emb.theta_s.row(r).template cast<double>();
      t.row(static_cast<Eigen::Index>(i)) = emb.theta_t.row(r).template cast<double>();
    }
    return EmbeddingIndex(std::move(keys), std::move(s), std::move(t), std::move(train_graph));
  }

  std::size_t size() const { return keys_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(theta_s_.cols()); }
  const KeyMap& keys() const { return keys_; }
  const RowMatrix<double>& theta_s() const { return theta_s_; }
  const RowMatrix<double>& theta_t() const { return theta_t_; }
  const DirectedProductGraph* train_graph() const { return train_graph_.get(); }

  /// rel(q, v) = theta_s[q] . theta_t[v]
  double relevance(NodeId q, NodeId v) const {
    check(q);
    check(v);
    return theta_s_.row(q).dot(theta_t_.row(v));
  }

  /// Builds inverted lists for approximate search over the target rows.
  void enable_approximate(std::size_t nlist, std::size_t nprobe, std::uint64_t seed = 0, std::size_t iterations = 12) {
    ivf_t_ = build_ivf(theta_t_, nlist, nprobe, seed, iterations);
    ivf_s_ = build_ivf(theta_s_, nlist, nprobe, seed, iterations);
  }
  bool has_approximate() const { return ivf_t_.has_value(); }

  /// Top-k products for query q by rel(q, .).
  std::vector<Scored> recommend_related(NodeId q, std::size_t k, RetrievalFilter filter = RetrievalFilter::None,
                                        SearchMode mode = SearchMode::Exact) const {
    check(q);
    return search(theta_s_.row(q), theta_t_, ivf_t_, k, q, filter, mode);
  }

  /// Top-k products whose source embedding is most similar to q's.
  std::vector<Scored> recommend_similar(NodeId q, std::size_t k, RetrievalFilter filter = RetrievalFilter::ExcludeQuery,
                                        SearchMode mode = SearchMode::Exact) const {
    check(q);
    return search(theta_s_.row(q), theta_s_, ivf_s_, k, q, filter, mode);
  }

  /// Top-k targets for an arbitrary source vector (cold products). `excluded` ids are skipped.
  std::vector<Scored> recommend_for_vector(const Eigen::Ref<const Eigen::RowVectorXd>& source, std::size_t k,
                                           std::span<const NodeId> excluded = {},
                                           SearchMode mode = SearchMode::Exact) const {
    if (k < 1) throw UsageError("k must be >= 1");
    if (static_cast<std::size_t>(source.size()) != dim()) throw DataError("query vector dimension mismatch");
    if (source.isZero(0.0)) {
      logger().warn("query embedding is all zero; returning no recommendations");
      return {};
    }
    std::vector<NodeId> ex(excluded.begin(), excluded.end());
    std::sort(ex.begin(), ex.end());
    auto skip = [&](NodeId id) { return std::binary_search(ex.begin(), ex.end(), id); };
    return scan(source, theta_t_, ivf_t_, k, skip, mode);
  }

 private:
  void check(NodeId q) const {
    if (q >= size()) throw UsageError("unknown product id " + std::to_string(q));
  }

  template <typename Skip>
  std::vector<Scored> scan(const Eigen::Ref<const Eigen::RowVectorXd>& query, const RowMatrix<double>& targets,
                           const std::optional<InvertedLists>& ivf, std::size_t k, Skip&& skip,
                           SearchMode mode) const {
    if (mode == SearchMode::Exact || !ivf) {
      if (mode == SearchMode::Approximate) logger().warn("approximate index not built; using exact scan");
      const Eigen::VectorXd scores = targets * query.transpose();
      return top_k(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), k, skip);
    }
    const Eigen::VectorXd cscores = ivf->centroids * query.transpose();
    std::vector<Scored> order;
    for (Eigen::Index c = 0; c < cscores.size(); ++c) order.push_back({static_cast<NodeId>(c), cscores(c)});
    std::sort(order.begin(), order.end(), ranks_before);
    std::vector<Scored> cand;
    for (std::size_t p = 0; p < std::min(ivf->nprobe, order.size()); ++p)
      for (NodeId id : ivf->lists[order[p].id])
        if (!skip(id)) cand.push_back({id, targets.row(id).dot(query)});
    const std::size_t kk = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end(), ranks_before);
    cand.resize(kk);
    return cand;
  }

  std::vector<Scored> search(const Eigen::Ref<const Eigen::RowVectorXd>& query, const RowMatrix<double>& targets,
                             const std::optional<InvertedLists>& ivf, std::size_t k, NodeId q,
                             RetrievalFilter filter, SearchMode mode) const {
    if (k < 1) throw UsageError("k must be >= 1");
    if (query.isZero(0.0)) {
      logger().warn("query product '{}' has an all-zero embedding; returning no recommendations", keys_.key(q));
      return {};
    }
    std::span<const NodeId> neighbors;
    if (filter == RetrievalFilter::ExcludeTrainNeighbors) {
      if (!train_graph_) throw UsageError("exclude_train_neighbors requires the training graph");
      neighbors = train_graph_->neighbors(q, RelationKind::CoPurchase, Direction::Out);
    }
    auto skip = [&](NodeId id) {
      if (filter == RetrievalFilter::None) return false;
      if (id == q) return true;
      return std::binary_search(neighbors.begin(), neighbors.end(), id);
    };
    return scan(query, targets, ivf, k, skip, mode);
  }

  static InvertedLists build_ivf(const RowMatrix<double>& rows, std::size_t nlist, std::size_t nprobe,
                                 std::uint64_t seed, std::size_t iterations) {
    const auto n = static_cast<std::size_t>(rows.rows());
    if (nlist < 1 || nprobe < 1) throw UsageError("nlist and nprobe must be >= 1");
    nlist = std::min(nlist, std::max<std::size_t>(1, n));
    InvertedLists ivf;
    ivf.nprobe = std::min(nprobe, nlist);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(derive_seed(seed, 0x1f));
    std::shuffle(perm.begin(), perm.end(), rng);
    ivf.centroids.resize(static_cast<Eigen::Index>(nlist), rows.cols());
    for (std::size_t c = 0; c < nlist; ++c) ivf.centroids.row(static_cast<Eigen::Index>(c)) = rows.row(perm[c]);
    std::vector<std::size_t> assign(n, 0);
    for (std::size_t it = 0; it <= iterations; ++it) {
      const RowMatrix<double> sims = rows * ivf.centroids.transpose();
      for (std::size_t i = 0; i < n; ++i) sims.row(static_cast<Eigen::Index>(i)).maxCoeff(&assign[i]);
      if (it == iterations) break;
      RowMatrix<double> next = RowMatrix<double>::Zero(ivf.centroids.rows(), ivf.centroids.cols());
      for (std::size_t i = 0; i < n; ++i) next.row(static_cast<Eigen::Index>(assign[i])) += rows.row(static_cast<Eigen::Index>(i));
      for (Eigen::Index c = 0; c < next.rows(); ++c) {
        const double norm = next.row(c).norm();
        if (norm > 0) ivf.centroids.row(c) = next.row(c) / norm;
      }
    }
    ivf.lists.assign(nlist, {});
    for (std::size_t i = 0; i < n; ++i) ivf.lists[assign[i]].push_back(static_cast<NodeId>(i));
    return ivf;
  }

  KeyMap keys_;
  RowMatrix<double> theta_s_;
  RowMatrix<double> theta_t_;
  std::shared_ptr<const DirectedProductGraph> train_graph_;
  std::optional<InvertedLists> ivf_t_;
  std::optional<InvertedLists> ivf_s_;
};

enum class QueryKind : std::uint8_t { Related, Similar };

struct QueryResult {
  std::vector<Scored> items;
  std::optional<std::string> error;
};

/// One result per query, in input order. Unknown ids yield an error entry; the rest proceed.
inline std::vector<QueryResult> batch_recommend(const EmbeddingIndex& index, std::span<const NodeId> queries,
                                                std::size_t k, RetrievalFilter filter,
                                                QueryKind kind = QueryKind::Related,
                                                SearchMode mode = SearchMode::Exact) {
  std::vector<QueryResult> out(queries.size());
  parallel_for(queries.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      try {
        out[i].items = kind == QueryKind::Related ? index.recommend_related(queries[i], k, filter, mode)
                                                  : index.recommend_similar(queries[i], k, filter, mode);
      } catch (const Error& err) {
        out[i].error = err.what();
      }
    }
  }, 16);
  return out;
}

}  // namespace asymgraph
