#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "asymgraph/common.hpp"
#include "asymgraph/config.hpp"
#include "asymgraph/features.hpp"
#include "asymgraph/graph.hpp"

namespace asymgraph {

struct SynthConfig {
  std::size_t num_categories = 20;
  std::size_t products_per_category = 100;
  double accessory_fraction = 0.3;
  double cp_edge_prob = 0.14;  // main -> accessory, same category
  double reciprocal_prob = 0.2;
  std::size_t cv_clique_size = 5;
  std::size_t feature_dim = 32;
  double noise_std = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    auto prob = [](double p, const char* name) {
      if (!(p >= 0.0 && p <= 1.0)) throw UsageError(fmt::format("{} must be in [0, 1]", name));
    };
    prob(accessory_fraction, "accessory_fraction");
    prob(cp_edge_prob, "cp_edge_prob");
    prob(reciprocal_prob, "reciprocal_prob");
    if (num_categories < 1 || products_per_category < 1 || cv_clique_size < 1 || feature_dim < 1)
      throw UsageError("synthetic graph sizes must be >= 1");
    if (!(noise_std >= 0.0)) throw UsageError("noise_std must be >= 0");
  }

  static SynthConfig from_config(const KeyValueConfig& kv) {
    SynthConfig c;
    c.num_categories = kv.get_uint("num_categories", c.num_categories);
    c.products_per_category = kv.get_uint("products_per_category", c.products_per_category);
    c.accessory_fraction = kv.get_double("accessory_fraction", c.accessory_fraction);
    c.cp_edge_prob = kv.get_double("cp_edge_prob", c.cp_edge_prob);
    c.reciprocal_prob = kv.get_double("reciprocal_prob", c.reciprocal_prob);
    c.cv_clique_size = kv.get_uint("cv_clique_size", c.cv_clique_size);
    c.feature_dim = kv.get_uint("feature_dim", c.feature_dim);
    c.noise_std = kv.get_double("noise_std", c.noise_std);
    c.seed = kv.get_uint("seed", c.seed);
    c.validate();
    return c;
  }

  std::string to_config_text() const {
    return fmt::format(
        "num_categories = {}\nproducts_per_category = {}\naccessory_fraction = {}\ncp_edge_prob = {}\n"
        "reciprocal_prob = {}\ncv_clique_size = {}\nfeature_dim = {}\nnoise_std = {}\nseed = {}\n",
        num_categories, products_per_category, accessory_fraction, cp_edge_prob, reciprocal_prob, cv_clique_size,
        feature_dim, noise_std, seed);
  }
};

struct SynthCorpus {
  KeyMap keys;
  std::vector<std::uint32_t> category;
  std::vector<std::uint8_t> is_accessory;
  EdgeList cp;        // sorted
  EdgeList cv_pairs;  // src < dst, sorted
  FeatureMatrix features;
  EdgeList planted;     // main -> accessory edges, sorted
  EdgeList transitive;  // (a, c): (a, b) planted, (b, c) co-view, (a, c) not co-purchased

  DirectedProductGraph graph() const { return DirectedProductGraph(keys.size(), cp, cv_pairs); }
};

/// Marketplace with one main/accessory split per category. Mains point at accessories
/// with directed co-purchase edges; a fraction get a reverse edge. Co-view cliques group
/// products of the same role within a category.
inline SynthCorpus generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthCorpus out;
  const std::size_t per = cfg.products_per_category;
  const auto n_acc = static_cast<std::size_t>(std::llround(cfg.accessory_fraction * static_cast<double>(per)));
  const std::size_t n = cfg.num_categories * per;

  for (std::size_t c = 0; c < cfg.num_categories; ++c)
    for (std::size_t i = 0; i < per; ++i) {
      const bool acc = i >= per - n_acc;
      out.keys.insert(acc ? fmt::format("c{:03}_a{:03}", c, i - (per - n_acc)) : fmt::format("c{:03}_m{:03}", c, i));
      out.category.push_back(static_cast<std::uint32_t>(c));
      out.is_accessory.push_back(acc ? 1 : 0);
    }

  std::mt19937_64 edge_rng(derive_seed(cfg.seed, 0xED));
  std::bernoulli_distribution link(cfg.cp_edge_prob);
  std::bernoulli_distribution reciprocal(cfg.reciprocal_prob);
  for (std::size_t c = 0; c < cfg.num_categories; ++c) {
    const auto base = static_cast<NodeId>(c * per);
    for (std::size_t m = 0; m < per - n_acc; ++m)
      for (std::size_t a = per - n_acc; a < per; ++a) {
        if (!link(edge_rng)) continue;
        const Edge e{static_cast<NodeId>(base + m), static_cast<NodeId>(base + a)};
        out.planted.push_back(e);
        out.cp.push_back(e);
        if (reciprocal(edge_rng)) out.cp.push_back({e.dst, e.src});
      }
  }

  std::mt19937_64 clique_rng(derive_seed(cfg.seed, 0xC1));
  auto add_cliques = [&](std::vector<NodeId> members) {
    std::shuffle(members.begin(), members.end(), clique_rng);
    for (std::size_t start = 0; start < members.size(); start += cfg.cv_clique_size) {
      const std::size_t end = std::min(members.size(), start + cfg.cv_clique_size);
      for (std::size_t i = start; i < end; ++i)
        for (std::size_t j = i + 1; j < end; ++j)
          out.cv_pairs.push_back({std::min(members[i], members[j]), std::max(members[i], members[j])});
    }
  };
  for (std::size_t c = 0; c < cfg.num_categories; ++c) {
    std::vector<NodeId> mains, accs;
    for (std::size_t i = 0; i < per; ++i) {
      const auto id = static_cast<NodeId>(c * per + i);
      (out.is_accessory[id] ? accs : mains).push_back(id);
    }
    add_cliques(std::move(mains));
    add_cliques(std::move(accs));
  }

  std::sort(out.cp.begin(), out.cp.end());
  std::sort(out.cv_pairs.begin(), out.cv_pairs.end());
  std::sort(out.planted.begin(), out.planted.end());

  std::mt19937_64 feat_rng(derive_seed(cfg.seed, 0xFE));
  std::normal_distribution<double> gauss(0.0, 1.0);
  RowMatrix<double> centroids(static_cast<Eigen::Index>(cfg.num_categories), static_cast<Eigen::Index>(cfg.feature_dim));
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    for (Eigen::Index j = 0; j < centroids.cols(); ++j) centroids(c, j) = gauss(feat_rng);
    centroids.row(c).normalize();
  }
  RowMatrix<double> x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.feature_dim));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      x(i, j) = centroids(out.category[static_cast<std::size_t>(i)], j) + cfg.noise_std * gauss(feat_rng);
  out.features = FeatureMatrix(std::move(x));

  const DirectedProductGraph g = out.graph();
  for (const auto& [a, b] : out.planted)
    for (NodeId c : g.neighbors(b, RelationKind::CoView, Direction::Out))
      if (c != a && !g.has_edge(a, c, RelationKind::CoPurchase)) out.transitive.push_back({a, c});
  std::sort(out.transitive.begin(), out.transitive.end());
  out.transitive.erase(std::unique(out.transitive.begin(), out.transitive.end()), out.transitive.end());
  return out;
}

inline void write_synth_edges(std::ostream& out, const SynthCorpus& s) {
  for (const auto& e : s.cp) out << s.keys.key(e.src) << '\t' << s.keys.key(e.dst) << "\tcp\n";
  for (const auto& e : s.cv_pairs) out << s.keys.key(e.src) << '\t' << s.keys.key(e.dst) << "\tcv\n";
}

/// `<planted|transitive>\t<src_key>\t<dst_key>` lines.
inline void write_ground_truth(std::ostream& out, const SynthCorpus& s) {
  for (const auto& e : s.planted) out << "planted\t" << s.keys.key(e.src) << '\t' << s.keys.key(e.dst) << '\n';
  for (const auto& e : s.transitive) out << "transitive\t" << s.keys.key(e.src) << '\t' << s.keys.key(e.dst) << '\n';
}

}  // namespace asymgraph
