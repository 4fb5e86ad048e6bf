// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <unistd.h>

#include "../test_util.hpp"
#include "asymgraph/asymgraph.hpp"
#include "cli.hpp"

using namespace asymgraph;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------
// 1. Gradient correctness

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const auto g = testutil::random_graph(20, 0.12, 0.08, 101);
  const auto x = testutil::random_features(20, 5, 102);
  const auto p = ModelParams<double>::init(5, 4, 2, 103);
  const auto batch = testutil::full_batch(g, 3, 104);
  const auto analytic = testutil::analytic_grad(g, x, p, batch);
  const double err = testutil::max_fd_relative_error(
      [&](const ModelParams<double>& q) { return testutil::loss_at(g, x, q, batch); }, p, analytic, 1e-5);
  const double secs = seconds_since(t0);
  return {err < 1e-4 && secs < 10.0, fmt::format("max relative error {:.2e} (< 1e-4), {:.2f} s (< 10 s)", err, secs)};
}

// ---------------------------------------------------------------------------
// 2. Forward-pass fidelity

Outcome forward_fidelity() {
  RowMatrix<double> X(3, 2);
  X << 1, 1, 1, 0, 0.3, -0.2;
  const FeatureMatrix x(X);
  const DirectedProductGraph g(3, {{0, 1}}, {});
  ModelParams<double> p;
  p.weights = {RowMatrix<double>::Identity(2, 2)};
  const NodeId seeds[] = {0, 1, 2};
  const auto emb = forward(sample_blocks(g, seeds, Fanouts::full(1), 0), x, p);
  const double h = 0.70710678118654752;
  const double e_s = std::max(std::abs(emb.theta_s(0, 0) - 1.0), std::abs(emb.theta_s(0, 1)));
  const double e_t = std::max(std::abs(emb.theta_t(1, 0) - h), std::abs(emb.theta_t(1, 1) - h));
  const bool isolated = emb.theta_s.row(2).isZero(0.0) && emb.theta_t.row(2).isZero(0.0) &&
                        emb.theta_t.row(0).isZero(0.0) && emb.theta_s.row(1).isZero(0.0);
  return {e_s < 1e-6 && e_t < 1e-6 && isolated,
          fmt::format("source A error {:.1e}, target B error {:.1e}, zero-guard {}", e_s, e_t, isolated ? "ok" : "violated")};
}

// ---------------------------------------------------------------------------
// Shared synthetic setup for 3, 5 and 6

struct Trained {
  SynthCorpus corpus;
  DirectedProductGraph full;
  EvalSplit split;
  DirectedProductGraph train_graph;
  ModelParams<double> params;
  DualEmbeddings<double> emb;
  std::size_t epochs = 0;
  double seconds = 0;
};

const Trained& trained_edge_model() {
  static const Trained t = [] {
    Trained r;
    const auto t0 = Clock::now();
    r.corpus = generate(SynthConfig{});
    r.full = r.corpus.graph();
    r.split = make_edge_split(r.full, {}, 7);
    const TrainConfig cfg;  // defaults, at most 30 epochs
    const auto res = train(r.full, r.corpus.features, cfg, r.split);
    r.epochs = res.epochs.size();
    r.params = res.params;
    r.train_graph = r.split.train_graph(r.full.num_nodes());
    r.emb = embed_all(r.train_graph, r.corpus.features, r.params);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return t;
}

// 3. Direction and existence AUC after training
Outcome asymmetry_trend() {
  const auto& t = trained_edge_model();
  const double dir = auc_direction(t.emb, t.full, t.split.test);
  const double exist = auc_existence(t.emb, t.full, t.split.test, derive_seed(7, 0xA1));
  const bool ok = dir >= 0.85 && exist >= 0.90 && t.epochs <= 30 && t.seconds < 600;
  return {ok, fmt::format("direction AUC {:.4f} (>= 0.85), existence AUC {:.4f} (>= 0.90), {} epochs, {:.0f} s", dir,
                          exist, t.epochs, t.seconds)};
}

// 5. HitRate@10 on held-out planted edges against the random baseline
Outcome node_rec_sanity() {
  const auto& t = trained_edge_model();
  std::set<Edge> planted(t.corpus.planted.begin(), t.corpus.planted.end());
  EdgeList held;
  for (const auto& e : t.split.test)
    if (planted.count(e)) held.push_back(e);
  const std::size_t k10[] = {10};
  const double hr = hitrate_mrr(filtered_ranks(t.emb, t.train_graph, held), k10).hitrate[0];
  const double baseline = 10.0 / static_cast<double>(t.full.num_nodes());
  return {hr >= 10 * baseline,
          fmt::format("HitRate@10 {:.4f} over {} edges vs 10x random {:.4f}", hr, held.size(), 10 * baseline)};
}

// 6. Cold clones of warm products
Outcome coldstart_consistency() {
  const auto& t = trained_edge_model();
  const auto index = EmbeddingIndex::from_embeddings(t.corpus.keys, t.emb);
  const auto s_before = t.emb.theta_s, t_before = t.emb.theta_t;
  const auto g_before = t.train_graph;

  // Every 10th main product with training co-purchase edges.
  std::vector<NodeId> sample;
  for (NodeId a = 0; a < t.full.num_nodes(); ++a)
    if (!t.corpus.is_accessory[a] && !t.train_graph.neighbors(a, RelationKind::CoPurchase, Direction::Out).empty())
      sample.push_back(a);
  std::vector<NodeId> picked;
  for (std::size_t i = 0; i < sample.size(); i += 10) picked.push_back(sample[i]);

  double jaccard_sum = 0;
  for (NodeId a : picked) {
    ColdStartRequest req{"clone", t.corpus.features.row(a), 5, RelationKind::CoView};
    const auto cold = attach_and_embed(t.train_graph, t.corpus.features, t.params, req);
    const NodeId self[] = {a};
    const auto cold_top = recommend_for_cold(cold.theta_s, index, 10, self);
    const auto warm_top = index.recommend_related(a, 10, RetrievalFilter::ExcludeQuery);
    std::set<NodeId> A, B;
    for (const auto& s : cold_top) A.insert(s.id);
    for (const auto& s : warm_top) B.insert(s.id);
    std::size_t inter = 0;
    for (NodeId v : A) inter += B.count(v);
    const std::size_t uni = A.size() + B.size() - inter;
    jaccard_sum += uni ? static_cast<double>(inter) / static_cast<double>(uni) : 1.0;
  }
  const double jaccard = jaccard_sum / static_cast<double>(picked.size());
  const auto after = embed_all(t.train_graph, t.corpus.features, t.params);
  const bool unchanged = after.theta_s == s_before && after.theta_t == t_before && t.emb.theta_s == s_before &&
                         t.train_graph == g_before;
  return {jaccard >= 0.6 && unchanged,
          fmt::format("mean top-10 Jaccard {:.3f} over {} clones (>= 0.6), warm embeddings {}", jaccard,
                      picked.size(), unchanged ? "bit-unchanged" : "CHANGED")};
}

// ---------------------------------------------------------------------------
// 4. Co-view training on transitive test edges

Outcome selection_bias_trend() {
  const auto corpus = generate(SynthConfig{});
  const auto full = corpus.graph();
  const auto split = make_selection_bias_split(full, {}, 7);
  const std::size_t k10[] = {10};
  auto evaluate = [&](bool use_cv) {
    TrainConfig cfg;
    cfg.use_cv = use_cv;
    const auto res = train(full, corpus.features, cfg, split);
    const auto tg = split.train_graph(full.num_nodes(), use_cv);
    const auto emb = embed_all(tg, corpus.features, res.params);
    return hitrate_mrr(filtered_ranks(emb, tg, split.synthesized), k10);
  };
  const auto both = evaluate(true);
  const auto cp_only = evaluate(false);
  const double hr = both.hitrate[0], hr0 = cp_only.hitrate[0], mrr = both.mrr[0], mrr0 = cp_only.mrr[0];
  const bool ok = hr >= 1.05 * hr0 && mrr >= 1.05 * mrr0 && hr > hr0 && mrr > mrr0;
  return {ok, fmt::format("{} synthesized edges; HitRate@10 {:.4f} vs {:.4f} ({:+.1f}%), MRR@10 {:.4f} vs {:.4f} ({:+.1f}%)",
                          split.synthesized.size(), hr, hr0, 100 * (hr / hr0 - 1), mrr, mrr0, 100 * (mrr / mrr0 - 1))};
}

// ---------------------------------------------------------------------------
// 7. Metric oracles

// Brute-force rank: sort every candidate by (score desc, id asc) and find the target.
std::size_t brute_rank(const RowMatrix<double>& S, const RowMatrix<double>& T, const DirectedProductGraph& g,
                       const Edge& e) {
  std::vector<std::pair<double, NodeId>> cand;
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    if (v == e.src || g.has_edge(e.src, v, RelationKind::CoPurchase)) continue;
    cand.push_back({-S.row(e.src).dot(T.row(v)), v});
  }
  std::sort(cand.begin(), cand.end());
  for (std::size_t i = 0; i < cand.size(); ++i)
    if (cand[i].second == e.dst) return i + 1;
  return 0;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(2024);
  std::size_t mismatches = 0;
  double worst_auc = 0;
  const std::vector<std::size_t> ks{1, 3, 5, 10};
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + trial % 11;
    const auto g = testutil::random_graph(n, 0.2, 0.0, 500 + trial);
    // Quantized embeddings force score ties.
    std::uniform_int_distribution<int> q(-2, 2);
    RowMatrix<double> S(static_cast<Eigen::Index>(n), 2), T(static_cast<Eigen::Index>(n), 2);
    for (Eigen::Index i = 0; i < S.size(); ++i) {
      S.data()[i] = 0.5 * q(rng);
      T.data()[i] = 0.5 * q(rng);
    }
    std::vector<NodeId> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<NodeId>(i);
    const DualEmbeddings<double> emb(ids, S, T);
    EdgeList test;
    std::uniform_int_distribution<NodeId> node(0, static_cast<NodeId>(n - 1));
    while (test.size() < 6) {
      const Edge e{node(rng), node(rng)};
      if (e.src != e.dst) test.push_back(e);
    }
    const auto ranks = filtered_ranks(emb, g, test);
    std::vector<std::size_t> oracle;
    for (const auto& e : test) oracle.push_back(brute_rank(S, T, g, e));
    if (ranks != oracle) ++mismatches;
    const auto m = hitrate_mrr(ranks, ks);
    for (std::size_t i = 0; i < ks.size(); ++i) {
      double hits = 0, rr = 0;
      for (std::size_t r : oracle)
        if (r >= 1 && r <= ks[i]) {
          hits += 1;
          rr += 1.0 / static_cast<double>(r);
        }
      if (m.hitrate[i] != hits / 6.0 || m.mrr[i] != rr / 6.0) ++mismatches;
    }
    std::vector<double> pos, neg;
    std::uniform_int_distribution<int> len(1, 12), val(0, 9);
    for (int i = len(rng); i > 0; --i) pos.push_back(0.1 * val(rng));
    for (int i = len(rng); i > 0; --i) neg.push_back(0.1 * val(rng));
    double wins = 0;
    for (double a : pos)
      for (double b : neg) wins += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
    const double oracle_auc = wins / static_cast<double>(pos.size() * neg.size());
    worst_auc = std::max(worst_auc, std::abs(auc_mann_whitney(pos, neg) - oracle_auc));
  }
  return {mismatches == 0 && worst_auc <= 1e-12,
          fmt::format("200 instances: {} rank/HitRate/MRR mismatches, max AUC deviation {:.1e}", mismatches, worst_auc)};
}

// ---------------------------------------------------------------------------
// 8. Retrieval exactness

Outcome retrieval_exactness() {
  const std::size_t n = 10000, d = 16;
  RowMatrix<double> S = testutil::random_features(n, d, 31).values();
  RowMatrix<double> T = testutil::random_features(n, d, 32).values();
  S.rowwise().normalize();
  T.rowwise().normalize();
  // Exact duplicates create ties among the top results.
  for (Eigen::Index i = 0; i < 500; ++i) T.row(5000 + i) = T.row(i);
  KeyMap keys;
  for (std::size_t i = 0; i < n; ++i) keys.insert("p" + std::to_string(i));
  const EmbeddingIndex index(keys, S, T);
  std::size_t mismatches = 0, tie_queries = 0;
  for (NodeId q = 0; q < 1000; ++q) {
    const auto got = index.recommend_related(q, 10, RetrievalFilter::ExcludeQuery);
    std::vector<Scored> all;
    for (NodeId v = 0; v < n; ++v)
      if (v != q) all.push_back({v, S.row(q).dot(T.row(v))});
    std::stable_sort(all.begin(), all.end(), [](const Scored& a, const Scored& b) { return a.score > b.score; });
    all.resize(10);
    bool same = got.size() == all.size();
    for (std::size_t i = 0; same && i < got.size(); ++i)
      same = got[i].id == all[i].id && std::abs(got[i].score - all[i].score) <= 1e-12;
    if (!same) ++mismatches;
    for (std::size_t i = 1; i < got.size(); ++i)
      if (got[i].score == got[i - 1].score) {
        ++tie_queries;
        if (got[i].id < got[i - 1].id) ++mismatches;
        break;
      }
  }
  return {mismatches == 0 && tie_queries > 0,
          fmt::format("1000 queries over {} rows: {} mismatches, {} queries with ties in the top 10", n, mismatches,
                      tie_queries)};
}

// ---------------------------------------------------------------------------
// 9. Pipeline determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome pipeline_determinism() {
  const fs::path root = fs::temp_directory_path() / ("asymgraph_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  std::vector<std::string> reports;
  std::string failure;
  for (int run = 0; run < 2 && failure.empty(); ++run) {
    const fs::path dir = root / std::to_string(run);
    const auto d = [&](const char* name) { return (dir / name).string(); };
    const std::vector<std::vector<std::string>> steps{
        {"--seed", "11", "--threads", "1", "synth", "--out", d("data")},
        {"--seed", "11", "--threads", "1", "train", "--graph", d("data") + "/edges.tsv", "--features",
         d("data") + "/features.tsv", "--out", d("model"), "--epochs", "3"},
        {"--seed", "11", "--threads", "1", "eval", "--task", "node-rec", "--model", d("model"), "--graph",
         d("data") + "/edges.tsv", "--features", d("data") + "/features.tsv", "--out", d("report")}};
    for (const auto& args : steps) {
      std::ostringstream out, err;
      const int code = cli::run(args, out, err);
      if (code != 0) {
        failure = fmt::format("'{}' exited {}: {}", args[4], code, err.str());
        break;
      }
    }
    if (failure.empty()) reports.push_back(slurp(dir / "report" / "report.tsv") + slurp(dir / "report" / "summary.txt"));
  }
  fs::remove_all(root);
  if (!failure.empty()) return {false, failure};
  const bool same = reports.size() == 2 && reports[0] == reports[1] && !reports[0].empty();
  return {same, fmt::format("two synth -> train(3 epochs) -> eval runs: reports {} ({} bytes)",
                            same ? "byte-identical" : "DIFFER", reports[0].size())};
}

}  // namespace

int main() {
  logger().set_level(spdlog::level::warn);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_check},
      {"forward-pass fidelity", forward_fidelity},
      {"asymmetry and existence AUC", asymmetry_trend},
      {"co-view training on transitive edges", selection_bias_trend},
      {"node recommendation sanity", node_rec_sanity},
      {"cold-start consistency", coldstart_consistency},
      {"metric oracles", metric_oracles},
      {"retrieval exactness", retrieval_exactness},
      {"pipeline determinism", pipeline_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << fmt::format("{} {}. {}: {}", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail)
              << std::endl;
  }
  std::cout << fmt::format("{}/{} criteria passed", criteria.size() - static_cast<std::size_t>(failed), criteria.size())
            << std::endl;
  return failed == 0 ? 0 : 1;
}
