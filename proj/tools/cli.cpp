#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <openssl/evp.h>

#include "asymgraph/asymgraph.hpp"

namespace asymgraph::cli {

std::string file_sha256(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 initialization failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

namespace {

namespace fs = std::filesystem;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::size_t threads = std::max(1u, std::thread::hardware_concurrency());
};

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  return out;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir.string() + "': " + ec.message());
}

KeyValueConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  auto in = open_in(path);
  return KeyValueConfig::parse(in, path);
}

struct Corpus {
  KeyMap keys;
  FeatureMatrix features;
  DirectedProductGraph graph;
};

/// The feature file defines the product ids; every edge endpoint must appear in it.
Corpus load_corpus(const std::string& graph_path, const std::string& features_path) {
  Corpus c;
  {
    auto in = open_in(features_path);
    auto ff = read_feature_file(in);
    c.keys = std::move(ff.keys);
    c.features = std::move(ff.features);
  }
  auto in = open_in(graph_path);
  auto edges = read_edge_file(in, c.keys, false);
  c.graph = DirectedProductGraph(c.keys.size(), std::move(edges.cp), edges.cv);
  return c;
}

DirectedProductGraph load_graph(const fs::path& path, KeyMap& keys) {
  auto in = open_in(path.string());
  auto edges = read_edge_file(in, keys, false);
  return DirectedProductGraph(keys.size(), std::move(edges.cp), edges.cv);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(now));
}

/// Run manifest: `key = value` lines, readable with KeyValueConfig.
class Manifest {
 public:
  Manifest(std::string command, const Globals& g) {
    add("artifact_version", kArtifactVersion);
    add("command", std::move(command));
    add("created_utc", utc_now());
    add("threads", std::to_string(g.threads));
  }

  void add(std::string key, std::string value) { lines_.emplace_back(std::move(key), std::move(value)); }

  void add_input(const std::string& name, const std::string& path) {
    add("input." + name, path);
    add("input." + name + ".sha256", file_sha256(path));
  }

  void add_config(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) add("config." + line.substr(0, eq), line.substr(eq + 3));
    }
  }

  void write(const fs::path& dir) const {
    auto out = open_out(dir / "manifest.txt");
    for (const auto& [k, v] : lines_) out << k << " = " << v << '\n';
  }

 private:
  std::vector<std::pair<std::string, std::string>> lines_;
};

SplitKind parse_split(const std::string& s) {
  if (s == "edge") return SplitKind::EdgeSplit;
  if (s == "node") return SplitKind::NodeSplit;
  if (s == "selection-bias") return SplitKind::SelectionBiasSplit;
  throw UsageError("unknown split '" + s + "' (expected edge, node or selection-bias)");
}

std::string split_flag(SplitKind k) {
  switch (k) {
    case SplitKind::EdgeSplit: return "edge";
    case SplitKind::NodeSplit: return "node";
    case SplitKind::SelectionBiasSplit: return "selection-bias";
  }
  return "edge";
}

EvalSplit make_split(const DirectedProductGraph& g, SplitKind kind, std::uint64_t seed) {
  switch (kind) {
    case SplitKind::EdgeSplit: return make_edge_split(g, SplitRatios{}, seed);
    case SplitKind::NodeSplit: return make_node_split(g, SplitRatios{}, seed);
    case SplitKind::SelectionBiasSplit: return make_selection_bias_split(g, SplitRatios{}, seed);
  }
  throw UsageError("unknown split kind");
}

void write_graph_file(const fs::path& path, const DirectedProductGraph& g, const KeyMap& keys) {
  auto out = open_out(path);
  write_edge_file(out, g, keys);
}

std::string format_stats(const GraphStats& s) {
  return fmt::format(
      "nodes\t{}\ncp_edges\t{}\ncv_pairs\t{}\none_way_cp\t{}\nreciprocal_cp_pairs\t{}\navg_degree\t{:.4f}\n"
      "directed_share\t{:.4f}\n",
      s.num_nodes, s.cp_edges, s.cv_pairs, s.one_way_cp, s.reciprocal_cp_pairs, s.avg_degree, s.directed_share);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config, out;
};

int cmd_synth(const SynthArgs& a, const Globals& g, std::ostream& out) {
  auto kv = load_config(a.config);
  SynthConfig cfg = SynthConfig::from_config(kv);
  kv.reject_unused();
  if (g.seed) cfg.seed = *g.seed;
  const fs::path dir(a.out);
  make_dir(dir);
  Manifest m("synth", g);
  m.add("seed", std::to_string(cfg.seed));
  if (!a.config.empty()) m.add_input("config", a.config);
  m.add_config(cfg.to_config_text());
  m.write(dir);

  const auto corpus = generate(cfg);
  {
    auto f = open_out(dir / "edges.tsv");
    write_synth_edges(f, corpus);
  }
  {
    auto f = open_out(dir / "features.tsv");
    write_feature_file(f, corpus.keys, corpus.features);
  }
  {
    auto f = open_out(dir / "ground_truth.tsv");
    write_ground_truth(f, corpus);
  }
  out << format_stats(graph_stats(corpus.graph()));
  out << fmt::format("planted\t{}\ntransitive\t{}\n", corpus.planted.size(), corpus.transitive.size());
  return kOk;
}

struct BuildArgs {
  std::string edges, features, out;
};

int cmd_build_graph(const BuildArgs& a, const Globals& g, std::ostream& out) {
  const auto c = load_corpus(a.edges, a.features);
  const fs::path dir(a.out);
  make_dir(dir);
  Manifest m("build-graph", g);
  m.add_input("edges", a.edges);
  m.add_input("features", a.features);
  m.write(dir);
  write_graph_file(dir / "graph.tsv", c.graph, c.keys);
  const auto stats = format_stats(graph_stats(c.graph));
  auto f = open_out(dir / "stats.txt");
  f << stats;
  out << stats;
  return kOk;
}

struct TrainArgs {
  std::string graph, features, config, out, split = "edge";
  std::optional<std::uint64_t> split_seed, epochs;
  bool resume = false;
};

int cmd_train(const TrainArgs& a, const Globals& g) {
  auto kv = load_config(a.config);
  TrainConfig cfg = TrainConfig::from_config(kv);
  kv.reject_unused();
  if (g.seed) cfg.root_seed = *g.seed;
  if (a.epochs) {
    if (*a.epochs < 1) throw UsageError("--epochs must be >= 1");
    cfg.max_epochs = *a.epochs;
  }
  const SplitKind kind = parse_split(a.split);
  const std::uint64_t split_seed = a.split_seed.value_or(cfg.root_seed);

  const auto c = load_corpus(a.graph, a.features);
  const fs::path dir(a.out);
  make_dir(dir);
  if (a.resume && !fs::exists(dir / "state.ckpt"))
    throw DataError("--resume given but '" + (dir / "state.ckpt").string() + "' does not exist");

  Manifest m("train", g);
  m.add("seed", std::to_string(cfg.root_seed));
  m.add("split", split_flag(kind));
  m.add("split_seed", std::to_string(split_seed));
  m.add("resumed", a.resume ? "true" : "false");
  m.add_input("graph", a.graph);
  m.add_input("features", a.features);
  if (!a.config.empty()) m.add_input("config", a.config);
  m.add_config(cfg.to_config_text());
  m.write(dir);

  const EvalSplit split = make_split(c.graph, kind, split_seed);
  if (split.train.empty()) throw DataError("training split is empty");
  const auto train_graph = split.train_graph(c.graph.num_nodes(), cfg.use_cv);
  write_graph_file(dir / "train_graph.tsv", train_graph, c.keys);
  {
    auto f = open_out(dir / "config.txt");
    f << cfg.to_config_text();
  }

  std::optional<Trainer<double>> trainer;
  if (a.resume) {
    trainer.emplace(train_graph, c.features, cfg, split.val, load_state_file(( dir / "state.ckpt").string()));
    logger().info("resuming after epoch {}", trainer->state().epoch);
  } else {
    trainer.emplace(train_graph, c.features, cfg, split.val);
  }
  if (kind == SplitKind::NodeSplit && !split.val.empty())
    trainer->set_validator(cold_start_validator(train_graph, c.features, split));

  auto log = open_out(dir / "train_log.tsv", a.resume ? std::ios::app : std::ios::out);
  if (!a.resume) log << "epoch\tbatch\ttotal\tT1\tT2\tT3\tT4\tT5\tT6\twall_ms\n";
  trainer->on_batch([&](const BatchLog& b) { log << format_batch_log(b); });
  trainer->on_epoch([&](const EpochSummary& e) {
    if (e.val_mrr10)
      logger().info("epoch {}: mean loss {:.6f}, validation MRR@10 {:.4f}", e.epoch, e.mean_loss, *e.val_mrr10);
    else
      logger().info("epoch {}: mean loss {:.6f}", e.epoch, e.mean_loss);
    save_state_file((dir / "state.ckpt").string(), trainer->state());
    log.flush();
  });
  trainer->run();

  const auto& best = trainer->best_params();
  save_model_file((dir / "model.ckpt").string(), best);
  const auto emb = embed_all(train_graph, c.features, best);
  auto f = open_out(dir / "embeddings.tsv");
  write_embeddings(f, c.keys, emb);
  logger().info("trained {} epoch(s); model written to {}", trainer->state().epoch, dir.string());
  return kOk;
}

struct ModelDir {
  KeyMap keys;
  FeatureMatrix features;
  ModelParams<double> params;
  DirectedProductGraph train_graph;
};

/// Loads a model directory with the product features the model was trained on.
ModelDir load_model_dir(const fs::path& dir, const std::string& features_path) {
  ModelDir md;
  {
    auto in = open_in(features_path);
    auto ff = read_feature_file(in);
    md.keys = std::move(ff.keys);
    md.features = std::move(ff.features);
  }
  md.params = load_model_file((dir / "model.ckpt").string());
  if (md.params.d_in() != md.features.dim())
    throw DataError(fmt::format("features have dimension {} but the model expects {}", md.features.dim(),
                                md.params.d_in()));
  md.train_graph = load_graph(dir / "train_graph.tsv", md.keys);
  return md;
}

struct EmbedArgs {
  std::string model, graph, features, out;
};

int cmd_embed(const EmbedArgs& a, const Globals& g) {
  const fs::path dir(a.model);
  ModelDir md = load_model_dir(dir, a.features);
  const auto graph = a.graph.empty() ? md.train_graph : load_graph(a.graph, md.keys);
  const fs::path out_path(a.out);
  if (out_path.has_parent_path()) make_dir(out_path.parent_path());
  Manifest m("embed", g);
  m.add_input("model", (dir / "model.ckpt").string());
  m.add_input("features", a.features);
  if (!a.graph.empty()) m.add_input("graph", a.graph);
  m.write(out_path.has_parent_path() ? out_path.parent_path() : fs::path("."));
  const auto emb = embed_all(graph, md.features, md.params);
  auto f = open_out(out_path);
  write_embeddings(f, md.keys, emb);
  return kOk;
}

RetrievalFilter parse_filter(const std::string& s) {
  if (s == "none") return RetrievalFilter::None;
  if (s == "exclude_query") return RetrievalFilter::ExcludeQuery;
  if (s == "exclude_train_neighbors") return RetrievalFilter::ExcludeTrainNeighbors;
  throw UsageError("unknown filter '" + s + "' (expected none, exclude_query or exclude_train_neighbors)");
}

struct RecommendArgs {
  std::string index, query, mode = "related", filter = "exclude_query", search = "exact", out;
  std::size_t k = 10, nlist = 32, nprobe = 8;
};

int cmd_recommend(const RecommendArgs& a, std::ostream& out) {
  const fs::path dir(a.index);
  if (a.k < 1) throw UsageError("--k must be >= 1");
  const QueryKind kind = a.mode == "related"   ? QueryKind::Related
                         : a.mode == "similar" ? QueryKind::Similar
                                               : throw UsageError("--mode must be related or similar");
  const RetrievalFilter filter = parse_filter(a.filter);
  const SearchMode search = a.search == "exact"         ? SearchMode::Exact
                            : a.search == "approximate" ? SearchMode::Approximate
                                                        : throw UsageError("--search must be exact or approximate");

  auto in = open_in((dir / "embeddings.tsv").string());
  auto ef = read_embeddings(in);
  std::shared_ptr<const DirectedProductGraph> train_graph;
  if (fs::exists(dir / "train_graph.tsv"))
    train_graph = std::make_shared<const DirectedProductGraph>(load_graph(dir / "train_graph.tsv", ef.keys));
  auto index = EmbeddingIndex::from_embeddings(ef.keys, ef.embeddings, train_graph);
  if (search == SearchMode::Approximate) index.enable_approximate(a.nlist, a.nprobe);

  std::vector<std::string> query_keys;
  if (fs::is_regular_file(a.query)) {
    auto qf = open_in(a.query);
    std::string line;
    while (std::getline(qf, line)) {
      const auto sv = detail::strip_cr(line);
      if (!sv.empty() && sv.front() != '#') query_keys.emplace_back(sv);
    }
  } else {
    query_keys.push_back(a.query);
  }

  // Unknown keys become per-query errors; the others are still answered.
  std::vector<NodeId> ids;
  std::vector<std::size_t> pos;
  std::vector<std::optional<std::string>> errors(query_keys.size());
  for (std::size_t i = 0; i < query_keys.size(); ++i) {
    if (ef.keys.contains(query_keys[i])) {
      ids.push_back(ef.keys.id(query_keys[i]));
      pos.push_back(i);
    } else {
      errors[i] = "unknown product key '" + query_keys[i] + "'";
    }
  }
  const auto results = batch_recommend(index, ids, a.k, filter, kind, search);
  std::vector<const QueryResult*> by_query(query_keys.size(), nullptr);
  for (std::size_t j = 0; j < pos.size(); ++j) by_query[pos[j]] = &results[j];

  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& dst = a.out.empty() ? out : file;
  bool failed = false;
  for (std::size_t i = 0; i < query_keys.size(); ++i) {
    const auto* r = by_query[i];
    const auto err = errors[i] ? errors[i] : (r ? r->error : std::nullopt);
    if (err) {
      logger().error("query '{}': {}", query_keys[i], *err);
      failed = true;
      continue;
    }
    for (std::size_t rank = 0; rank < r->items.size(); ++rank)
      dst << fmt::format("{}\t{}\t{}\t{:.6f}\n", query_keys[i], rank + 1, ef.keys.key(r->items[rank].id),
                         r->items[rank].score);
  }
  return failed ? kData : kOk;
}

struct ColdArgs {
  std::string model, features, cold, edge_kind = "cv", out;
  std::size_t k = 10, k_sim = 5;
};

int cmd_coldstart(const ColdArgs& a, std::ostream& out) {
  if (a.k < 1) throw UsageError("--k must be >= 1");
  const RelationKind edge_kind = a.edge_kind == "cv"   ? RelationKind::CoView
                                 : a.edge_kind == "cp" ? RelationKind::CoPurchase
                                                       : throw UsageError("--edge-kind must be cv or cp");
  const fs::path dir(a.model);
  ModelDir md = load_model_dir(dir, a.features);
  auto ein = open_in((dir / "embeddings.tsv").string());
  auto ef = read_embeddings(ein);
  if (ef.keys.keys() != md.keys.keys())
    throw DataError("product keys of the feature file and the model embeddings differ");
  const auto index = EmbeddingIndex::from_embeddings(ef.keys, ef.embeddings);

  auto cin = open_in(a.cold);
  const auto cold = read_feature_file(cin);
  if (cold.features.dim() != md.features.dim())
    throw DataError(fmt::format("cold products have dimension {} but the model expects {}", cold.features.dim(),
                                md.features.dim()));

  std::ofstream file;
  if (!a.out.empty()) file = open_out(a.out);
  std::ostream& dst = a.out.empty() ? out : file;
  for (std::size_t i = 0; i < cold.keys.size(); ++i) {
    const auto& key = cold.keys.key(static_cast<NodeId>(i));
    ColdStartRequest req{key, cold.features.row(static_cast<NodeId>(i)), a.k_sim, edge_kind};
    const auto r = attach_and_embed(md.train_graph, md.features, md.params, req);
    const auto items = recommend_for_cold(r.theta_s, index, a.k);
    for (std::size_t rank = 0; rank < items.size(); ++rank)
      dst << fmt::format("{}\t{}\t{}\t{:.6f}\n", key, rank + 1, md.keys.key(items[rank].id), items[rank].score);
  }
  return kOk;
}

struct EvalArgs {
  std::string task, model, graph, features, out;
  std::optional<std::uint64_t> split_seed;
  std::size_t k_sim = 5;
};

int cmd_eval(const EvalArgs& a, const Globals& g, std::ostream& out) {
  const fs::path dir(a.model);
  auto min = open_in((dir / "manifest.txt").string());
  const auto manifest = KeyValueConfig::parse(min, (dir / "manifest.txt").string());
  const SplitKind trained_kind = parse_split(manifest.get_string("split", "edge"));
  const std::uint64_t trained_seed = manifest.get_uint("split_seed", 0);
  auto cfg_in = open_in((dir / "config.txt").string());
  const auto model_cfg = TrainConfig::from_config(KeyValueConfig::parse(cfg_in, (dir / "config.txt").string()));

  SplitKind kind;
  if (a.task == "node-rec" || a.task == "lp-exist" || a.task == "lp-dir") kind = SplitKind::EdgeSplit;
  else if (a.task == "coldstart") kind = SplitKind::NodeSplit;
  else if (a.task == "selection-bias") kind = SplitKind::SelectionBiasSplit;
  else throw UsageError("unknown task '" + a.task + "' (expected node-rec, lp-exist, lp-dir, coldstart or selection-bias)");

  const std::uint64_t split_seed = a.split_seed.value_or(trained_seed);
  // Edge and selection-bias splits of one seed share their training edges.
  const bool same_train = (kind == SplitKind::NodeSplit) == (trained_kind == SplitKind::NodeSplit);
  if (split_seed != trained_seed || !same_train)
    logger().warn("model was trained on the {} split with seed {}; evaluating on the {} split with seed {} may leak test edges",
                  split_flag(trained_kind), trained_seed, split_flag(kind), split_seed);

  const auto c = load_corpus(a.graph, a.features);
  const auto params = load_model_file((dir / "model.ckpt").string());

  const fs::path out_dir(a.out);
  if (!a.out.empty()) {
    make_dir(out_dir);
    Manifest m("eval", g);
    m.add("task", a.task);
    m.add("split", split_flag(kind));
    m.add("split_seed", std::to_string(split_seed));
    m.add_input("graph", a.graph);
    m.add_input("features", a.features);
    m.add_input("model", (dir / "model.ckpt").string());
    m.write(out_dir);
  }

  const EvalSplit split = make_split(c.graph, kind, split_seed);
  const auto train_graph = split.train_graph(c.graph.num_nodes(), model_cfg.use_cv);
  const auto emb = embed_all(train_graph, c.features, params);

  MetricReport report;
  std::vector<std::pair<std::string, std::string>> notes{
      {"split", fmt::format("{} (seed {}, ratios 0.75/0.05/0.20)", split_flag(kind), split_seed)},
      {"inference graph", "training edges only; validation and test edges excluded"}};
  if (a.task == "node-rec") {
    report = hitrate_mrr(filtered_ranks(emb, train_graph, split.test), default_ks());
    notes.emplace_back("candidates", "all products except the query and its training co-purchase neighbors");
  } else if (a.task == "selection-bias") {
    report = hitrate_mrr(filtered_ranks(emb, train_graph, split.synthesized), default_ks());
    notes.emplace_back("candidates", "all products except the query and its training co-purchase neighbors");
    notes.emplace_back("synthesized transitive edges",
                       fmt::format("{} of {} candidates (capped at the held-out test size {})",
                                   split.synthesized.size(), split.synthesized_candidates,
                                   split.test.size() - split.synthesized.size()));
  } else if (a.task == "coldstart") {
    report = hitrate_mrr(coldstart_ranks(train_graph, c.features, params, emb, split, a.k_sim), default_ks());
    notes.emplace_back("candidates", "training products only; held-out products embedded from features");
    notes.emplace_back("k_sim", std::to_string(a.k_sim));
  } else if (a.task == "lp-exist") {
    report.auc = auc_existence(emb, c.graph, split.test, derive_seed(split_seed, 0xA1));
    report.num_queries = split.test.size();
    notes.emplace_back("negatives", "one uniform non-edge per test edge");
  } else {
    const auto ow = [&] {
      std::size_t n = 0;
      for (const auto& e : split.test) n += c.graph.has_edge(e.dst, e.src, RelationKind::CoPurchase) ? 0 : 1;
      return n;
    }();
    if (ow == 0) throw DataError("test split has no one-way co-purchase edges");
    report.auc = auc_direction(emb, c.graph, split.test);
    report.num_queries = ow;
    notes.emplace_back("negatives", "reversed one-way test edges");
  }
  report.task = a.task;
  report.notes = std::move(notes);

  const auto tsv = format_report_tsv(report);
  const auto summary = format_report_summary(report);
  if (!a.out.empty()) {
    auto f = open_out(out_dir / "report.tsv");
    f << tsv;
    auto s = open_out(out_dir / "summary.txt");
    s << summary;
    out << summary;
  } else {
    out << tsv;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-embedding product graph recommender: synthesize, train, embed, recommend, evaluate.", "asymgraph"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand too
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Root seed; overrides the config file seed");
  app.add_option("--threads", g.threads, "Worker threads (1 = bit-reproducible)")->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* sc = app.add_subcommand("synth", "Generate a synthetic marketplace corpus");
  sc->add_option("--config", synth.config, "Generator config (key = value)")->check(CLI::ExistingFile);
  sc->add_option("--out", synth.out, "Output directory")->required();

  BuildArgs build;
  auto* bc = app.add_subcommand("build-graph", "Validate inputs and write the normalized graph and its statistics");
  bc->add_option("--edges", build.edges, "Edge file")->required();
  bc->add_option("--features", build.features, "Feature file")->required();
  bc->add_option("--out", build.out, "Output directory")->required();

  TrainArgs train;
  auto* tc = app.add_subcommand("train", "Train the model");
  tc->add_option("--graph", train.graph, "Edge file")->required();
  tc->add_option("--features", train.features, "Feature file")->required();
  tc->add_option("--config", train.config, "Training config (key = value)")->check(CLI::ExistingFile);
  tc->add_option("--out", train.out, "Model directory")->required();
  tc->add_option("--split", train.split, "edge | node | selection-bias");
  tc->add_option("--split-seed", train.split_seed, "Split seed (default: the root seed)");
  tc->add_option("--epochs", train.epochs, "Override max_epochs");
  tc->add_flag("--resume", train.resume, "Continue from <out>/state.ckpt");

  EmbedArgs embed;
  auto* ec = app.add_subcommand("embed", "Write source/target embeddings for every product");
  ec->add_option("--model", embed.model, "Model directory")->required();
  ec->add_option("--features", embed.features, "Feature file")->required();
  ec->add_option("--graph", embed.graph, "Edge file (default: the model's training graph)");
  ec->add_option("--out", embed.out, "Embedding file")->required();

  RecommendArgs rec;
  auto* rc = app.add_subcommand("recommend", "Top-k related or similar products");
  rc->add_option("--index", rec.index, "Model directory")->required();
  rc->add_option("--query", rec.query, "Product key, or a file with one key per line")->required();
  rc->add_option("--k", rec.k, "Results per query");
  rc->add_option("--mode", rec.mode, "related | similar");
  rc->add_option("--filter", rec.filter, "none | exclude_query | exclude_train_neighbors");
  rc->add_option("--search", rec.search, "exact | approximate");
  rc->add_option("--nlist", rec.nlist, "Approximate search: number of partitions");
  rc->add_option("--nprobe", rec.nprobe, "Approximate search: partitions probed per query");
  rc->add_option("--out", rec.out, "Output file (default: stdout)");

  ColdArgs cold;
  auto* cc = app.add_subcommand("coldstart", "Recommend for products with features but no edges");
  cc->add_option("--model", cold.model, "Model directory")->required();
  cc->add_option("--features", cold.features, "Feature file of the warm products")->required();
  cc->add_option("--cold", cold.cold, "Feature file of the cold products")->required();
  cc->add_option("--k", cold.k, "Results per cold product");
  cc->add_option("--k-sim", cold.k_sim, "Warm products attached per cold product");
  cc->add_option("--edge-kind", cold.edge_kind, "cv | cp");
  cc->add_option("--out", cold.out, "Output file (default: stdout)");

  EvalArgs ev;
  auto* vc = app.add_subcommand("eval", "Evaluate a trained model on a held-out split");
  vc->add_option("--task", ev.task, "node-rec | lp-exist | lp-dir | coldstart | selection-bias")->required();
  vc->add_option("--model", ev.model, "Model directory")->required();
  vc->add_option("--graph", ev.graph, "Edge file")->required();
  vc->add_option("--features", ev.features, "Feature file")->required();
  vc->add_option("--split-seed", ev.split_seed, "Split seed (default: the seed the model was trained with)");
  vc->add_option("--k-sim", ev.k_sim, "coldstart task: warm products attached per cold product");
  vc->add_option("--out", ev.out, "Report directory (default: TSV to stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }
  if (seed_opt->count()) g.seed = seed;
  thread_count() = g.threads;

  try {
    if (sc->parsed()) return cmd_synth(synth, g, out);
    if (bc->parsed()) return cmd_build_graph(build, g, out);
    if (tc->parsed()) return cmd_train(train, g);
    if (ec->parsed()) return cmd_embed(embed, g);
    if (rc->parsed()) return cmd_recommend(rec, out);
    if (cc->parsed()) return cmd_coldstart(cold, out);
    if (vc->parsed()) return cmd_eval(ev, g, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace asymgraph::cli
