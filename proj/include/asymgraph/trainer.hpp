#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "asymgraph/adam.hpp"
#include "asymgraph/checkpoint.hpp"
#include "asymgraph/common.hpp"
#include "asymgraph/config.hpp"
#include "asymgraph/eval.hpp"
#include "asymgraph/features.hpp"
#include "asymgraph/graph.hpp"
#include "asymgraph/log.hpp"
#include "asymgraph/loss.hpp"
#include "asymgraph/model.hpp"
#include "asymgraph/sampler.hpp"

namespace asymgraph {

struct TrainConfig {
  double lr = 1e-4;
  std::size_t batch_size = 1024;
  std::size_t max_epochs = 30;
  std::size_t layers = 3;
  std::size_t d_h = 64;
  Fanouts fanouts{{20, 10, 10}};
  std::size_t n_k = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t root_seed = 0;
  std::size_t early_stop_patience = 5;  // epochs without validation MRR@10 improvement
  bool exclude_positive_negatives = true;
  bool use_cv = true;  // train on co-view edges too (false: co-purchase only)
  std::size_t cv_cap = 1024;  // co-view edges per batch
  LossConfig loss;
  std::size_t eval_batch_size = 1024;

  void validate() const {
    if (!(lr >= 0) || batch_size < 1 || max_epochs < 1 || layers < 1 || d_h < 1 || n_k < 1 || cv_cap < 1 ||
        eval_batch_size < 1)
      throw UsageError("training configuration values must be positive");
    fanouts.validate();
    if (fanouts.layers() != layers)
      throw UsageError(fmt::format("fanouts has {} entries but layers = {}", fanouts.layers(), layers));
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0))
      throw UsageError("adam hyperparameters out of range");
  }

  AdamConfig adam() const { return {lr, beta1, beta2, eps}; }

  /// Reads the keys it knows from `kv`; unknown keys are left for the caller to reject.
  static TrainConfig from_config(const KeyValueConfig& kv) {
    TrainConfig c;
    c.lr = kv.get_double("lr", c.lr);
    c.batch_size = kv.get_uint("batch_size", c.batch_size);
    c.max_epochs = kv.get_uint("max_epochs", c.max_epochs);
    c.layers = kv.get_uint("layers", c.layers);
    c.d_h = kv.get_uint("d_h", c.d_h);
    const auto fan = kv.get_uint_list("fanouts", {20, 10, 10});
    c.fanouts.caps.assign(fan.begin(), fan.end());
    if (!kv.has("fanouts") && c.layers != 3) {
      c.fanouts.caps.assign(c.layers, 10);
      c.fanouts.caps[0] = 20;
    }
    c.n_k = kv.get_uint("n_k", c.n_k);
    c.beta1 = kv.get_double("adam_beta1", c.beta1);
    c.beta2 = kv.get_double("adam_beta2", c.beta2);
    c.eps = kv.get_double("adam_eps", c.eps);
    c.root_seed = kv.get_uint("seed", c.root_seed);
    c.early_stop_patience = kv.get_uint("early_stop_patience", c.early_stop_patience);
    c.exclude_positive_negatives = kv.get_bool("exclude_positive_negatives", c.exclude_positive_negatives);
    c.use_cv = kv.get_bool("use_cv", c.use_cv);
    c.cv_cap = kv.get_uint("cv_cap", c.cv_cap);
    c.eval_batch_size = kv.get_uint("eval_batch_size", c.eval_batch_size);
    const auto form = kv.get_string("negative_form", "shifted");
    if (form == "shifted") c.loss.negative_form = NegativeForm::Shifted;
    else if (form == "conventional") c.loss.negative_form = NegativeForm::Conventional;
    else throw UsageError("negative_form must be 'shifted' or 'conventional'");
    const auto w = kv.get_double_list("loss_weights", {1, 1, 1, 1, 1, 1});
    if (w.size() != 6) throw UsageError("loss_weights needs 6 values");
    std::copy(w.begin(), w.end(), c.loss.weights.begin());
    c.validate();
    return c;
  }

  /// `key = value` lines that from_config reads back to an identical config.
  std::string to_config_text() const {
    std::string out;
    out += fmt::format("lr = {}\n", lr);
    out += fmt::format("batch_size = {}\n", batch_size);
    out += fmt::format("max_epochs = {}\n", max_epochs);
    out += fmt::format("layers = {}\n", layers);
    out += fmt::format("d_h = {}\n", d_h);
    out += fmt::format("fanouts = {}\n", fmt::join(fanouts.caps, ","));
    out += fmt::format("n_k = {}\n", n_k);
    out += fmt::format("adam_beta1 = {}\nadam_beta2 = {}\nadam_eps = {}\n", beta1, beta2, eps);
    out += fmt::format("seed = {}\n", root_seed);
    out += fmt::format("early_stop_patience = {}\n", early_stop_patience);
    out += fmt::format("exclude_positive_negatives = {}\n", exclude_positive_negatives);
    out += fmt::format("use_cv = {}\n", use_cv);
    out += fmt::format("cv_cap = {}\n", cv_cap);
    out += fmt::format("eval_batch_size = {}\n", eval_batch_size);
    out += fmt::format("negative_form = {}\n", loss.negative_form == NegativeForm::Shifted ? "shifted" : "conventional");
    out += fmt::format("loss_weights = {}\n", fmt::join(loss.weights, ","));
    return out;
  }
};

struct BatchLog {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t edges = 0;
  double total = 0.0;
  std::array<double, 6> term_losses{};  // negated log-likelihood terms
  double wall_ms = 0.0;
};

inline std::string format_batch_log(const BatchLog& b) {
  return fmt::format("{}\t{}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.6f}\t{:.1f}\n", b.epoch, b.batch, b.total,
                     b.term_losses[0], b.term_losses[1], b.term_losses[2], b.term_losses[3], b.term_losses[4],
                     b.term_losses[5], b.wall_ms);
}

struct EpochSummary {
  std::size_t epoch = 0;
  double mean_loss = 0.0;  // summed batch totals / training edges
  std::optional<double> val_mrr10;
  bool improved = false;
};

/// Everything needed to continue training exactly where it stopped.
template <typename Scalar = double>
struct TrainState {
  ModelParams<Scalar> params;
  Adam<Scalar> adam;
  std::size_t epoch = 0;  // completed epochs
  double best_metric = -1.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_since_best = 0;
  bool stopped = false;
  std::uint64_t root_seed = 0;
  ModelParams<Scalar> best_params;
};

inline constexpr std::array<char, 8> kStateMagic{'A', 'G', 'S', 'T', 'A', 'T', 'E', '\0'};

template <typename Scalar>
void save_state(std::ostream& out, const TrainState<Scalar>& s) {
  binio::put_magic(out, kStateMagic);
  write_header(out, header_of(s.params));
  write_weights(out, s.params.weights);
  write_weights(out, s.adam.first_moments());
  write_weights(out, s.adam.second_moments());
  binio::put_u64(out, s.adam.steps());
  binio::put_u64(out, s.epoch);
  binio::put_f64(out, s.best_metric);
  binio::put_u64(out, s.best_epoch);
  binio::put_u64(out, s.epochs_since_best);
  binio::put_u64(out, s.stopped ? 1 : 0);
  binio::put_u64(out, s.root_seed);
  const auto& ac = s.adam.config();
  binio::put_f64(out, ac.lr);
  binio::put_f64(out, ac.beta1);
  binio::put_f64(out, ac.beta2);
  binio::put_f64(out, ac.eps);
  write_weights(out, s.best_params.weights);
  if (!out) throw DataError("failed to write training state");
}

template <typename Scalar = double>
TrainState<Scalar> load_state(std::istream& in) {
  binio::expect_magic(in, kStateMagic, "training state checkpoint");
  const auto h = read_header(in);
  TrainState<Scalar> s;
  s.params.weights = read_weights<Scalar>(in, h);
  auto m = read_weights<Scalar>(in, h);
  auto v = read_weights<Scalar>(in, h);
  const auto steps = binio::get_u64(in);
  s.epoch = binio::get_u64(in);
  s.best_metric = binio::get_f64(in);
  s.best_epoch = binio::get_u64(in);
  s.epochs_since_best = binio::get_u64(in);
  s.stopped = binio::get_u64(in) != 0;
  s.root_seed = binio::get_u64(in);
  AdamConfig ac;
  ac.lr = binio::get_f64(in);
  ac.beta1 = binio::get_f64(in);
  ac.beta2 = binio::get_f64(in);
  ac.eps = binio::get_f64(in);
  s.best_params.weights = read_weights<Scalar>(in, h);
  s.adam = Adam<Scalar>(ac, s.params.weights);
  s.adam.restore(std::move(m), std::move(v), steps);
  s.params.validate();
  return s;
}

template <typename Scalar>
void save_state_file(const std::string& path, const TrainState<Scalar>& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  save_state(out, s);
}

template <typename Scalar = double>
TrainState<Scalar> load_state_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open training state '" + path + "'");
  return load_state<Scalar>(in);
}

/// Minibatch trainer over the co-purchase edges of a training graph. Randomness is
/// derived from (root seed, epoch, batch), so a resumed run replays the same stream.
template <typename Scalar = double>
class Trainer {
 public:
  using BatchCallback = std::function<void(const BatchLog&)>;
  using EpochCallback = std::function<void(const EpochSummary&)>;
  using Validator = std::function<double(const ModelParams<Scalar>&)>;

  Trainer(const DirectedProductGraph& train_graph, const FeatureMatrix& features, TrainConfig cfg,
          EdgeList val_edges = {})
      : graph_(train_graph), features_(features), cfg_(std::move(cfg)), val_(std::move(val_edges)) {
    cfg_.validate();
    if (features_.num_nodes() != graph_.num_nodes())
      throw DataError(fmt::format("feature rows ({}) do not match graph nodes ({})", features_.num_nodes(),
                                  graph_.num_nodes()));
    state_.params = ModelParams<Scalar>::init(features_.dim(), cfg_.d_h, cfg_.layers, derive_seed(cfg_.root_seed, 0x11));
    state_.adam = Adam<Scalar>(cfg_.adam(), state_.params.weights);
    state_.root_seed = cfg_.root_seed;
    state_.best_params = state_.params;
  }

  /// Continues from a saved state; shapes and seed must agree with `cfg`.
  Trainer(const DirectedProductGraph& train_graph, const FeatureMatrix& features, TrainConfig cfg,
          EdgeList val_edges, TrainState<Scalar> resumed)
      : Trainer(train_graph, features, std::move(cfg), std::move(val_edges)) {
    const auto& p = resumed.params;
    if (p.layers() != cfg_.layers || p.d_h() != cfg_.d_h || p.d_in() != features_.dim())
      throw DataError(fmt::format("checkpoint shape (L={}, d_in={}, d_h={}) does not match configuration (L={}, d_in={}, d_h={})",
                                  p.layers(), p.d_in(), p.d_h(), cfg_.layers, features_.dim(), cfg_.d_h));
    if (resumed.root_seed != cfg_.root_seed)
      throw DataError(fmt::format("checkpoint seed {} does not match configured seed {}", resumed.root_seed, cfg_.root_seed));
    state_ = std::move(resumed);
  }

  void on_batch(BatchCallback cb) { on_batch_ = std::move(cb); }
  void on_epoch(EpochCallback cb) { on_epoch_ = std::move(cb); }
  /// Replaces the default validation metric (filtered MRR@10 of the validation edges).
  void set_validator(Validator v) { validator_ = std::move(v); }

  const TrainState<Scalar>& state() const { return state_; }
  const TrainConfig& config() const { return cfg_; }
  bool finished() const { return state_.stopped || state_.epoch >= cfg_.max_epochs; }

  /// Parameters with the best validation MRR@10 (latest parameters when there is no validation set).
  const ModelParams<Scalar>& best_params() const { return has_validation() ? state_.best_params : state_.params; }

  /// Runs epochs until max_epochs, early stop, or `until_epoch` completed epochs.
  void run(std::optional<std::size_t> until_epoch = std::nullopt) {
    const std::size_t stop_at = std::min(cfg_.max_epochs, until_epoch.value_or(cfg_.max_epochs));
    while (!state_.stopped && state_.epoch < stop_at) run_epoch();
  }

  EpochSummary run_epoch() {
    const std::size_t epoch = state_.epoch + 1;
    EdgeList order = graph_.cp_edges();
    std::mt19937_64 shuffle_rng(derive_seed(cfg_.root_seed, 0x5A, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochSummary summary;
    summary.epoch = epoch;
    double loss_sum = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), begin + cfg_.batch_size);
      const auto t0 = std::chrono::steady_clock::now();
      BatchLog log = train_batch(EdgeList(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                          order.begin() + static_cast<std::ptrdiff_t>(end)),
                                 epoch, batch_index);
      log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      loss_sum += log.total;
      if (on_batch_) on_batch_(log);
    }
    summary.mean_loss = order.empty() ? 0.0 : loss_sum / static_cast<double>(order.size());

    state_.epoch = epoch;
    if (has_validation()) {
      const double mrr = validator_ ? validator_(state_.params) : validation_mrr10();
      summary.val_mrr10 = mrr;
      if (mrr > state_.best_metric) {
        state_.best_metric = mrr;
        state_.best_epoch = epoch;
        state_.best_params = state_.params;
        state_.epochs_since_best = 0;
        summary.improved = true;
      } else if (++state_.epochs_since_best >= cfg_.early_stop_patience) {
        state_.stopped = true;
        logger().info("early stop after epoch {} (best MRR@10 {:.4f} at epoch {})", epoch, state_.best_metric,
                      state_.best_epoch);
      }
    } else {
      state_.best_params = state_.params;
      state_.best_epoch = epoch;
    }
    if (on_epoch_) on_epoch_(summary);
    return summary;
  }

  /// Builds the loss batch for a set of positive co-purchase edges.
  LossBatch make_batch(EdgeList cp, std::size_t epoch, std::size_t batch_index) const {
    LossBatch batch;
    batch.cp_edges = std::move(cp);
    batch.flag_one_way(graph_);
    std::vector<NodeId> endpoints;
    for (const auto& e : batch.cp_edges) endpoints.insert(endpoints.end(), {e.src, e.dst});
    std::sort(endpoints.begin(), endpoints.end());
    endpoints.erase(std::unique(endpoints.begin(), endpoints.end()), endpoints.end());
    EdgeList cv;
    for (NodeId u : endpoints)
      for (NodeId v : graph_.neighbors(u, RelationKind::CoView, Direction::Out)) cv.push_back({u, v});
    if (cv.size() > cfg_.cv_cap) {
      std::mt19937_64 rng(derive_seed(cfg_.root_seed, 0xC7, epoch, batch_index));
      EdgeList picked;
      std::sample(cv.begin(), cv.end(), std::back_inserter(picked), cfg_.cv_cap, rng);
      cv = std::move(picked);
    }
    batch.cv_edges = std::move(cv);
    batch.negatives = sample_negatives(graph_, batch.cp_edges, cfg_.n_k, derive_seed(cfg_.root_seed, 0x4E, epoch, batch_index),
                                       cfg_.exclude_positive_negatives);
    return batch;
  }

 private:
  BatchLog train_batch(EdgeList cp, std::size_t epoch, std::size_t batch_index) {
    const LossBatch batch = make_batch(std::move(cp), epoch, batch_index);
    const auto seeds = batch.touched_nodes();
    const auto blocks = sample_blocks(graph_, seeds, cfg_.fanouts, derive_seed(cfg_.root_seed, 0xB1, epoch, batch_index));
    ForwardCache<Scalar> cache;
    DualEmbeddings<Scalar> emb;
    try {
      emb = forward(blocks, features_, state_.params, &cache);
    } catch (const NumericalError& e) {
      throw NumericalError(fmt::format("epoch {} batch {}: {}", epoch, batch_index, e.what()));
    }
    const LossValue loss = asymmetric_loss(emb, batch, cfg_.loss);
    if (!std::isfinite(loss.total))
      throw NumericalError(fmt::format("non-finite loss at epoch {} batch {}", epoch, batch_index));
    const auto grad = loss_grad(emb, batch, cfg_.loss);
    const auto grads = backward(blocks, cache, state_.params, grad.theta_s, grad.theta_t);
    state_.adam.step(state_.params.weights, grads.weights);

    BatchLog log;
    log.epoch = epoch;
    log.batch = batch_index;
    log.edges = batch.cp_edges.size();
    log.total = loss.total;
    for (std::size_t k = 0; k < 6; ++k) log.term_losses[k] = -loss.terms[k];
    return log;
  }

  bool has_validation() const { return !val_.empty() || static_cast<bool>(validator_); }

  double validation_mrr10() const {
    const auto emb = embed_all(graph_, features_, state_.params, cfg_.eval_batch_size);
    const auto ranks = filtered_ranks(emb, graph_, val_);
    const std::size_t k10[] = {10};
    return hitrate_mrr(ranks, k10).mrr.front();
  }

  const DirectedProductGraph& graph_;
  const FeatureMatrix& features_;
  TrainConfig cfg_;
  EdgeList val_;
  TrainState<Scalar> state_;
  BatchCallback on_batch_;
  EpochCallback on_epoch_;
  Validator validator_;
};

/// Validation for node splits: held-out validation products are embedded as cold starts
/// and their co-purchase edges into training products are ranked.
inline std::function<double(const ModelParams<double>&)> cold_start_validator(const DirectedProductGraph& train_graph,
                                                                               const FeatureMatrix& features,
                                                                               const EvalSplit& split) {
  EvalSplit val_split = split;
  val_split.test = split.val;
  return [&train_graph, &features, val_split](const ModelParams<double>& p) {
    const auto warm = embed_all(train_graph, features, p);
    const auto ranks = coldstart_ranks(train_graph, features, p, warm, val_split);
    const std::size_t k10[] = {10};
    return hitrate_mrr(ranks, k10).mrr.front();
  };
}

struct TrainResult {
  ModelParams<double> params;
  std::vector<BatchLog> log;
  std::vector<EpochSummary> epochs;
};

/// Trains on the split's training graph with its validation edges for early stopping.
inline TrainResult train(const DirectedProductGraph& g, const FeatureMatrix& features, const TrainConfig& cfg,
                         const EvalSplit& split) {
  if (split.train.empty()) throw DataError("training split is empty");
  const auto train_graph = split.train_graph(g.num_nodes(), cfg.use_cv);
  Trainer<double> trainer(train_graph, features, cfg, split.val);
  if (split.kind == SplitKind::NodeSplit && !split.val.empty())
    trainer.set_validator(cold_start_validator(train_graph, features, split));
  TrainResult result;
  trainer.on_batch([&](const BatchLog& b) { result.log.push_back(b); });
  trainer.on_epoch([&](const EpochSummary& e) { result.epochs.push_back(e); });
  trainer.run();
  result.params = trainer.best_params();
  return result;
}

}  // namespace asymgraph
