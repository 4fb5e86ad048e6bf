#include <gtest/gtest.h>

#include <sstream>

#include "asymgraph/synthgen.hpp"
#include "asymgraph/trainer.hpp"
#include "test_util.hpp"

using namespace asymgraph;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.lr = 0.01;
  c.batch_size = 16;
  c.max_epochs = 5;
  c.layers = 2;
  c.d_h = 8;
  c.fanouts = Fanouts{{5, 5}};
  c.n_k = 3;
  c.root_seed = 77;
  return c;
}

std::string state_bytes(const TrainState<double>& s) {
  std::ostringstream out;
  save_state(out, s);
  return out.str();
}

struct Fixture {
  DirectedProductGraph g = testutil::random_graph(60, 0.06, 0.04, 12);
  FeatureMatrix x = testutil::random_features(60, 6, 13);
};

}  // namespace

TEST(Trainer, ZeroLearningRateLeavesParameters) {
  Fixture f;
  auto cfg = small_config();
  cfg.lr = 0.0;
  cfg.max_epochs = 3;
  Trainer<double> t(f.g, f.x, cfg);
  const auto before = t.state().params;
  t.run();
  EXPECT_EQ(t.state().epoch, 3u);
  EXPECT_EQ(t.state().params, before);
}

TEST(Trainer, SingleOneWayEdgeLearnsDirection) {
  const DirectedProductGraph g(3, {{0, 1}}, {});
  const auto x = testutil::random_features(3, 4, 3);
  TrainConfig cfg;
  cfg.lr = 0.01;
  cfg.batch_size = 1;
  cfg.max_epochs = 200;
  cfg.layers = 1;
  cfg.d_h = 4;
  cfg.fanouts = Fanouts::full(1);
  cfg.n_k = 1;
  cfg.root_seed = 5;
  Trainer<double> t(g, x, cfg);
  t.run();
  const auto emb = embed_all(g, x, t.state().params);
  const double forward_score = emb.theta_s.row(0).dot(emb.theta_t.row(1));
  const double backward_score = emb.theta_s.row(1).dot(emb.theta_t.row(0));
  EXPECT_GT(forward_score, backward_score);
  EXPECT_GT(forward_score, 0.5);
}

TEST(Trainer, SameSeedGivesIdenticalCheckpoints) {
  Fixture f;
  Trainer<double> a(f.g, f.x, small_config());
  Trainer<double> b(f.g, f.x, small_config());
  a.run(3);
  b.run(3);
  EXPECT_EQ(state_bytes(a.state()), state_bytes(b.state()));
  auto other = small_config();
  other.root_seed = 78;
  Trainer<double> c(f.g, f.x, other);
  c.run(3);
  EXPECT_NE(state_bytes(a.state()), state_bytes(c.state()));
}

TEST(Trainer, ResumeMatchesStraightRun) {
  Fixture f;
  const auto split = make_edge_split(f.g, {}, 1);
  const auto tg = split.train_graph(60);
  Trainer<double> straight(tg, f.x, small_config(), split.val);
  straight.run();

  Trainer<double> first(tg, f.x, small_config(), split.val);
  first.run(3);
  std::stringstream saved;
  save_state(saved, first.state());
  Trainer<double> resumed(tg, f.x, small_config(), split.val, load_state(saved));
  EXPECT_EQ(resumed.state().epoch, 3u);
  resumed.run();
  EXPECT_EQ(state_bytes(resumed.state()), state_bytes(straight.state()));
  EXPECT_EQ(resumed.best_params(), straight.best_params());
}

TEST(Trainer, StateRoundTripIsExact) {
  Fixture f;
  Trainer<double> t(f.g, f.x, small_config());
  t.run(2);
  std::stringstream buf;
  save_state(buf, t.state());
  const auto s = load_state(buf);
  EXPECT_EQ(s.params, t.state().params);
  EXPECT_EQ(s.adam.steps(), t.state().adam.steps());
  EXPECT_EQ(s.epoch, 2u);
  EXPECT_EQ(s.root_seed, 77u);
  EXPECT_EQ(state_bytes(s), state_bytes(t.state()));
}

TEST(Trainer, CorruptStateIsRejected) {
  Fixture f;
  Trainer<double> t(f.g, f.x, small_config());
  t.run(1);
  auto bytes = state_bytes(t.state());
  bytes[3] ^= 0x20;
  std::stringstream bad(bytes);
  EXPECT_THROW(load_state(bad), DataError);
  std::stringstream model_not_state;
  save_model(model_not_state, t.state().params);
  EXPECT_THROW(load_state(model_not_state), DataError);
}

TEST(Trainer, ResumeWithChangedShapeOrSeedIsRejected) {
  Fixture f;
  Trainer<double> t(f.g, f.x, small_config());
  t.run(1);
  auto wider = small_config();
  wider.d_h = 16;
  EXPECT_THROW(Trainer<double>(f.g, f.x, wider, {}, t.state()), DataError);
  auto reseeded = small_config();
  reseeded.root_seed = 1;
  EXPECT_THROW(Trainer<double>(f.g, f.x, reseeded, {}, t.state()), DataError);
}

TEST(Trainer, NonFiniteParametersNameTheBatch) {
  Fixture f;
  Trainer<double> t(f.g, f.x, small_config());
  auto broken = t.state();
  broken.params.weights[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  Trainer<double> resumed(f.g, f.x, small_config(), {}, broken);
  try {
    resumed.run(1);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1 batch 0"), std::string::npos) << e.what();
  }
}

TEST(Trainer, BatchLogAndCallbacks) {
  Fixture f;
  Trainer<double> t(f.g, f.x, small_config());
  std::vector<BatchLog> logs;
  std::vector<EpochSummary> epochs;
  t.on_batch([&](const BatchLog& b) { logs.push_back(b); });
  t.on_epoch([&](const EpochSummary& e) { epochs.push_back(e); });
  t.run(1);
  const std::size_t m = f.g.cp_edges().size();
  EXPECT_EQ(logs.size(), (m + 15) / 16);
  ASSERT_EQ(epochs.size(), 1u);
  double sum = 0;
  std::size_t edges = 0;
  for (const auto& b : logs) {
    sum += b.total;
    edges += b.edges;
    double terms = 0;
    for (double v : b.term_losses) {
      EXPECT_GE(v, 0.0);
      terms += v;
    }
    EXPECT_NEAR(terms, b.total, 1e-9);
  }
  EXPECT_EQ(edges, m);
  EXPECT_NEAR(epochs[0].mean_loss, sum / static_cast<double>(m), 1e-12);
  const auto line = format_batch_log(logs[0]);
  EXPECT_EQ(std::count(line.begin(), line.end(), '\t'), 9);
}

TEST(Trainer, CoViewCapBoundsBatch) {
  Fixture f;
  auto cfg = small_config();
  cfg.cv_cap = 3;
  Trainer<double> t(f.g, f.x, cfg);
  const auto b = t.make_batch(f.g.cp_edges(), 1, 0);
  EXPECT_EQ(b.cv_edges.size(), 3u);
  for (const auto& e : b.cv_edges) EXPECT_TRUE(f.g.has_edge(e.src, e.dst, RelationKind::CoView));
  EXPECT_EQ(b.negatives.ids.size(), f.g.cp_edges().size() * cfg.n_k);
}

TEST(Trainer, EarlyStopKeepsBestParameters) {
  Fixture f;
  auto cfg = small_config();
  cfg.max_epochs = 20;
  cfg.early_stop_patience = 2;
  Trainer<double> t(f.g, f.x, cfg);
  // Scripted validation: improves twice, then stalls.
  int calls = 0;
  t.set_validator([&](const ModelParams<double>&) {
    ++calls;
    return calls <= 2 ? 0.1 * calls : 0.0;
  });
  ModelParams<double> at_epoch2;
  t.on_epoch([&](const EpochSummary& e) {
    if (e.epoch == 2) at_epoch2 = t.state().params;
  });
  t.run();
  EXPECT_TRUE(t.state().stopped);
  EXPECT_EQ(t.state().epoch, 4u);
  EXPECT_EQ(t.state().best_epoch, 2u);
  EXPECT_EQ(t.best_params(), at_epoch2);
}

TEST(Trainer, EpochLossDecreasesOnSyntheticCorpus) {
  const auto corpus = generate(SynthConfig{});
  const auto g = corpus.graph();
  TrainConfig cfg;
  Trainer<double> t(g, corpus.features, cfg);
  std::vector<double> mean;
  t.on_epoch([&](const EpochSummary& e) { mean.push_back(e.mean_loss); });
  t.run(3);
  ASSERT_EQ(mean.size(), 3u);
  int allowance = 1;
  for (std::size_t i = 1; i < mean.size(); ++i) {
    if (mean[i] <= mean[i - 1]) continue;
    EXPECT_LE(mean[i], 1.02 * mean[i - 1]) << "epoch " << i + 1;
    EXPECT_GE(allowance--, 1) << "more than one epoch increased";
  }
}
