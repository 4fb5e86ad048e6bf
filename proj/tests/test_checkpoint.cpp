#include <gtest/gtest.h>

#include <sstream>

#include "asymgraph/checkpoint.hpp"
#include "test_util.hpp"

using namespace asymgraph;

TEST(ModelCheckpoint, RoundTripIsBitExact) {
  const auto p = ModelParams<double>::init(7, 5, 3, 21);
  std::stringstream buf;
  save_model(buf, p);
  const auto q = load_model(buf);
  EXPECT_EQ(p, q);
  std::stringstream again;
  save_model(again, q);
  std::stringstream first;
  save_model(first, p);
  EXPECT_EQ(first.str(), again.str());
}

TEST(ModelCheckpoint, FloatParamsRoundTripThroughDoubleStorage) {
  const auto p = ModelParams<double>::init(4, 3, 2, 1).cast<float>();
  std::stringstream buf;
  save_model(buf, p);
  EXPECT_EQ(load_model<float>(buf), p);
}

TEST(ModelCheckpoint, BadMagicIsDataError) {
  std::stringstream buf;
  save_model(buf, ModelParams<double>::init(2, 2, 1, 0));
  auto bytes = buf.str();
  bytes[0] = 'X';
  std::stringstream bad(bytes);
  EXPECT_THROW(load_model(bad), DataError);
}

TEST(ModelCheckpoint, VersionMismatchIsDataError) {
  std::stringstream buf;
  save_model(buf, ModelParams<double>::init(2, 2, 1, 0));
  auto bytes = buf.str();
  bytes[8] = static_cast<char>(kCheckpointVersion + 1);
  std::stringstream bad(bytes);
  try {
    load_model(bad);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
}

TEST(ModelCheckpoint, TruncatedFileIsDataError) {
  std::stringstream buf;
  save_model(buf, ModelParams<double>::init(3, 3, 2, 0));
  auto bytes = buf.str();
  bytes.resize(bytes.size() - 5);
  std::stringstream bad(bytes);
  EXPECT_THROW(load_model(bad), DataError);
}

TEST(EmbeddingDump, RoundTripIsExact) {
  KeyMap keys;
  for (int i = 0; i < 6; ++i) keys.insert("item" + std::to_string(i));
  const auto x = testutil::random_features(6, 4, 3);
  const auto y = testutil::random_features(6, 4, 4);
  std::vector<NodeId> ids{0, 1, 2, 3, 4, 5};
  const DualEmbeddings<double> emb(ids, x.values(), y.values());
  std::stringstream buf;
  write_embeddings(buf, keys, emb);
  const auto back = read_embeddings(buf);
  ASSERT_EQ(back.keys.size(), 6u);
  for (NodeId i = 0; i < 6; ++i) EXPECT_EQ(back.keys.key(i), keys.key(i));
  EXPECT_EQ(back.embeddings.theta_s, emb.theta_s);
  EXPECT_EQ(back.embeddings.theta_t, emb.theta_t);
}

TEST(EmbeddingDump, MalformedRowsReportLines) {
  std::stringstream bad("2\t2\na\tS:1,2\tT:3,4\nb\tS:1\tT:3,4\n");
  try {
    read_embeddings(bad);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  std::stringstream short_file("3\t2\na\tS:1,2\tT:3,4\n");
  EXPECT_THROW(read_embeddings(short_file), DataError);
}
