#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"
#include "optforecast/error.hpp"
#include "optforecast/lstm.hpp"

using namespace optforecast;
using namespace optforecast::lstm;

namespace {
constexpr int kIn = market_data::kFeatureCount;
}

TEST(LstmForward, ZeroParametersGiveOneHalf) {
  LstmParams<double> p(kIn, 4);
  Rng rng(1);
  const auto s = fixture::random_window(rng);
  EXPECT_EQ(forward(p, window_matrix<double>(s)).prob, 0.5);
}

TEST(LstmForward, WindowShapeChecked) {
  const auto p = initialize(kIn, 4, 0);
  EXPECT_THROW(forward(p, Mat<double>(Mat<double>::Zero(kIn, 9))), DomainError);
  EXPECT_THROW(forward(p, Mat<double>(Mat<double>::Zero(12, 10))), DomainError);
}

TEST(LstmLoss, KnownValues) {
  EXPECT_NEAR(loss(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(loss(0.9, 0), -std::log(0.1), 1e-14);
  EXPECT_NEAR(loss(0.0, 1), -std::log(1e-12), 1e-9);
  EXPECT_TRUE(std::isfinite(loss(1.0, 0)));
}

TEST(LstmInit, ShapesRangesAndForgetBias) {
  const int H = 8;
  const auto p = initialize(kIn, H, 42);
  EXPECT_EQ(p.size(), LstmParams<double>::count(kIn, H));
  const double bound0 = 1.0 / std::sqrt(double(kIn + H));
  EXPECT_LE(p.wx(0).cwiseAbs().maxCoeff(), bound0);
  EXPECT_LE(p.wh(1).cwiseAbs().maxCoeff(), 1.0 / std::sqrt(2.0 * H));
  for (int layer = 0; layer < kLayers; ++layer) {
    EXPECT_EQ(p.bias(layer).segment(H, H), Vec<double>::Ones(H));
    EXPECT_EQ(p.bias(layer).segment(0, H), Vec<double>::Zero(H));
  }
  EXPECT_EQ(initialize(kIn, H, 42).values(), p.values());
  EXPECT_NE(initialize(kIn, H, 43).values(), p.values());
}

TEST(LstmBackward, MatchesCenteredDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto audit = fixture::audit_gradient(seed);
    EXPECT_LE(audit.max_relative_error, 1e-4) << "seed " << seed << " index " << audit.worst_index;
  }
}

TEST(LstmBackward, DuplicatedSampleDoublesGradient) {
  const auto p = initialize(kIn, 6, 3);
  const auto data = fixture::separable_dataset(4, 9);
  const std::vector<std::size_t> once{2}, twice{2, 2};
  const auto g1 = batch_gradient(p, data, once);
  const auto g2 = batch_gradient(p, data, twice);
  EXPECT_LT((g2.values() - 2.0 * g1.values()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(LstmBackward, StaleCacheRejected) {
  auto p = initialize(kIn, 4, 3);
  Rng rng(2);
  const auto s = fixture::random_window(rng);
  const auto cache = forward(p, window_matrix<double>(s));
  p.values()[0] += 0.1;
  EXPECT_THROW(backward(p, cache, 1), DomainError);
}

TEST(LstmForward, StableUnderRepeatedPasses) {
  const auto p = initialize(kIn, 4, 5);
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    auto s = fixture::random_window(rng);
    for (auto& f : s.window) f *= 50.0;
    const auto c = forward(p, window_matrix<double>(s));
    ASSERT_TRUE(std::isfinite(c.prob));
    ASSERT_GE(c.prob, 0.0);
    ASSERT_LE(c.prob, 1.0);
  }
}

TEST(LstmMetrics, Identities) {
  const auto m = Metrics::from_counts(30, 10, 40, 20);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_TRUE(m.precision_defined);
  const auto none = Metrics::from_counts(0, 0, 5, 5);
  EXPECT_FALSE(none.precision_defined);
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_THROW(Metrics::from_counts(-1, 0, 0, 0), DomainError);
}

TEST(LstmTrain, LearnsSeparableData) {
  const auto data = fixture::separable_dataset(2000, 77);
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 30;
  cfg.seed = 1;
  const auto res = train(data, cfg);
  const auto val = std::span(data).subspan(res.train_count);
  EXPECT_GE(evaluate(res.params, val).accuracy, 0.90);
  EXPECT_EQ(res.history.size(), 30u);
}

TEST(LstmTrain, PermutedLabelsStayNearChance) {
  const auto data = fixture::permuted_labels(fixture::separable_dataset(2000, 77), 5);
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 30;
  cfg.seed = 1;
  const auto res = train(data, cfg);
  const double acc = evaluate(res.params, std::span(data).subspan(res.train_count)).accuracy;
  EXPECT_GE(acc, 0.4);
  EXPECT_LE(acc, 0.6);
}

TEST(LstmTrain, DeterministicForSeed) {
  const auto data = fixture::separable_dataset(200, 3);
  TrainConfig cfg;
  cfg.hidden = 4;
  cfg.epochs = 3;
  cfg.seed = 9;
  EXPECT_EQ(train(data, cfg).params.values(), train(data, cfg).params.values());
  cfg.optimizer = Optimizer::adam;
  cfg.learning_rate = 0.01;
  EXPECT_EQ(train(data, cfg).params.values(), train(data, cfg).params.values());
}

TEST(LstmTrain, InvalidConfigRejected) {
  const auto data = fixture::separable_dataset(20, 3);
  TrainConfig cfg;
  cfg.train_fraction = 0.9;  // fractions no longer sum to 1
  EXPECT_THROW(train(data, cfg), ValidationError);
  EXPECT_THROW(train({}, TrainConfig{}), ValidationError);
}

TEST(LstmCheckpoint, RoundTripIsExact) {
  const auto p = initialize(kIn, 5, 12);
  TrainConfig cfg;
  cfg.hidden = 5;
  cfg.seed = 12;
  TrainConfig loaded_cfg;
  int epoch = 0;
  const auto q = load_checkpoint(checkpoint_json(p, cfg, 7), &loaded_cfg, &epoch);
  EXPECT_EQ(q.values(), p.values());
  EXPECT_EQ(epoch, 7);
  EXPECT_EQ(loaded_cfg.hidden, 5);
  EXPECT_EQ(loaded_cfg.seed, 12u);
  EXPECT_THROW(load_checkpoint("{\"weights\": 3}"), ValidationError);
}
