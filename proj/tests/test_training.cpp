#include <cmath>

#include <gtest/gtest.h>

#include "tinycount/training.hpp"

using namespace tinycount;

namespace {

ModelConfig make(std::string_view arch, int T, int L, int d, int p, int layers = 1) {
  ModelConfig c = with_architecture(ModelConfig{}, arch);
  c.T = T;
  c.L = L;
  c.C = L;
  c.d = d;
  c.p = p;
  c.layers = layers;
  return c;
}

}  // namespace

TEST(Gradients, MatchFiniteDifferences) {
  for (auto arch : kArchitectures)
    for (int layers : {1, 2})
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ModelConfig c = make(arch, 5, 4, 3, 4, layers);
        ModelParams p = init_params(c, seed);
        // nonzero biases so their gradients are exercised away from zero
        for_each_array(p, [&](const auto& v) {
          if (v.name.find(".b") == std::string::npos) return;
          for (std::size_t i = 0; i < v.values.size(); ++i) v.values[i] = 0.1 * static_cast<double>((i * 7 + seed) % 5) - 0.2;
        });
        const auto batch = make_dataset({5, 4, Scheme::partition, seed + 100}, 3);
        EXPECT_LT(gradient_check(c, p, batch), 1e-4) << arch << " layers=" << layers << " seed=" << seed;
      }
}

TEST(Loss, EqualLogitsGiveLogC) {
  const ModelConfig c = make("dot", 32, 10, 8, 4);
  const auto batch = make_dataset({32, 10, Scheme::partition, 1}, 20);
  EXPECT_NEAR(mean_loss(c, zero_params(c), batch), std::log(10.0), 1e-14);
  EXPECT_NEAR(loss_and_gradients(c, zero_params(c), batch).loss, std::log(10.0), 1e-14);
}

TEST(Init, LossNearLogCForModerateWidth) {
  const auto batch = make_dataset({32, 10, Scheme::partition, 5}, 500);
  for (auto arch : kArchitectures)
    for (int d : {8, 16, 32})
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const ModelConfig c = make(arch, 32, 10, d, d);
        const double ratio = mean_loss(c, init_params(c, seed), batch) / std::log(10.0);
        EXPECT_GE(ratio, 0.9) << arch << " d=" << d;
        EXPECT_LE(ratio, 1.1) << arch << " d=" << d;
      }
}

TEST(Init, EmbeddingNormsBiasesAndDeterminism) {
  const ModelConfig c = make("bos+sftm", 32, 10, 256, 8);
  const ModelParams p = init_params(c, 3);
  double mean_norm = 0;
  for (std::size_t t = 0; t < 32; ++t) mean_norm += norm(p.embeddings.row(t)) / 32;
  EXPECT_NEAR(mean_norm, 1.0, 0.05);
  for (double b : p.layers[0].b1) EXPECT_EQ(b, 0.0);
  for (double b : p.layers[0].b2) EXPECT_EQ(b, 0.0);
  EXPECT_EQ(init_params(c, 3), p);
  EXPECT_NE(init_params(c, 4), p);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  const ModelConfig c = make("lin", 4, 3, 2, 2);
  ModelParams p = init_params(c, 1);
  const ModelParams before = p;
  AdamState s = AdamState::zeros(c);
  for (int i = 0; i < 5; ++i) adam_step(p, zero_params(c), s, {});
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 5);
}

TEST(Adam, FirstStepIsLearningRateTimesSign) {
  const ModelConfig c = make("dot", 4, 3, 2, 2);
  ModelParams p = zero_params(c), g = zero_params(c);
  int k = 0;
  for (auto span : array_spans(g))
    for (double& x : span) x = (k++ % 3 - 1) * 0.37;
  AdamState s = AdamState::zeros(c);
  adam_step(p, g, s, {.learning_rate = 1e-3});
  const auto ps = array_spans(std::as_const(p));
  const auto gs = array_spans(std::as_const(g));
  for (std::size_t a = 0; a < ps.size(); ++a)
    for (std::size_t i = 0; i < ps[a].size(); ++i) {
      const double want = gs[a][i] > 0 ? -1e-3 : gs[a][i] < 0 ? 1e-3 : 0.0;
      EXPECT_NEAR(ps[a][i], want, 1e-10);
    }
}

TEST(Train, DeterministicForFixedSeed) {
  TrainSpec spec{.config = make("dot", 6, 4, 4, 4), .epochs = 3, .samples_per_epoch = 200, .eval_samples = 100, .seed = 9};
  const TrainHistory a = train(spec), b = train(spec);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.final_params, b.final_params);
  spec.seed = 10;
  EXPECT_NE(train(spec).loss, a.loss);
}

TEST(Train, LinearFullWidthLossDecreases) {
  const TrainSpec spec{.config = make("lin", 8, 5, 8, 8), .epochs = 10, .samples_per_epoch = 1000, .eval_samples = 500, .seed = 1};
  const TrainHistory h = train(spec);
  ASSERT_EQ(h.loss.size(), 10u);
  EXPECT_LT(h.loss.back(), h.loss.front());
  EXPECT_LT((h.loss[7] + h.loss[8] + h.loss[9]) / 3, (h.loss[0] + h.loss[1] + h.loss[2]) / 3);
  EXPECT_GE(h.best_accuracy, h.final_accuracy);
  EXPECT_EQ(h.accuracy[static_cast<std::size_t>(h.best_epoch)], h.best_accuracy);
}

TEST(Train, FrozenEmbeddingsStayFixed) {
  const TrainSpec spec{.config = make("bos", 6, 4, 4, 4), .epochs = 2, .samples_per_epoch = 200, .eval_samples = 50,
                       .seed = 2, .freeze_embeddings = true};
  const ModelParams init = init_params(spec.config, spec.seed);
  const TrainHistory h = train(spec);
  EXPECT_EQ(h.final_params.embeddings, init.embeddings);
  EXPECT_EQ(h.final_params.bos_embedding, init.bos_embedding);
  EXPECT_NE(h.final_params.layers[0].w1, init.layers[0].w1);
}

TEST(Train, StopsEarlyAtTargetAccuracy) {
  TrainSpec spec{.config = make("lin", 4, 3, 4, 4), .epochs = 50, .samples_per_epoch = 100, .eval_samples = 50,
                 .seed = 0, .stop_accuracy = 0.0};
  EXPECT_EQ(train(spec).loss.size(), 1u);
}

TEST(Train, NonFiniteLossIsReported) {
  const ModelConfig c = make("lin", 4, 3, 2, 2);
  ModelParams p = init_params(c, 0);
  p.layers[0].w2.fill(1e308);
  p.layers[0].b1.assign(2, 1e10);
  const TrainSpec spec{.config = c, .epochs = 1, .samples_per_epoch = 10, .eval_samples = 10};
  EXPECT_THROW(train(spec, {}, p), NumericalFailure);
}

TEST(Train, RejectsBadSpecs) {
  TrainSpec spec{.config = make("lin", 4, 3, 2, 2)};
  spec.epochs = 0;
  EXPECT_THROW(train(spec), ConfigError);
  spec.epochs = 1;
  spec.adam.learning_rate = 0;
  EXPECT_THROW(train(spec), ConfigError);
  EXPECT_THROW(loss_and_gradients(spec.config, zero_params(spec.config), std::vector<Sample>{}), InvalidInput);
}
