#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"

using namespace c2w;

TEST(Config, DefaultsMatchShippedDefaultFile) {
  const TrainConfig shipped = load_train_config(std::string(C2W_SOURCE_DIR) + "/configs/default.conf");
  EXPECT_EQ(shipped, TrainConfig{});
  EXPECT_EQ(shipped.char_dim, 50u);
  EXPECT_EQ(shipped.char_hidden, 256u);
  EXPECT_EQ(shipped.word_hidden, 256u);
  EXPECT_EQ(shipped.dropout_rate, 0.5);
  EXPECT_EQ(shipped.batch_size, 32);
  EXPECT_EQ(shipped.epochs, 100);
  EXPECT_EQ(shipped.learning_rate, 1e-3);
  EXPECT_FALSE(shipped.clip_norm.has_value());
}

TEST(Config, CanonicalFormRoundTrips) {
  TrainConfig c = testutil::tiny_config(7);
  c.clip_norm = 2.5;
  c.seed = 1234567890123ULL;
  c.init_scheme = InitScheme::zeros;
  c.word_dropout = false;
  EXPECT_EQ(parse_train_config(format_train_config(c)), c);
  EXPECT_EQ(config_fingerprint(c), config_fingerprint(parse_train_config(format_train_config(c))));
  TrainConfig d = c;
  d.epochs = 8;
  EXPECT_NE(config_fingerprint(c), config_fingerprint(d));
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(parse_train_config("dropout_rate = 1.0"), ConfigError);
  EXPECT_THROW(parse_train_config("batch_size = 0"), ConfigError);
  EXPECT_THROW(parse_train_config("learning_rate = fast"), ConfigError);
  EXPECT_THROW(parse_train_config("colour = blue"), ConfigError);
  EXPECT_THROW(parse_train_config("epochs = 3\nepochs = 4"), ConfigError);
  EXPECT_THROW(parse_train_config("epochs"), ConfigError);
  const auto c = parse_train_config("# comment\n\nepochs = 3   # trailing\n");
  EXPECT_EQ(c.epochs, 3);
}

TEST(Init, DeterministicGlorotBoundsAndZeroBiases) {
  const ModelDims d{4, 4, 5, 6, 7, 10};
  const auto a = init_params(ModelKind::c2w2s4pt, d, InitScheme::glorot_uniform, 5);
  EXPECT_EQ(a, init_params(ModelKind::c2w2s4pt, d, InitScheme::glorot_uniform, 5));
  EXPECT_NE(a, init_params(ModelKind::c2w2s4pt, d, InitScheme::glorot_uniform, 6));
  a.for_each_tensor([](std::string_view name, std::span<const double> v, std::size_t r, std::size_t c) {
    const std::string n(name);
    const bool bias = n.ends_with(".b_z") || n.ends_with(".b_r") || n.ends_with(".b_h") ||
                      n == "head.b_h" || n == "head.b_y";
    const double bound = n == "embedding" ? 0.1 : std::sqrt(6.0 / static_cast<double>(r + c));
    for (double x : v) {
      if (bias) {
        EXPECT_EQ(x, 0.0) << n;
      } else {
        EXPECT_LE(std::abs(x), bound) << n;
      }
    }
  });
  const auto z = init_params(ModelKind::bigru_char, d, InitScheme::zeros, 5);
  EXPECT_EQ(z, ModelParams::zeros(ModelKind::bigru_char, d));
}

TEST(Dropout, InvertedScalingKeepsExpectation) {
  SplitMix64 rng(1);
  const Vec ones(100000, 1.0);
  auto [out, mask] = dropout_apply(ones, 0.5, rng);
  double sum = 0.0;
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    sum += out[i];
    EXPECT_TRUE(mask[i] == 0.0 || mask[i] == 2.0);
    zeros += mask[i] == 0.0;
  }
  EXPECT_NEAR(sum / 100000.0, 1.0, 0.02);
  EXPECT_NEAR(static_cast<double>(zeros) / 100000.0, 0.5, 0.01);
  const auto kept = dropout_apply(Vec{1.5, -2.0}, 0.0, rng);
  EXPECT_EQ(kept.first, (Vec{1.5, -2.0}));
  EXPECT_EQ(kept.second, (Vec{1.0, 1.0}));
  EXPECT_THROW(dropout_apply(ones, 1.0, rng), std::invalid_argument);
}

TEST(Dropout, WordMasksOnlyForHierarchicalModel) {
  TrainConfig cfg;
  SplitMix64 rng(2);
  EncodedInput in;
  in.words = {{1}, {2, 3}};
  in.sequence = {1, 2};
  const auto c2w = init_params(ModelKind::c2w2s4pt, ModelDims{2, 2, 3, 3, 4, 5}, InitScheme::zeros, 0);
  auto m = draw_masks(c2w, in, cfg, rng);
  EXPECT_EQ(m.words.size(), 2u);
  EXPECT_EQ(m.words[0].size(), 6u);
  EXPECT_EQ(m.sentence.size(), 6u);
  cfg.word_dropout = false;
  EXPECT_TRUE(draw_masks(c2w, in, cfg, rng).words.empty());
  cfg.dropout_rate = 0.0;
  const auto none = draw_masks(c2w, in, cfg, rng);
  EXPECT_TRUE(none.words.empty());
  EXPECT_TRUE(none.sentence.empty());
}

TEST(Adam, FirstStepMovesByLearningRateAgainstGradientSign) {
  const ModelDims d{1, 1, 1, 1, 1, 2};
  ModelParams p = ModelParams::zeros(ModelKind::bigru_word, d);
  ModelParams g = p.zeros_like();
  g.head.b_y = 0.3;
  g.head.w_hy(0, 0) = -2.0;
  AdamState st(p);
  TrainConfig cfg;
  adam_step(p, g, st, cfg);
  // m_hat = g and v_hat = g^2 after one bias-corrected step.
  EXPECT_NEAR(p.head.b_y, -1e-3 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p.head.w_hy(0, 0), 1e-3 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_EQ(p.head.b_h[0], 0.0);
  EXPECT_EQ(st.t, 1u);
}

TEST(Adam, ClipNormScalesTheGradient) {
  const ModelDims d{1, 1, 1, 1, 1, 2};
  ModelParams p = ModelParams::zeros(ModelKind::bigru_word, d);
  ModelParams g = p.zeros_like();
  g.head.b_y = 3.0;
  g.head.b_h[0] = 4.0;
  TrainConfig cfg;
  cfg.clip_norm = 1.0;
  AdamState st(p);
  adam_step(p, g, st, cfg);
  // Scaled gradient (0.6, 0.8): the first Adam step is still +-lr per component.
  EXPECT_NEAR(st.m.back()[0], 0.1 * 0.6, 1e-15);
}

TEST(GradCheck, AllKindsPassOnRandomInstances) {
  for (ModelKind kind : {ModelKind::c2w2s4pt, ModelKind::bigru_char, ModelKind::bigru_word}) {
    const auto r = grad_check(kind, 10, 1e-5, 17);
    EXPECT_LT(r.max_rel_error, 1e-4) << model_kind_name(kind) << " " << r.worst_tensor;
    EXPECT_GT(r.components, 100u);
  }
}

TEST(GradCheck, ZeroModelWithExactTargetHasZeroGradient) {
  const auto p = ModelParams::zeros(ModelKind::c2w2s4pt, ModelDims{2, 2, 2, 2, 2, 4});
  EncodedInput in;
  in.words = {{1, 2}, {3}};
  const auto r = grad_check_instance(p, in, 0.0, DropoutMasks{}, 1e-5);
  EXPECT_EQ(r.max_rel_error, 0.0);
}

TEST(GradCheck, DetectsACorruptedGradient) {
  auto inst = random_grad_check_instance(ModelKind::c2w2s4pt, 3, 0);
  const auto r = grad_check_instance(inst.params, inst.input, inst.target, inst.masks, 1e-5,
                                     [](ModelParams& g) { g.word_rnn.fwd.u_h(0, 0) += 1e-2; });
  EXPECT_GT(r.max_rel_error, 1e-3);
  EXPECT_EQ(r.worst_tensor, "word_rnn.fwd.u_h");
}

TEST(Train, DeterministicAndThreadIndependent) {
  const auto corpus = testutil::fixture_corpus(4, 6, 5);
  auto cfg = testutil::tiny_config(3);
  cfg.dropout_rate = 0.5;
  cfg.seed = 77;
  TrainOptions one, three;
  one.threads = 1;
  three.threads = 3;
  for (ModelKind kind : {ModelKind::c2w2s4pt, ModelKind::bigru_char, ModelKind::bigru_word}) {
    const auto a = train_model(kind, corpus, Trait::ext, cfg, one);
    const auto b = train_model(kind, corpus, Trait::ext, cfg, one);
    const auto c = train_model(kind, corpus, Trait::ext, cfg, three);
    EXPECT_EQ(a.model.params, b.model.params) << model_kind_name(kind);
    EXPECT_EQ(a.model.params, c.model.params) << model_kind_name(kind);
    ASSERT_EQ(a.reports.size(), 3u);
    EXPECT_EQ(a.reports.back().loss, c.reports.back().loss);
  }
}

TEST(Train, LossDecreasesOnLearnableFixture) {
  const auto corpus = testutil::fixture_corpus(6, 10, 42);
  auto cfg = testutil::tiny_config(15);
  cfg.dropout_rate = 0.0;
  const auto r = train_model(ModelKind::c2w2s4pt, corpus, Trait::ext, cfg);
  EXPECT_LT(r.reports.back().loss, 0.5 * r.reports.front().loss);
}

TEST(Train, MemorizesASingleTweet) {
  const std::vector<Tweet> one{*make_tweet(RawRecord{"u", "hello world !!", {0.3, -0.3, 0, 0, 0}})};
  TrainConfig cfg = testutil::tiny_config(300);
  cfg.dropout_rate = 0.0;
  cfg.batch_size = 1;
  const auto r = train_model(ModelKind::c2w2s4pt, one, Trait::ext, cfg);
  EXPECT_LT(r.reports.back().loss, 1e-4);
  EXPECT_NEAR(r.model.predict(one[0]), 0.3, 1e-2);
}

TEST(Train, AverageKindIsTrainingMean) {
  const auto corpus = testutil::fixture_corpus(5, 4, 3);
  double s = 0.0;
  for (const auto& t : corpus) s += t.traits.get(Trait::agr);
  const auto r = train_model(ModelKind::average, corpus, Trait::agr, TrainConfig{});
  EXPECT_EQ(r.model.average, s / static_cast<double>(corpus.size()));
  EXPECT_EQ(r.model.predict(corpus[0]), r.model.average);
}

TEST(Train, FoldTrainingSeesOnlyTrainingFolds) {
  auto corpus = testutil::fixture_corpus(4, 5, 9);
  // Give one held-out tweet a character nobody else uses.
  const auto plan = kfold_split(corpus, 5, FoldLevel::tweet, 1);
  const std::size_t held = plan.test_indices(0).front();
  corpus[held] = *make_tweet(RawRecord{corpus[held].user_id, "ωωω", corpus[held].traits}, held);
  const auto r = train(ModelKind::c2w2s4pt, corpus, Trait::ext, plan, 0, testutil::tiny_config(1));
  EXPECT_FALSE(r.model.chars.contains(U'ω'));
  const auto r2 = train(ModelKind::c2w2s4pt, corpus, Trait::ext, plan, 1, testutil::tiny_config(1));
  EXPECT_TRUE(r2.model.chars.contains(U'ω'));
}

TEST(Train, ValidationRmseAndEpochCallback) {
  const auto corpus = testutil::fixture_corpus(4, 5, 9);
  TrainOptions opts;
  opts.validation = corpus;
  int calls = 0;
  opts.on_epoch = [&](const EpochReport& r) {
    ++calls;
    EXPECT_EQ(r.epoch, calls);
    EXPECT_TRUE(r.val_rmse.has_value());
  };
  train_model(ModelKind::bigru_word, corpus, Trait::ext, testutil::tiny_config(2), opts);
  EXPECT_EQ(calls, 2);
}

TEST(TrainedModel, PredictTextHandlesEmptyAndUnseenInput) {
  const auto corpus = testutil::fixture_corpus(3, 4, 1);
  auto r = train_model(ModelKind::c2w2s4pt, corpus, Trait::ext, testutil::tiny_config(1));
  EXPECT_FALSE(r.model.predict_text("   ").has_value());
  const auto a = r.model.predict_text("unseen ωords http://x.co/a");
  ASSERT_TRUE(a.has_value());
  EXPECT_EQ(a, r.model.predict_text("unseen ωords http://x.co/a"));
  r.model.config.clamp_predictions = true;
  r.model.params.head.w_hy.fill(0.0);
  r.model.params.head.b_y = 7.0;
  EXPECT_EQ(r.model.predict_text("hello"), 0.5);
}
