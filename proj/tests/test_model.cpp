#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace c2w;

namespace {

void fill_gru(GruParams& g, double w, double u, double b) {
  for (Mat* m : {&g.w_z, &g.w_r, &g.w_h}) m->fill(w);
  for (Mat* m : {&g.u_z, &g.u_r, &g.u_h}) m->fill(u);
  for (Vec* v : {&g.b_z, &g.b_r, &g.b_h}) v->fill(b);
}

// Tiny hand-set model matching tests/oracles/scalar_oracle.py.
struct OracleModel {
  CharVocab vocab;
  ModelParams params;

  OracleModel() {
    vocab.add(U'a');
    vocab.add(U'b');
    ModelDims d{1, 1, 1, 1, 2, 3};
    params = ModelParams::zeros(ModelKind::c2w2s4pt, d);
    params.embedding = Mat{{0.3, 0.5, -0.4}};
    fill_gru(params.char_rnn.fwd, 0.8, 0.6, 0.1);
    fill_gru(params.char_rnn.bwd, -0.7, 0.9, -0.2);
    for (Mat* m : {&params.word_rnn.fwd.w_z, &params.word_rnn.fwd.w_r, &params.word_rnn.fwd.w_h}) {
      *m = Mat{{0.5, -0.3}};
    }
    for (Mat* m : {&params.word_rnn.bwd.w_z, &params.word_rnn.bwd.w_r, &params.word_rnn.bwd.w_h}) {
      *m = Mat{{-0.6, 0.2}};
    }
    for (Mat* m : {&params.word_rnn.fwd.u_z, &params.word_rnn.fwd.u_r, &params.word_rnn.fwd.u_h}) {
      m->fill(0.4);
    }
    for (Mat* m : {&params.word_rnn.bwd.u_z, &params.word_rnn.bwd.u_r, &params.word_rnn.bwd.u_h}) {
      m->fill(-0.5);
    }
    for (Vec* v : {&params.word_rnn.fwd.b_z, &params.word_rnn.fwd.b_r, &params.word_rnn.fwd.b_h}) {
      v->fill(0.05);
    }
  }
};

}  // namespace

TEST(Model, EmbedCharsIsColumnLookupWithUnknownFallback) {
  OracleModel m;
  const auto xs = embed_chars(m.vocab, m.params.embedding, U"abz");
  ASSERT_EQ(xs.size(), 3u);
  EXPECT_EQ(xs[0], Vec{0.5});
  EXPECT_EQ(xs[1], Vec{-0.4});
  EXPECT_EQ(xs[2], Vec{0.3});
  EXPECT_THROW(embed_chars(m.vocab, m.params.embedding, U""), std::invalid_argument);
}

TEST(Model, ComposeWordMatchesOracle) {
  OracleModel m;
  const Vec ab = compose_word(m.params, m.vocab, U"ab");
  EXPECT_NEAR(ab[0], -0.0071762003553370069122, 1e-12);
  EXPECT_NEAR(ab[1], -0.29295720702133570118, 1e-12);
  const Vec b = compose_word(m.params, m.vocab, U"b");
  EXPECT_NEAR(b[0], -0.12011972454199942565, 1e-12);
  EXPECT_NEAR(b[1], 0.038319140146261720348, 1e-12);
}

TEST(Model, EncodeSentenceMatchesOracle) {
  OracleModel m;
  const std::vector<std::u32string> tokens{U"ab", U"b"};
  auto [e_s, trace] = encode_sentence(m.params, m.vocab, tokens);
  ASSERT_EQ(e_s.size(), 2u);
  EXPECT_NEAR(e_s[0], 0.026656565673464043671, 1e-12);
  EXPECT_NEAR(e_s[1], -0.014463905086207001741, 1e-12);
  EXPECT_EQ(trace.word_vectors.size(), 2u);
  for (const auto& w : trace.word_vectors) EXPECT_EQ(w.size(), 2u);
  EXPECT_THROW(encode_sentence(m.params, m.vocab, std::vector<std::u32string>{}),
               std::invalid_argument);
}

TEST(Model, HeadByHand) {
  ModelParams p = ModelParams::zeros(ModelKind::bigru_word, ModelDims{1, 1, 1, 1, 2, 2});
  p.head.w_eh = Mat{{1.0, 1.0}, {0.5, -1.0}};
  p.head.b_h = Vec{0.1, 0.2};
  p.head.w_hy = Mat{{3.0, -1.0}};
  p.head.b_y = 0.5;
  // pre = (-0.9, 2.7) -> relu (0, 2.7) -> 3*0 - 2.7 + 0.5
  EXPECT_NEAR(predict(p, Vec{1.0, -2.0}), -2.2, 1e-12);
  const Vec mask{2.0, 0.0};
  // masked input (2, 0): pre = (2.1, 1.2) -> 6.3 - 1.2 + 0.5
  EXPECT_NEAR(predict(p, Vec{1.0, -2.0}, &mask), 5.6, 1e-12);
  EXPECT_THROW(predict(p, Vec{1.0}), ShapeError);
}

TEST(Model, ZeroModelPredictsOutputBias) {
  for (ModelKind kind : {ModelKind::c2w2s4pt, ModelKind::bigru_char, ModelKind::bigru_word}) {
    ModelParams p = ModelParams::zeros(kind, ModelDims{3, 4, 5, 6, 7, 9});
    p.head.b_y = 0.125;
    EncodedInput in;
    in.words = {{1, 2, 3}, {4}};
    in.sequence = {1, 5, 8};
    EXPECT_EQ(forward(p, in).prediction, 0.125) << model_kind_name(kind);
  }
}

TEST(Model, ShapeChainAndDefaults) {
  const ModelDims d;
  EXPECT_EQ(d.char_dim, 50u);
  EXPECT_EQ(d.char_hidden, 256u);
  EXPECT_EQ(d.word_hidden, 256u);
  EXPECT_EQ(d.mlp_hidden, 256u);
  ModelDims small{3, 4, 5, 6, 7, 11};
  const auto p = ModelParams::zeros(ModelKind::c2w2s4pt, small);
  EXPECT_EQ(p.word_rnn.input_size(), 10u);
  EXPECT_EQ(p.head.w_eh.cols(), 12u);
  EXPECT_EQ(p.head.w_eh.rows(), 7u);
  EXPECT_EQ(p.dims().char_hidden, 5u);
  auto broken = p;
  broken.word_rnn = BiRnnParams(9, 6);
  EXPECT_THROW(broken.validate(), ShapeError);
  EXPECT_THROW(ModelParams::zeros(ModelKind::average, small), std::invalid_argument);
}

TEST(Model, BaselineEncodings) {
  std::vector<Tweet> corpus{*make_tweet(RawRecord{"u", "ab cd", {}}), *make_tweet(RawRecord{"u", "cd ef", {}})};
  const auto text_vocab = build_text_char_vocab(corpus);
  EXPECT_TRUE(text_vocab.contains(U' '));
  EXPECT_FALSE(build_char_vocab(corpus).contains(U' '));
  const auto words = build_word_vocab(corpus);
  EXPECT_EQ(words.size(), 4u);  // ab, cd, ef, unknown
  const auto enc = encode_words(words, corpus[1].tokens);
  EXPECT_EQ(enc.sequence, (std::vector<std::size_t>{2, 3}));
  const std::vector<std::u32string> unseen{U"zz"};
  EXPECT_EQ(encode_words(words, unseen).sequence, std::vector<std::size_t>{WordVocab::unk_id});
  EXPECT_EQ(encode_chars(text_vocab, corpus[0].text).sequence.size(), 5u);
}

TEST(Model, MseLoss) {
  const std::vector<double> p{0.1, 0.2, 0.3}, t{0.1, 0.0, 0.6};
  EXPECT_NEAR(mse_loss(p, t), (0.04 + 0.09) / 3.0, 1e-15);
  EXPECT_THROW(mse_loss(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(mse_loss(p, std::vector<double>{1.0}), ShapeError);
}

TEST(Model, DropoutMaskOnSentenceScalesHeadInput) {
  SplitMix64 rng(1);
  ModelParams p = init_params(ModelKind::bigru_word, ModelDims{2, 3, 2, 2, 4, 5}, InitScheme::glorot_uniform, 3);
  EncodedInput in;
  in.sequence = {1, 2};
  DropoutMasks masks;
  masks.sentence = Vec{2.0, 0.0, 2.0, 0.0};
  const auto tr = forward(p, in, &masks);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(tr.head_input[i], tr.sentence[i] * masks.sentence[i]);
}
