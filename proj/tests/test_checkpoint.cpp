#include <gtest/gtest.h>

#include <limits>

#include "test_util.hpp"

using namespace c2w;

namespace {

TrainedModel trained(ModelKind kind) {
  auto cfg = testutil::tiny_config(1);
  cfg.clip_norm = 3.0;
  return train_model(kind, testutil::fixture_corpus(3, 4, 2), Trait::con, cfg).model;
}

}  // namespace

TEST(Checkpoint, SaveLoadSaveIsBitwiseStableForEveryKind) {
  for (ModelKind kind : {ModelKind::average, ModelKind::bigru_char, ModelKind::bigru_word, ModelKind::c2w2s4pt}) {
    const TrainedModel m = trained(kind);
    const std::string a = serialize_checkpoint(m);
    const TrainedModel back = deserialize_checkpoint(a);
    EXPECT_EQ(serialize_checkpoint(back), a) << model_kind_name(kind);
    EXPECT_EQ(back.kind, kind);
    EXPECT_EQ(back.trait, Trait::con);
    EXPECT_EQ(back.config, m.config);
    EXPECT_EQ(back.params, m.params);
    EXPECT_EQ(back.chars, m.chars);
    EXPECT_EQ(back.words, m.words);
    EXPECT_EQ(back.average, m.average);
  }
}

TEST(Checkpoint, ReloadedModelPredictsIdentically) {
  testutil::TempDir dir;
  const TrainedModel m = trained(ModelKind::c2w2s4pt);
  save_checkpoint(m, dir.file("m.ckpt"));
  const TrainedModel back = load_checkpoint(dir.file("m.ckpt"));
  for (const char* s : {"hello there!!", "ωω unseen", "@x http://y.z/q :)"}) {
    EXPECT_EQ(m.predict_text(s), back.predict_text(s)) << s;
  }
}

TEST(Checkpoint, EveryTruncationIsRejected) {
  const std::string full = serialize_checkpoint(trained(ModelKind::bigru_word));
  for (std::size_t n = 0; n < full.size(); n += 7) {
    EXPECT_THROW(deserialize_checkpoint(full.substr(0, n)), CheckpointError) << n;
  }
  EXPECT_THROW(deserialize_checkpoint(full.substr(0, full.size() - 1)), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(full + "x"), CheckpointError);
}

TEST(Checkpoint, CorruptHeadersAreRejected) {
  const std::string full = serialize_checkpoint(trained(ModelKind::c2w2s4pt));
  auto replaced = [&](const std::string& from, const std::string& to) {
    std::string s = full;
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return s.replace(at, from.size(), to);
  };
  EXPECT_THROW(deserialize_checkpoint(replaced("C2W2S4PT-CHECKPOINT", "C2W2S4PT-CHECKPOINX")), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(replaced("format_version 1", "format_version 2")), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(replaced("model_kind c2w2s4pt", "model_kind bigru_word")), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(replaced("char_hidden=5", "char_hidden=6")), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(replaced("epochs = 1", "epochs = zero")), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/model.ckpt"), CheckpointError);
}

TEST(Checkpoint, NonFiniteWeightsAreRejected) {
  TrainedModel m = trained(ModelKind::bigru_char);
  m.params.head.b_y = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(deserialize_checkpoint(serialize_checkpoint(m)), CheckpointError);
}
