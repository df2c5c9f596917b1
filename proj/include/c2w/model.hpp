#pragma once

// The character -> word -> sentence regressor and the two single-level
// recurrent baselines that share its MLP head.
//
//   C2W2S4PT    chars of each word -> char bi-GRU -> word vectors
//               -> word bi-GRU -> sentence vector -> MLP -> score
//   BI_GRU_CHAR all chars of the normalized text (spaces included)
//               -> char bi-GRU -> sentence vector -> MLP -> score
//   BI_GRU_WORD word ids -> word embedding table -> word bi-GRU
//               -> sentence vector -> MLP -> score
//   AVERAGE     constant training-mean score

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "c2w/data.hpp"
#include "c2w/gru.hpp"
#include "c2w/numkernel.hpp"
#include "c2w/vocab.hpp"

namespace c2w {

enum class ModelKind { average, bigru_char, bigru_word, c2w2s4pt };

inline std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::average: return "average";
    case ModelKind::bigru_char: return "bigru-char";
    case ModelKind::bigru_word: return "bigru-word";
    case ModelKind::c2w2s4pt: return "c2w2s4pt";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  for (ModelKind k :
       {ModelKind::average, ModelKind::bigru_char, ModelKind::bigru_word, ModelKind::c2w2s4pt}) {
    if (model_kind_name(k) == s) return k;
  }
  throw std::invalid_argument("unknown model kind '" + std::string(s) + "'");
}

inline bool uses_word_vocab(ModelKind k) { return k == ModelKind::bigru_word; }

struct ModelDims {
  std::size_t char_dim = 50;
  std::size_t word_dim = 256;  // word-embedding size of the word baseline
  std::size_t char_hidden = 256;
  std::size_t word_hidden = 256;
  std::size_t mlp_hidden = 256;
  std::size_t vocab_size = 0;  // including the unknown id

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct MlpHead {
  Mat w_eh;  // mlp_hidden x sentence
  Vec b_h;
  Mat w_hy;  // 1 x mlp_hidden
  double b_y = 0.0;

  MlpHead() = default;
  MlpHead(std::size_t input, std::size_t hidden)
      : w_eh(hidden, input), b_h(hidden), w_hy(1, hidden) {}

  friend bool operator==(const MlpHead&, const MlpHead&) = default;
};

struct ModelParams {
  ModelKind kind = ModelKind::c2w2s4pt;
  Mat embedding;         // dim x vocab; characters, or words for BI_GRU_WORD
  BiRnnParams char_rnn;  // C2W2S4PT, BI_GRU_CHAR
  BiRnnParams word_rnn;  // C2W2S4PT, BI_GRU_WORD
  MlpHead head;

  /// All-zero parameters with a closed shape chain.
  static ModelParams zeros(ModelKind kind, const ModelDims& d) {
    if (kind == ModelKind::average) {
      throw std::invalid_argument("ModelParams: the average baseline has no parameters");
    }
    if (d.vocab_size == 0) throw std::invalid_argument("ModelParams: empty vocabulary");
    ModelParams p;
    p.kind = kind;
    switch (kind) {
      case ModelKind::c2w2s4pt:
        p.embedding = Mat(d.char_dim, d.vocab_size);
        p.char_rnn = BiRnnParams(d.char_dim, d.char_hidden);
        p.word_rnn = BiRnnParams(2 * d.char_hidden, d.word_hidden);
        p.head = MlpHead(2 * d.word_hidden, d.mlp_hidden);
        break;
      case ModelKind::bigru_char:
        p.embedding = Mat(d.char_dim, d.vocab_size);
        p.char_rnn = BiRnnParams(d.char_dim, d.char_hidden);
        p.head = MlpHead(2 * d.char_hidden, d.mlp_hidden);
        break;
      case ModelKind::bigru_word:
        p.embedding = Mat(d.word_dim, d.vocab_size);
        p.word_rnn = BiRnnParams(d.word_dim, d.word_hidden);
        p.head = MlpHead(2 * d.word_hidden, d.mlp_hidden);
        break;
      case ModelKind::average: break;
    }
    p.validate();
    return p;
  }

  ModelParams zeros_like() const {
    ModelParams g = *this;
    g.for_each_tensor([](std::string_view, std::span<double> v, std::size_t, std::size_t) {
      std::fill(v.begin(), v.end(), 0.0);
    });
    return g;
  }

  bool has_char_rnn() const { return kind == ModelKind::c2w2s4pt || kind == ModelKind::bigru_char; }
  bool has_word_rnn() const { return kind == ModelKind::c2w2s4pt || kind == ModelKind::bigru_word; }

  /// The recurrent encoder whose output is the sentence vector.
  const BiRnnParams& sentence_rnn() const {
    return kind == ModelKind::bigru_char ? char_rnn : word_rnn;
  }

  std::size_t sentence_size() const { return head.w_eh.cols(); }

  ModelDims dims() const {
    ModelDims d;
    d.vocab_size = embedding.cols();
    d.mlp_hidden = head.w_eh.rows();
    if (kind == ModelKind::bigru_word) {
      d.word_dim = embedding.rows();
    } else {
      d.char_dim = embedding.rows();
      d.char_hidden = char_rnn.hidden_size();
    }
    if (has_word_rnn()) d.word_hidden = word_rnn.hidden_size();
    return d;
  }

  /// Checks the dimension chain embedding -> rnn(s) -> head.
  void validate() const {
    const std::size_t emb = embedding.rows();
    std::size_t sentence = 0;
    if (has_char_rnn()) {
      char_rnn.validate();
      if (char_rnn.input_size() != emb) throw ShapeError("char bi-RNN input != embedding size");
      sentence = char_rnn.output_size();
    }
    if (has_word_rnn()) {
      word_rnn.validate();
      const std::size_t expect = kind == ModelKind::c2w2s4pt ? char_rnn.output_size() : emb;
      if (word_rnn.input_size() != expect) {
        throw ShapeError("word bi-RNN input " + std::to_string(word_rnn.input_size()) +
                         " != " + std::to_string(expect));
      }
      sentence = word_rnn.output_size();
    }
    if (head.w_eh.cols() != sentence || head.b_h.size() != head.w_eh.rows() ||
        head.w_hy.rows() != 1 || head.w_hy.cols() != head.w_eh.rows()) {
      throw ShapeError("MLP head shapes do not match sentence size " + std::to_string(sentence));
    }
  }

  /// Visits (name, values, rows, cols) for every trainable tensor of this kind.
  template <class F>
  void for_each_tensor(F&& f) {
    f("embedding", embedding.span(), embedding.rows(), embedding.cols());
    auto visit_rnn = [&](std::string_view prefix, BiRnnParams& rnn) {
      rnn.fwd.for_each_tensor([&](std::string_view n, std::span<double> v, std::size_t r, std::size_t c) {
        f(std::string(prefix) + ".fwd." + std::string(n), v, r, c);
      });
      rnn.bwd.for_each_tensor([&](std::string_view n, std::span<double> v, std::size_t r, std::size_t c) {
        f(std::string(prefix) + ".bwd." + std::string(n), v, r, c);
      });
    };
    if (has_char_rnn()) visit_rnn("char_rnn", char_rnn);
    if (has_word_rnn()) visit_rnn("word_rnn", word_rnn);
    f("head.w_eh", head.w_eh.span(), head.w_eh.rows(), head.w_eh.cols());
    f("head.b_h", head.b_h.span(), head.b_h.size(), std::size_t{1});
    f("head.w_hy", head.w_hy.span(), head.w_hy.rows(), head.w_hy.cols());
    f("head.b_y", std::span<double>(&head.b_y, 1), std::size_t{1}, std::size_t{1});
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<ModelParams*>(this)->for_each_tensor(
        [&](std::string_view name, std::span<double> v, std::size_t r, std::size_t c) {
          f(name, std::span<const double>(v), r, c);
        });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_tensor([&](std::string_view, std::span<const double> v, std::size_t, std::size_t) {
      n += v.size();
    });
    return n;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// this += scale * other, tensor by tensor. Shapes must match.
inline void add_scaled(ModelParams& acc, const ModelParams& other, double scale = 1.0) {
  std::vector<std::span<const double>> src;
  other.for_each_tensor([&](std::string_view, std::span<const double> v, std::size_t, std::size_t) {
    src.push_back(v);
  });
  std::size_t k = 0;
  acc.for_each_tensor([&](std::string_view name, std::span<double> v, std::size_t, std::size_t) {
    if (k >= src.size() || src[k].size() != v.size()) {
      throw ShapeError("add_scaled: tensor '" + std::string(name) + "' shape mismatch");
    }
    const auto& s = src[k++];
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += scale * s[i];
  });
}

// ---------------------------------------------------------------------------
// Vocabularies and input encoding

/// Characters of all tokens, first-appearance order.
inline CharVocab build_char_vocab(std::span<const Tweet> tweets) {
  if (tweets.empty()) throw std::invalid_argument("build_char_vocab: empty corpus");
  CharVocab v;
  for (const auto& t : tweets) {
    for (const auto& tok : t.tokens) {
      for (char32_t c : tok) v.add(c);
    }
  }
  return v;
}

/// Characters of the whole normalized text, whitespace included.
inline CharVocab build_text_char_vocab(std::span<const Tweet> tweets) {
  if (tweets.empty()) throw std::invalid_argument("build_text_char_vocab: empty corpus");
  CharVocab v;
  for (const auto& t : tweets) {
    for (char32_t c : t.text) v.add(c);
  }
  return v;
}

inline WordVocab build_word_vocab(std::span<const Tweet> tweets) {
  if (tweets.empty()) throw std::invalid_argument("build_word_vocab: empty corpus");
  WordVocab v;
  for (const auto& t : tweets) {
    for (const auto& tok : t.tokens) v.add(tok);
  }
  return v;
}

/// Id sequences consumed by the network.
struct EncodedInput {
  std::vector<std::vector<std::size_t>> words;  // C2W2S4PT: char ids per word
  std::vector<std::size_t> sequence;            // BI_GRU_CHAR: char ids; BI_GRU_WORD: word ids
};

inline EncodedInput encode_c2w(const CharVocab& vocab, std::span<const std::u32string> tokens) {
  EncodedInput in;
  for (const auto& tok : tokens) {
    if (tok.empty()) throw std::invalid_argument("encode: empty word");
    auto& ids = in.words.emplace_back();
    for (char32_t c : tok) ids.push_back(vocab.lookup(c));
  }
  return in;
}

inline EncodedInput encode_chars(const CharVocab& vocab, std::u32string_view text) {
  EncodedInput in;
  for (char32_t c : text) in.sequence.push_back(vocab.lookup(c));
  return in;
}

inline EncodedInput encode_words(const WordVocab& vocab, std::span<const std::u32string> tokens) {
  EncodedInput in;
  for (const auto& tok : tokens) in.sequence.push_back(vocab.lookup(tok));
  return in;
}

// ---------------------------------------------------------------------------
// Forward pass

/// Inverted-dropout scale factors (0 or 1/(1-rate)). An empty vector means
/// no dropout at that site.
struct DropoutMasks {
  std::vector<Vec> words;  // one per word (C2W2S4PT only)
  Vec sentence;
};

struct SentenceTrace {
  ModelKind kind = ModelKind::c2w2s4pt;
  EncodedInput input;
  std::vector<BiRnnTrace> word_traces;  // C2W2S4PT char-level traces, one per word
  std::vector<Vec> word_vectors;        // e_w as fed to the word bi-RNN (post-dropout)
  std::vector<Vec> word_masks;
  BiRnnTrace sequence_trace;  // the sentence-level bi-RNN
  Vec sentence;               // e_s before dropout
  Vec sentence_mask;
  Vec head_input;  // e_s after dropout
  Vec head_pre;    // W_eh e_s + b_h
  Vec head_hidden;
  double prediction = 0.0;
};

inline Vec embedding_column(const Mat& e, std::size_t id) {
  if (id >= e.cols()) {
    throw ShapeError("embedding lookup: id " + std::to_string(id) + " outside table of " +
                     std::to_string(e.cols()) + " columns");
  }
  Vec out(e.rows());
  for (std::size_t r = 0; r < e.rows(); ++r) out[r] = e(r, id);
  return out;
}

/// Character embeddings of one word: column vocab(c) of e_c for each character,
/// i.e. e_c times the character's one-hot vector.
inline std::vector<Vec> embed_chars(const CharVocab& vocab, const Mat& e_c, std::u32string_view word) {
  if (word.empty()) throw std::invalid_argument("embed_chars: empty word");
  std::vector<Vec> out;
  out.reserve(word.size());
  for (char32_t c : word) out.push_back(embedding_column(e_c, vocab.lookup(c)));
  return out;
}

namespace detail {

inline std::vector<Vec> lookup_all(const Mat& e, std::span<const std::size_t> ids) {
  std::vector<Vec> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(embedding_column(e, id));
  return out;
}

inline Vec apply_mask(const Vec& v, const Vec& mask) {
  if (mask.empty()) return v;
  return hadamard(v, mask);
}

}  // namespace detail

/// Word vector [forward final state ; backward state at the first character].
inline Vec compose_word(const ModelParams& params, const CharVocab& vocab, std::u32string_view word,
                        BiRnnTrace* trace = nullptr) {
  auto chars = embed_chars(vocab, params.embedding, word);
  return birnn_encode(params.char_rnn, chars, trace);
}

/// MLP head: relu(W_eh (mask * e_s) + b_h), then W_hy h + b_y.
inline double predict(const ModelParams& params, const Vec& e_s, const Vec* mask = nullptr,
                      SentenceTrace* trace = nullptr) {
  const auto& h = params.head;
  if (e_s.size() != h.w_eh.cols()) {
    throw ShapeError("predict: sentence vector of length " + std::to_string(e_s.size()) +
                     " for W_eh " + h.w_eh.shape_str());
  }
  Vec input = mask != nullptr && !mask->empty() ? hadamard(e_s, *mask) : e_s;
  Vec pre = matvec(h.w_eh, input) + h.b_h;
  Vec hidden = relu_v(pre);
  const double y = detail::dot(h.w_hy.data(), hidden.data(), hidden.size()) + h.b_y;
  if (!std::isfinite(y)) throw NumericError("predict: non-finite output");
  if (trace != nullptr) {
    trace->head_input = std::move(input);
    trace->head_pre = std::move(pre);
    trace->head_hidden = std::move(hidden);
    trace->prediction = y;
  }
  return y;
}

/// Full forward pass for any neural kind, keeping everything needed by
/// backward_full.
inline SentenceTrace forward(const ModelParams& params, const EncodedInput& input,
                             const DropoutMasks* masks = nullptr) {
  SentenceTrace tr;
  tr.kind = params.kind;
  tr.input = input;
  std::vector<Vec> seq;
  switch (params.kind) {
    case ModelKind::c2w2s4pt: {
      if (input.words.empty()) throw std::invalid_argument("forward: empty token list");
      if (masks != nullptr && !masks->words.empty() && masks->words.size() != input.words.size()) {
        throw ShapeError("forward: word dropout masks do not match word count");
      }
      tr.word_traces.resize(input.words.size());
      for (std::size_t i = 0; i < input.words.size(); ++i) {
        if (input.words[i].empty()) throw std::invalid_argument("forward: empty word");
        auto chars = detail::lookup_all(params.embedding, input.words[i]);
        Vec e_w = birnn_encode(params.char_rnn, chars, &tr.word_traces[i]);
        if (masks != nullptr && !masks->words.empty()) {
          tr.word_masks.push_back(masks->words[i]);
          e_w = hadamard(e_w, masks->words[i]);
        }
        tr.word_vectors.push_back(std::move(e_w));
      }
      seq = tr.word_vectors;
      tr.sentence = birnn_encode(params.word_rnn, seq, &tr.sequence_trace);
      break;
    }
    case ModelKind::bigru_char:
    case ModelKind::bigru_word: {
      if (input.sequence.empty()) throw std::invalid_argument("forward: empty sequence");
      seq = detail::lookup_all(params.embedding, input.sequence);
      tr.sentence = birnn_encode(params.sentence_rnn(), seq, &tr.sequence_trace);
      break;
    }
    case ModelKind::average:
      throw std::invalid_argument("forward: the average baseline has no network");
  }
  if (masks != nullptr) tr.sentence_mask = masks->sentence;
  predict(params, tr.sentence, &tr.sentence_mask, &tr);
  return tr;
}

/// Sentence vector e_s and trace for a tokenized sentence.
inline std::pair<Vec, SentenceTrace> encode_sentence(const ModelParams& params,
                                                     const CharVocab& vocab,
                                                     std::span<const std::u32string> tokens) {
  if (params.kind != ModelKind::c2w2s4pt) {
    throw std::invalid_argument("encode_sentence: requires a C2W2S4PT model");
  }
  if (tokens.empty()) throw std::invalid_argument("encode_sentence: empty token list");
  SentenceTrace tr = forward(params, encode_c2w(vocab, tokens));
  Vec e_s = tr.sentence;
  return {std::move(e_s), std::move(tr)};
}

/// Prediction of any neural kind on an already-encoded input (no dropout).
inline double baseline_forward(const ModelParams& params, const EncodedInput& input) {
  return forward(params, input).prediction;
}

inline double mse_loss(std::span<const double> preds, std::span<const double> truths) {
  if (preds.size() != truths.size()) throw ShapeError("mse_loss: length mismatch");
  if (preds.empty()) throw std::invalid_argument("mse_loss: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = truths[i] - preds[i];
    s += d * d;
  }
  return s / static_cast<double>(preds.size());
}

// ---------------------------------------------------------------------------
// Backward pass

namespace detail {

inline void scatter_column(Mat& e, std::size_t id, const Vec& g) {
  for (std::size_t r = 0; r < e.rows(); ++r) e(r, id) += g[r];
}

inline void check_trace(const ModelParams& p, const SentenceTrace& tr) {
  const bool ok = tr.kind == p.kind && tr.sentence.size() == p.sentence_size() &&
                  tr.head_hidden.size() == p.head.w_eh.rows() &&
                  !tr.sequence_trace.fwd.empty() &&
                  tr.sequence_trace.fwd.front().h_prev.size() == p.sentence_rnn().hidden_size() &&
                  tr.sequence_trace.fwd.front().x.size() == p.sentence_rnn().input_size();
  if (!ok) throw std::invalid_argument("backward_full: trace does not belong to these parameters");
}

}  // namespace detail

/// Accumulates dL/dtheta into `grads` (shaped like params) given dL/dy.
/// Embedding columns receive gradient only where an id was visited.
inline void backward_full(const ModelParams& params, const SentenceTrace& tr, double d_y,
                          ModelParams& grads) {
  detail::check_trace(params, tr);
  const auto& h = params.head;
  auto& gh = grads.head;
  const std::size_t hid = h.w_eh.rows();

  gh.b_y += d_y;
  Vec d_pre(hid);
  for (std::size_t i = 0; i < hid; ++i) {
    gh.w_hy(0, i) += d_y * tr.head_hidden[i];
    d_pre[i] = tr.head_pre[i] > 0.0 ? d_y * h.w_hy(0, i) : 0.0;
    gh.b_h[i] += d_pre[i];
  }
  detail::outer_acc(gh.w_eh, d_pre.data(), tr.head_input.data());
  Vec d_sentence(h.w_eh.cols());
  detail::gemv_t_acc(h.w_eh, d_pre.data(), d_sentence.data());
  if (!tr.sentence_mask.empty()) d_sentence = hadamard(d_sentence, tr.sentence_mask);

  switch (params.kind) {
    case ModelKind::c2w2s4pt: {
      auto d_words = birnn_backward(params.word_rnn, tr.sequence_trace, d_sentence, grads.word_rnn);
      for (std::size_t i = 0; i < d_words.size(); ++i) {
        Vec d_ew = tr.word_masks.empty() ? d_words[i] : hadamard(d_words[i], tr.word_masks[i]);
        auto d_chars = birnn_backward(params.char_rnn, tr.word_traces[i], d_ew, grads.char_rnn);
        for (std::size_t j = 0; j < d_chars.size(); ++j) {
          detail::scatter_column(grads.embedding, tr.input.words[i][j], d_chars[j]);
        }
      }
      break;
    }
    case ModelKind::bigru_char:
    case ModelKind::bigru_word: {
      BiRnnParams& g_rnn = params.kind == ModelKind::bigru_char ? grads.char_rnn : grads.word_rnn;
      auto d_xs = birnn_backward(params.sentence_rnn(), tr.sequence_trace, d_sentence, g_rnn);
      for (std::size_t j = 0; j < d_xs.size(); ++j) {
        detail::scatter_column(grads.embedding, tr.input.sequence[j], d_xs[j]);
      }
      break;
    }
    case ModelKind::average: break;
  }
}

}  // namespace c2w
