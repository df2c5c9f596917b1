#pragma once

// Mini-batch training with Adam and inverted dropout, deterministic seeding,
// and the finite-difference gradient checker.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "c2w/data.hpp"
#include "c2w/model.hpp"
#include "c2w/refmodel.hpp"
#include "c2w/random.hpp"

namespace c2w {

// ---------------------------------------------------------------------------
// Configuration

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class InitScheme { glorot_uniform, zeros };

inline std::string_view init_scheme_name(InitScheme s) {
  return s == InitScheme::zeros ? "zeros" : "glorot_uniform";
}

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 100;
  double dropout_rate = 0.5;
  std::uint64_t seed = 0;
  InitScheme init_scheme = InitScheme::glorot_uniform;
  std::optional<double> clip_norm;
  // network shape
  std::size_t char_dim = 50;
  std::size_t word_dim = 256;
  std::size_t char_hidden = 256;
  std::size_t word_hidden = 256;
  std::size_t mlp_hidden = 256;
  // dropout on each composed word vector in addition to the sentence vector
  bool word_dropout = true;
  bool clamp_predictions = false;

  void validate() const {
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
      throw ConfigError("dropout_rate must be in [0, 1)");
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("beta1/beta2 must be in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
    if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
    if (char_dim == 0 || word_dim == 0 || char_hidden == 0 || word_hidden == 0 || mlp_hidden == 0) {
      throw ConfigError("all dimensions must be positive");
    }
  }

  ModelDims dims(std::size_t vocab_size) const {
    return ModelDims{char_dim, word_dim, char_hidden, word_hidden, mlp_hidden, vocab_size};
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_unsigned(const std::string& key, const std::string& v) {
  T out{};
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  auto d = parse_double(v);
  if (!d || !std::isfinite(*d)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return *d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace detail

/// Parses `key = value` lines. '#' starts a comment. Unknown or repeated keys
/// are errors; absent keys keep their defaults.
inline TrainConfig parse_train_config(std::string_view text) {
  TrainConfig c;
  std::map<std::string, bool> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = detail::trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string val = detail::trim(std::string_view(line).substr(eq + 1));
    if (seen[key]) throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    seen[key] = true;
    if (key == "learning_rate") c.learning_rate = detail::parse_real(key, val);
    else if (key == "beta1") c.beta1 = detail::parse_real(key, val);
    else if (key == "beta2") c.beta2 = detail::parse_real(key, val);
    else if (key == "epsilon") c.epsilon = detail::parse_real(key, val);
    else if (key == "batch_size") c.batch_size = detail::parse_int(key, val);
    else if (key == "epochs") c.epochs = detail::parse_int(key, val);
    else if (key == "dropout_rate") c.dropout_rate = detail::parse_real(key, val);
    else if (key == "seed") c.seed = detail::parse_unsigned<std::uint64_t>(key, val);
    else if (key == "init_scheme") {
      if (val == "glorot_uniform") c.init_scheme = InitScheme::glorot_uniform;
      else if (val == "zeros") c.init_scheme = InitScheme::zeros;
      else throw ConfigError("config key 'init_scheme': unknown scheme '" + val + "'");
    } else if (key == "clip_norm") {
      if (val == "none") c.clip_norm.reset();
      else c.clip_norm = detail::parse_real(key, val);
    } else if (key == "char_dim") c.char_dim = detail::parse_unsigned<std::size_t>(key, val);
    else if (key == "word_dim") c.word_dim = detail::parse_unsigned<std::size_t>(key, val);
    else if (key == "char_hidden") c.char_hidden = detail::parse_unsigned<std::size_t>(key, val);
    else if (key == "word_hidden") c.word_hidden = detail::parse_unsigned<std::size_t>(key, val);
    else if (key == "mlp_hidden") c.mlp_hidden = detail::parse_unsigned<std::size_t>(key, val);
    else if (key == "word_dropout") c.word_dropout = detail::parse_bool(key, val);
    else if (key == "clamp_predictions") c.clamp_predictions = detail::parse_bool(key, val);
    else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

inline TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

/// Canonical text form; parse_train_config(format_train_config(c)) == c.
inline std::string format_train_config(const TrainConfig& c) {
  std::string s;
  auto kv = [&](std::string_view k, const std::string& v) {
    s.append(k).append(" = ").append(v).push_back('\n');
  };
  kv("learning_rate", format_double(c.learning_rate));
  kv("beta1", format_double(c.beta1));
  kv("beta2", format_double(c.beta2));
  kv("epsilon", format_double(c.epsilon));
  kv("batch_size", std::to_string(c.batch_size));
  kv("epochs", std::to_string(c.epochs));
  kv("dropout_rate", format_double(c.dropout_rate));
  kv("seed", std::to_string(c.seed));
  kv("init_scheme", std::string(init_scheme_name(c.init_scheme)));
  kv("clip_norm", c.clip_norm ? format_double(*c.clip_norm) : "none");
  kv("char_dim", std::to_string(c.char_dim));
  kv("word_dim", std::to_string(c.word_dim));
  kv("char_hidden", std::to_string(c.char_hidden));
  kv("word_hidden", std::to_string(c.word_hidden));
  kv("mlp_hidden", std::to_string(c.mlp_hidden));
  kv("word_dropout", c.word_dropout ? "true" : "false");
  kv("clamp_predictions", c.clamp_predictions ? "true" : "false");
  return s;
}

/// FNV-1a over the canonical config text.
inline std::uint64_t config_fingerprint(const TrainConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : format_train_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Initialization and dropout

namespace detail {
inline bool is_bias(std::string_view name) {
  const auto dot = name.rfind('.');
  const auto leaf = dot == std::string_view::npos ? name : name.substr(dot + 1);
  return leaf.starts_with("b_");
}
}  // namespace detail

/// Glorot-uniform weights (+-sqrt(6 / (fan_in + fan_out))), zero biases,
/// embedding entries uniform in +-0.1. Deterministic in `seed`.
inline ModelParams init_params(ModelKind kind, const ModelDims& dims, InitScheme scheme,
                               std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(kind, dims);
  if (scheme == InitScheme::zeros) return p;
  SplitMix64 rng(seed);
  p.for_each_tensor([&](std::string_view name, std::span<double> v, std::size_t rows, std::size_t cols) {
    if (detail::is_bias(name)) return;
    const double bound =
        name == "embedding" ? 0.1 : std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& x : v) x = rng.uniform(-bound, bound);
  });
  return p;
}

/// Inverted dropout: returns (v * mask, mask) where each mask entry is 0 with
/// probability `rate` and 1/(1-rate) otherwise.
inline std::pair<Vec, Vec> dropout_apply(const Vec& v, double rate, SplitMix64& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  Vec mask(v.size(), 1.0);
  if (rate > 0.0) {
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < v.size(); ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
  }
  return {hadamard(v, mask), std::move(mask)};
}

/// Draws every dropout mask one forward pass needs.
inline DropoutMasks draw_masks(const ModelParams& p, const EncodedInput& in, const TrainConfig& cfg,
                               SplitMix64& rng) {
  DropoutMasks m;
  if (cfg.dropout_rate <= 0.0) return m;
  if (cfg.word_dropout && p.kind == ModelKind::c2w2s4pt) {
    const Vec ones(p.char_rnn.output_size(), 1.0);
    for (std::size_t i = 0; i < in.words.size(); ++i) {
      m.words.push_back(dropout_apply(ones, cfg.dropout_rate, rng).second);
    }
  }
  m.sentence = dropout_apply(Vec(p.sentence_size(), 1.0), cfg.dropout_rate, rng).second;
  return m;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(const ModelParams& p) {
    p.for_each_tensor([&](std::string_view, std::span<const double> x, std::size_t, std::size_t) {
      m.emplace_back(x.size(), 0.0);
      v.emplace_back(x.size(), 0.0);
    });
  }
};

/// One bias-corrected Adam update, in place.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      const TrainConfig& cfg) {
  std::vector<std::span<const double>> g;
  grads.for_each_tensor([&](std::string_view, std::span<const double> x, std::size_t, std::size_t) {
    g.push_back(x);
  });
  if (g.size() != state.m.size()) throw ShapeError("adam_step: state/gradient tensor count mismatch");
  double scale = 1.0;
  if (cfg.clip_norm) {
    double sq = 0.0;
    for (const auto& x : g) {
      for (double e : x) sq += e * e;
    }
    const double norm = std::sqrt(sq);
    if (norm > *cfg.clip_norm) scale = *cfg.clip_norm / norm;
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  std::size_t k = 0;
  params.for_each_tensor([&](std::string_view name, std::span<double> theta, std::size_t, std::size_t) {
    if (k >= g.size() || g[k].size() != theta.size() || state.m[k].size() != theta.size()) {
      throw ShapeError("adam_step: tensor '" + std::string(name) + "' shape mismatch");
    }
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& gk = g[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = scale * gk[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
    ++k;
  });
}

// ---------------------------------------------------------------------------
// Trained model

struct TrainedModel {
  ModelKind kind = ModelKind::c2w2s4pt;
  Trait trait = Trait::ext;
  TrainConfig config;
  CharVocab chars;  // C2W2S4PT, BI_GRU_CHAR
  WordVocab words;  // BI_GRU_WORD
  ModelParams params;
  double average = 0.0;  // AVERAGE

  EncodedInput encode(const Tweet& t) const {
    switch (kind) {
      case ModelKind::c2w2s4pt: return encode_c2w(chars, t.tokens);
      case ModelKind::bigru_char: return encode_chars(chars, t.text);
      case ModelKind::bigru_word: return encode_words(words, t.tokens);
      case ModelKind::average: return {};
    }
    return {};
  }

  double finish(double y) const {
    return config.clamp_predictions ? std::clamp(y, kMinScore, kMaxScore) : y;
  }

  double predict(const Tweet& t) const {
    if (kind == ModelKind::average) return finish(average);
    return finish(forward(params, encode(t)).prediction);
  }

  /// Sentence representation e_s (no dropout).
  Vec sentence_vector(const Tweet& t) const {
    if (kind == ModelKind::average) throw std::invalid_argument("average baseline has no embedding");
    return forward(params, encode(t)).sentence;
  }

  /// Normalizes and tokenizes raw text; nullopt if nothing is left.
  std::optional<double> predict_text(std::string_view text) const {
    auto t = make_tweet(RawRecord{"-", std::string(text), {}});
    if (!t) return std::nullopt;
    return predict(*t);
  }
};

// ---------------------------------------------------------------------------
// Training loop

struct EpochReport {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> val_rmse;
  double seconds = 0.0;
};

struct TrainOptions {
  unsigned threads = 1;
  std::span<const Tweet> validation;  // optional; only used for reporting
  std::function<void(const EpochReport&)> on_epoch;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochReport> reports;
};

// Stream tags for derive_seed.
inline constexpr std::uint64_t kInitStream = 0;
inline constexpr std::uint64_t kShuffleStream = 1;
inline constexpr std::uint64_t kDropoutStream = 2;

namespace detail {

inline void zero(ModelParams& g) {
  g.for_each_tensor([](std::string_view, std::span<double> v, std::size_t, std::size_t) {
    std::fill(v.begin(), v.end(), 0.0);
  });
}

/// Forward/backward for one example into `grads` (zeroed first). Returns the
/// squared error.
inline double example_gradient(const ModelParams& params, const EncodedInput& in, double target,
                               const DropoutMasks& masks, double scale, ModelParams& grads) {
  zero(grads);
  SentenceTrace tr = forward(params, in, &masks);
  const double err = tr.prediction - target;
  backward_full(params, tr, 2.0 * err * scale, grads);
  return err * err;
}

}  // namespace detail

/// Trains on `train_set` for exactly cfg.epochs epochs. The vocabulary is
/// built from `train_set` only. Per-batch gradients are the mean of
/// per-example gradients, reduced in ascending example order, so the result
/// does not depend on `opts.threads`.
inline TrainResult train_model(ModelKind kind, std::span<const Tweet> train_set, Trait trait,
                               const TrainConfig& cfg, const TrainOptions& opts = {}) {
  cfg.validate();
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  TrainResult result;
  TrainedModel& model = result.model;
  model.kind = kind;
  model.trait = trait;
  model.config = cfg;
  if (kind == ModelKind::average) {
    double s = 0.0;
    for (const auto& t : train_set) s += t.traits.get(trait);
    model.average = s / static_cast<double>(train_set.size());
    return result;
  }
  std::size_t vocab_size = 0;
  if (kind == ModelKind::c2w2s4pt) {
    model.chars = build_char_vocab(train_set);
    vocab_size = model.chars.size();
  } else if (kind == ModelKind::bigru_char) {
    model.chars = build_text_char_vocab(train_set);
    vocab_size = model.chars.size();
  } else {
    model.words = build_word_vocab(train_set);
    vocab_size = model.words.size();
  }
  model.params = init_params(kind, cfg.dims(vocab_size), cfg.init_scheme,
                             derive_seed(cfg.seed, kInitStream));

  std::vector<EncodedInput> inputs;
  std::vector<double> targets;
  inputs.reserve(train_set.size());
  for (const auto& t : train_set) {
    inputs.push_back(model.encode(t));
    targets.push_back(t.traits.get(trait));
  }

  SplitMix64 shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  SplitMix64 dropout_rng(derive_seed(cfg.seed, kDropoutStream));
  AdamState adam(model.params);
  ModelParams batch_grad = model.params.zeros_like();
  const unsigned threads = std::max(1u, opts.threads);
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t slots = std::min<std::size_t>(threads, batch);
  std::vector<ModelParams> slot_grads(slots, batch_grad);
  std::vector<double> slot_loss(slots, 0.0);
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_rng.shuffle(std::span(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      const double scale = 1.0 / static_cast<double>(n);
      // Masks come from the sequential stream before any parallel work.
      std::vector<DropoutMasks> masks;
      masks.reserve(n);
      for (std::size_t j = 0; j < n; ++j) {
        masks.push_back(draw_masks(model.params, inputs[order[start + j]], cfg, dropout_rng));
      }
      detail::zero(batch_grad);
      for (std::size_t wave = 0; wave < n; wave += slots) {
        const std::size_t m = std::min(slots, n - wave);
        auto job = [&](std::size_t s) {
          const std::size_t idx = order[start + wave + s];
          slot_loss[s] = detail::example_gradient(model.params, inputs[idx], targets[idx],
                                                  masks[wave + s], scale, slot_grads[s]);
        };
        if (m == 1) {
          job(0);
        } else {
          std::vector<std::jthread> pool;
          for (std::size_t s = 1; s < m; ++s) pool.emplace_back(job, s);
          job(0);
        }
        for (std::size_t s = 0; s < m; ++s) {
          add_scaled(batch_grad, slot_grads[s]);
          loss_sum += slot_loss[s];
        }
      }
      adam_step(model.params, batch_grad, adam, cfg);
    }
    EpochReport rep;
    rep.epoch = epoch;
    rep.loss = loss_sum / static_cast<double>(order.size());
    if (!opts.validation.empty()) {
      double sq = 0.0;
      for (const auto& t : opts.validation) {
        const double d = model.predict(t) - t.traits.get(trait);
        sq += d * d;
      }
      rep.val_rmse = std::sqrt(sq / static_cast<double>(opts.validation.size()));
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (opts.on_epoch) opts.on_epoch(rep);
    result.reports.push_back(rep);
  }
  return result;
}

/// Trains on every fold of `plan` except `fold_index`.
inline TrainResult train(ModelKind kind, std::span<const Tweet> corpus, Trait trait,
                         const FoldPlan& plan, int fold_index, const TrainConfig& cfg,
                         const TrainOptions& opts = {}) {
  if (plan.assignment.size() != corpus.size()) {
    throw std::invalid_argument("train: fold plan does not cover the corpus");
  }
  std::vector<Tweet> train_set;
  for (std::size_t i : plan.train_indices(fold_index)) train_set.push_back(corpus[i]);
  return train_model(kind, train_set, trait, cfg, opts);
}

// ---------------------------------------------------------------------------
// Gradient checking

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  std::size_t components = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares backward_full against central differences of the squared error
/// (y - y_hat)^2 for every parameter component. The differences are taken on
/// the extended-precision reference forward pass. `tamper`, if set, may modify
/// the analytic gradients before comparison.
inline GradCheckResult grad_check_instance(const ModelParams& params, const EncodedInput& input,
                                           double target, const DropoutMasks& masks, double eps,
                                           const std::function<void(ModelParams&)>& tamper = {}) {
  if (!(eps > 0.0)) throw std::invalid_argument("grad_check: eps must be > 0");
  ModelParams grads = params.zeros_like();
  {
    SentenceTrace tr = forward(params, input, &masks);
    backward_full(params, tr, 2.0 * (tr.prediction - target), grads);
  }
  if (tamper) tamper(grads);
  ref::Params lp(params);
  auto loss = [&] {
    const ref::real e = ref::forward(lp, input, masks) - static_cast<ref::real>(target);
    return e * e;
  };
  GradCheckResult res;
  std::size_t k = 0;
  grads.for_each_tensor([&](std::string_view name, std::span<const double> analytic, std::size_t,
                            std::size_t) {
    auto& theta = lp.t[k].v;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const ref::real saved = theta[i];
      theta[i] = saved + eps;
      const ref::real up = loss();
      theta[i] = saved - eps;
      const ref::real down = loss();
      theta[i] = saved;
      const double numeric = static_cast<double>((up - down) / (2.0L * eps));
      const double err = relative_error(analytic[i], numeric);
      ++res.components;
      if (err > res.max_rel_error || res.worst_tensor.empty()) {
        res.max_rel_error = err;
        res.worst_tensor = std::string(name);
        res.worst_index = i;
      }
    }
    ++k;
  });
  return res;
}

struct GradCheckInstance {
  ModelParams params;
  EncodedInput input;
  double target = 0.0;
  DropoutMasks masks;
};

/// Random tiny instance: dims in [1, 5], vocabulary of 7 ids, up to 3 words
/// of up to 4 characters (up to 12 characters for the char baseline).
/// Odd-numbered trials carry fixed dropout masks at rate 0.5.
inline GradCheckInstance random_grad_check_instance(ModelKind kind, std::uint64_t seed,
                                                    int trial) {
  SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(trial)));
  auto dim = [&] { return static_cast<std::size_t>(1 + rng.below(5)); };
  ModelDims d;
  d.char_dim = dim();
  d.word_dim = dim();
  d.char_hidden = dim();
  d.word_hidden = dim();
  d.mlp_hidden = dim();
  d.vocab_size = 7;
  GradCheckInstance inst;
  inst.params = init_params(kind, d, InitScheme::glorot_uniform, rng.next());
  inst.params.for_each_tensor([&](std::string_view, std::span<double> v, std::size_t, std::size_t) {
    for (double& x : v) x += rng.uniform(-0.1, 0.1);
  });
  const std::size_t n_words = 1 + rng.below(3);
  if (kind == ModelKind::c2w2s4pt) {
    for (std::size_t w = 0; w < n_words; ++w) {
      auto& ids = inst.input.words.emplace_back();
      const std::size_t n_chars = 1 + rng.below(4);
      for (std::size_t c = 0; c < n_chars; ++c) ids.push_back(rng.below(d.vocab_size));
    }
  } else {
    const std::size_t len = kind == ModelKind::bigru_char ? 1 + rng.below(12) : n_words;
    for (std::size_t c = 0; c < len; ++c) inst.input.sequence.push_back(rng.below(d.vocab_size));
  }
  inst.target = rng.uniform(-0.5, 0.5);
  if (trial % 2 == 1) {
    TrainConfig cfg;
    cfg.dropout_rate = 0.5;
    cfg.word_dropout = true;
    inst.masks = draw_masks(inst.params, inst.input, cfg, rng);
  }
  return inst;
}

/// Maximum relative error over `n_trials` random tiny instances.
inline GradCheckResult grad_check(ModelKind kind, int n_trials, double eps, std::uint64_t seed) {
  if (kind == ModelKind::average) throw std::invalid_argument("grad_check: no gradients for average");
  GradCheckResult worst;
  for (int trial = 0; trial < n_trials; ++trial) {
    auto inst = random_grad_check_instance(kind, seed, trial);
    auto r = grad_check_instance(inst.params, inst.input, inst.target, inst.masks, eps);
    worst.components += r.components;
    if (r.max_rel_error >= worst.max_rel_error) {
      worst.max_rel_error = r.max_rel_error;
      worst.worst_tensor = r.worst_tensor;
      worst.worst_index = r.worst_index;
    }
  }
  return worst;
}

}  // namespace c2w
