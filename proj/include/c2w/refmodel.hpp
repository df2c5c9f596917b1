#pragma once

// Extended-precision reference forward pass, written independently of the
// double-precision kernels. The gradient checker differentiates this one
// numerically: with long double the central-difference roundoff drops by about
// three orders of magnitude, so components whose true gradient sits near the
// 1e-8 denominator floor are no longer dominated by noise.

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "c2w/model.hpp"

namespace c2w::ref {

using real = long double;

struct Tensor {
  std::size_t rows = 0, cols = 0;
  std::vector<real> v;
  real operator()(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
};

/// Copy of every trainable tensor, in ModelParams::for_each_tensor order.
struct Params {
  ModelKind kind = ModelKind::c2w2s4pt;
  std::vector<Tensor> t;

  explicit Params(const ModelParams& p) : kind(p.kind) {
    p.for_each_tensor([&](std::string_view, std::span<const double> v, std::size_t r, std::size_t c) {
      t.push_back({r, c, std::vector<real>(v.begin(), v.end())});
    });
  }
};

using LVec = std::vector<real>;

namespace detail {

// Tensor indices: embedding, then 9 per GRU direction, then 4 for the head.
constexpr std::size_t kGruTensors = 9;

inline real sigm(real x) { return 1.0L / (1.0L + std::exp(-x)); }

inline LVec affine(const Tensor& w, const LVec& x) {
  LVec out(w.rows, 0.0L);
  for (std::size_t r = 0; r < w.rows; ++r) {
    for (std::size_t c = 0; c < w.cols; ++c) out[r] += w(r, c) * x[c];
  }
  return out;
}

/// One GRU direction over xs starting from h = 0; returns the final state.
inline LVec run_gru(const std::vector<Tensor>& t, std::size_t base, const std::vector<LVec>& xs) {
  const Tensor &wz = t[base], &wr = t[base + 1], &wh = t[base + 2];
  const Tensor &uz = t[base + 3], &ur = t[base + 4], &uh = t[base + 5];
  const Tensor &bz = t[base + 6], &br = t[base + 7], &bh = t[base + 8];
  LVec h(wz.rows, 0.0L);
  for (const auto& x : xs) {
    const LVec ax_z = affine(wz, x), ax_r = affine(wr, x), ax_h = affine(wh, x);
    const LVec ah_z = affine(uz, h), ah_r = affine(ur, h), ah_h = affine(uh, h);
    LVec next(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      const real z = sigm(ax_z[i] + ah_z[i] + bz.v[i]);
      const real r = sigm(ax_r[i] + ah_r[i] + br.v[i]);
      const real cand = std::tanh(ax_h[i] + r * ah_h[i] + bh.v[i]);
      next[i] = z * h[i] + (1.0L - z) * cand;
    }
    h = std::move(next);
  }
  return h;
}

inline LVec run_bi(const std::vector<Tensor>& t, std::size_t base, const std::vector<LVec>& xs) {
  LVec out = run_gru(t, base, xs);
  const std::vector<LVec> rev(xs.rbegin(), xs.rend());
  const LVec b = run_gru(t, base + kGruTensors, rev);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline LVec column(const Tensor& e, std::size_t id) {
  if (id >= e.cols) throw std::out_of_range("reference forward: id outside embedding table");
  LVec out(e.rows);
  for (std::size_t r = 0; r < e.rows; ++r) out[r] = e(r, id);
  return out;
}

inline void mask(LVec& v, const Vec& m) {
  if (m.empty()) return;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= static_cast<real>(m[i]);
}

}  // namespace detail

/// Network output for `input` under fixed dropout `masks`.
inline real forward(const Params& p, const EncodedInput& input, const DropoutMasks& masks) {
  using namespace detail;
  const auto& t = p.t;
  const Tensor& emb = t[0];
  LVec e_s;
  std::size_t head = 0;
  if (p.kind == ModelKind::c2w2s4pt) {
    std::vector<LVec> words;
    for (std::size_t w = 0; w < input.words.size(); ++w) {
      std::vector<LVec> chars;
      for (std::size_t id : input.words[w]) chars.push_back(column(emb, id));
      LVec e_w = run_bi(t, 1, chars);
      if (!masks.words.empty()) mask(e_w, masks.words[w]);
      words.push_back(std::move(e_w));
    }
    e_s = run_bi(t, 1 + 2 * kGruTensors, words);
    head = 1 + 4 * kGruTensors;
  } else {
    std::vector<LVec> seq;
    for (std::size_t id : input.sequence) seq.push_back(column(emb, id));
    e_s = run_bi(t, 1, seq);
    head = 1 + 2 * kGruTensors;
  }
  mask(e_s, masks.sentence);
  const Tensor &w_eh = t[head], &b_h = t[head + 1], &w_hy = t[head + 2], &b_y = t[head + 3];
  LVec hid = affine(w_eh, e_s);
  real y = b_y.v[0];
  for (std::size_t i = 0; i < hid.size(); ++i) {
    const real a = std::max(hid[i] + b_h.v[i], 0.0L);
    y += w_hy.v[i] * a;
  }
  return y;
}

}  // namespace c2w::ref
