#pragma once

// Gated recurrent unit with exact forward/backward passes, unidirectional
// unrolling with backpropagation through time, and the bidirectional encoder
// whose output is [forward state after the last element ; backward state after
// the first element].
//
// Cell equations (r gates the recurrent product, not the state):
//   z  = sigmoid(W_z x + U_z h + b_z)
//   r  = sigmoid(W_r x + U_r h + b_r)
//   h~ = tanh(W_h x + r * (U_h h) + b_h)
//   h' = z * h + (1 - z) * h~

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "c2w/numkernel.hpp"

namespace c2w {

struct GruParams {
  Mat w_z, w_r, w_h;  // hidden x input
  Mat u_z, u_r, u_h;  // hidden x hidden
  Vec b_z, b_r, b_h;  // hidden

  GruParams() = default;
  GruParams(std::size_t input, std::size_t hidden)
      : w_z(hidden, input), w_r(hidden, input), w_h(hidden, input),
        u_z(hidden, hidden), u_r(hidden, hidden), u_h(hidden, hidden),
        b_z(hidden), b_r(hidden), b_h(hidden) {}

  std::size_t input_size() const noexcept { return w_z.cols(); }
  std::size_t hidden_size() const noexcept { return w_z.rows(); }

  /// Throws ShapeError unless all nine tensors agree on (hidden, input).
  void validate() const {
    const std::size_t h = hidden_size(), d = input_size();
    auto bad_w = [&](const Mat& m) { return m.rows() != h || m.cols() != d; };
    auto bad_u = [&](const Mat& m) { return m.rows() != h || m.cols() != h; };
    if (bad_w(w_r) || bad_w(w_h) || bad_u(u_z) || bad_u(u_r) || bad_u(u_h) || b_z.size() != h ||
        b_r.size() != h || b_h.size() != h) {
      throw ShapeError("GruParams: inconsistent shapes (w_z " + w_z.shape_str() + ")");
    }
  }

  /// Visits (name, values, rows, cols) for each of the nine tensors.
  template <class F>
  void for_each_tensor(F&& f) {
    f("w_z", w_z.span(), w_z.rows(), w_z.cols());
    f("w_r", w_r.span(), w_r.rows(), w_r.cols());
    f("w_h", w_h.span(), w_h.rows(), w_h.cols());
    f("u_z", u_z.span(), u_z.rows(), u_z.cols());
    f("u_r", u_r.span(), u_r.rows(), u_r.cols());
    f("u_h", u_h.span(), u_h.rows(), u_h.cols());
    f("b_z", b_z.span(), b_z.size(), std::size_t{1});
    f("b_r", b_r.span(), b_r.size(), std::size_t{1});
    f("b_h", b_h.span(), b_h.size(), std::size_t{1});
  }
  template <class F>
  void for_each_tensor(F&& f) const {
    const_cast<GruParams*>(this)->for_each_tensor(
        [&](std::string_view name, std::span<double> v, std::size_t r, std::size_t c) {
          f(name, std::span<const double>(v), r, c);
        });
  }

  friend bool operator==(const GruParams&, const GruParams&) = default;
};

struct GruCellTrace {
  Vec x;
  Vec h_prev;
  Vec z, r, h_tilde, h_new;
  Vec uh_h;  // U_h * h_prev, needed to differentiate the reset gate
};

struct GruGrads {
  GruParams params;
  Vec d_x;
  Vec d_h_prev;
};

struct BiRnnParams {
  GruParams fwd;
  GruParams bwd;

  BiRnnParams() = default;
  BiRnnParams(std::size_t input, std::size_t hidden) : fwd(input, hidden), bwd(input, hidden) {}
  BiRnnParams(GruParams f, GruParams b) : fwd(std::move(f)), bwd(std::move(b)) {}

  std::size_t input_size() const noexcept { return fwd.input_size(); }
  std::size_t hidden_size() const noexcept { return fwd.hidden_size(); }
  std::size_t output_size() const noexcept { return 2 * fwd.hidden_size(); }

  void validate() const {
    fwd.validate();
    bwd.validate();
    if (fwd.input_size() != bwd.input_size() || fwd.hidden_size() != bwd.hidden_size()) {
      throw ShapeError("BiRnnParams: forward and backward directions differ in shape");
    }
  }

  friend bool operator==(const BiRnnParams&, const BiRnnParams&) = default;
};

/// Backward direction steps are stored in processing order, i.e. bwd[0]
/// consumed the last element of the sequence.
struct BiRnnTrace {
  std::vector<GruCellTrace> fwd;
  std::vector<GruCellTrace> bwd;
};

namespace detail {

inline void check_step_shapes(const GruParams& p, std::size_t x_len, std::size_t h_len,
                              const char* op) {
  if (x_len != p.input_size() || h_len != p.hidden_size()) {
    throw ShapeError(std::string(op) + ": params expect input " + std::to_string(p.input_size()) +
                     " / hidden " + std::to_string(p.hidden_size()) + ", got input " +
                     std::to_string(x_len) + " / hidden " + std::to_string(h_len));
  }
}

/// Core of gru_backward: accumulates parameter gradients into `acc` and
/// writes dL/dx into d_x (accumulating) and dL/dh_prev into d_h_prev (overwriting).
inline void gru_backward_acc(const GruParams& p, const GruCellTrace& t, const Vec& d_h_new,
                             GruParams& acc, Vec& d_x, Vec& d_h_prev) {
  const std::size_t h = p.hidden_size();
  Vec d_az(h), d_ar(h), d_ah(h), d_u(h);
  d_h_prev = Vec(h);
  for (std::size_t i = 0; i < h; ++i) {
    const double g = d_h_new[i];
    const double z = t.z[i], r = t.r[i], ht = t.h_tilde[i];
    const double d_z = g * (t.h_prev[i] - ht);
    const double d_ht = g * (1.0 - z);
    d_h_prev[i] = g * z;
    d_ah[i] = d_ht * (1.0 - ht * ht);
    d_u[i] = d_ah[i] * r;
    d_ar[i] = d_ah[i] * t.uh_h[i] * r * (1.0 - r);
    d_az[i] = d_z * z * (1.0 - z);
  }
  outer_acc(acc.w_z, d_az.data(), t.x.data());
  outer_acc(acc.w_r, d_ar.data(), t.x.data());
  outer_acc(acc.w_h, d_ah.data(), t.x.data());
  outer_acc(acc.u_z, d_az.data(), t.h_prev.data());
  outer_acc(acc.u_r, d_ar.data(), t.h_prev.data());
  outer_acc(acc.u_h, d_u.data(), t.h_prev.data());
  for (std::size_t i = 0; i < h; ++i) {
    acc.b_z[i] += d_az[i];
    acc.b_r[i] += d_ar[i];
    acc.b_h[i] += d_ah[i];
  }
  gemv_t_acc(p.w_z, d_az.data(), d_x.data());
  gemv_t_acc(p.w_r, d_ar.data(), d_x.data());
  gemv_t_acc(p.w_h, d_ah.data(), d_x.data());
  gemv_t_acc(p.u_z, d_az.data(), d_h_prev.data());
  gemv_t_acc(p.u_r, d_ar.data(), d_h_prev.data());
  gemv_t_acc(p.u_h, d_u.data(), d_h_prev.data());
}

}  // namespace detail

inline GruCellTrace gru_forward(const GruParams& p, const Vec& x, const Vec& h_prev) {
  detail::check_step_shapes(p, x.size(), h_prev.size(), "gru_forward");
  const std::size_t h = p.hidden_size();
  GruCellTrace t;
  t.x = x;
  t.h_prev = h_prev;
  t.z = p.b_z;
  t.r = p.b_r;
  Vec a_h = p.b_h;
  t.uh_h = Vec(h);
  detail::gemv_acc(p.w_z, x.data(), t.z.data());
  detail::gemv_acc(p.u_z, h_prev.data(), t.z.data());
  detail::gemv_acc(p.w_r, x.data(), t.r.data());
  detail::gemv_acc(p.u_r, h_prev.data(), t.r.data());
  detail::gemv_acc(p.w_h, x.data(), a_h.data());
  detail::gemv_acc(p.u_h, h_prev.data(), t.uh_h.data());
  t.h_tilde = Vec(h);
  t.h_new = Vec(h);
  for (std::size_t i = 0; i < h; ++i) {
    t.z[i] = detail::sigmoid(t.z[i]);
    t.r[i] = detail::sigmoid(t.r[i]);
    t.h_tilde[i] = std::tanh(a_h[i] + t.r[i] * t.uh_h[i]);
    t.h_new[i] = t.z[i] * h_prev[i] + (1.0 - t.z[i]) * t.h_tilde[i];
  }
  detail::require_finite(t.h_new.span(), "gru_forward");
  return t;
}

/// Gradients of a single step with respect to all nine parameters, the input
/// and the previous hidden state, given dL/dh_new.
inline GruGrads gru_backward(const GruParams& p, const GruCellTrace& trace, const Vec& d_h_new) {
  detail::check_step_shapes(p, trace.x.size(), trace.h_prev.size(), "gru_backward");
  if (d_h_new.size() != p.hidden_size()) throw ShapeError("gru_backward: upstream gradient length");
  GruGrads g{GruParams(p.input_size(), p.hidden_size()), Vec(p.input_size()), Vec()};
  detail::gru_backward_acc(p, trace, d_h_new, g.params, g.d_x, g.d_h_prev);
  return g;
}

/// Runs the cell over xs starting from h0.
inline std::vector<GruCellTrace> rnn_unroll(const GruParams& p, std::span<const Vec> xs,
                                            const Vec& h0) {
  if (xs.empty()) throw std::invalid_argument("rnn_unroll: empty sequence");
  std::vector<GruCellTrace> steps;
  steps.reserve(xs.size());
  const Vec* h = &h0;
  for (const Vec& x : xs) {
    steps.push_back(gru_forward(p, x, *h));
    h = &steps.back().h_new;
  }
  return steps;
}

/// Backpropagation through time from a gradient on the final hidden state.
/// Accumulates parameter gradients into `acc`; returns dL/dx for every step
/// (in step order) and, optionally, dL/dh0.
inline std::vector<Vec> rnn_backward(const GruParams& p, std::span<const GruCellTrace> steps,
                                     const Vec& d_h_last, GruParams& acc, Vec* d_h0 = nullptr) {
  if (steps.empty()) throw std::invalid_argument("rnn_backward: empty trace");
  std::vector<Vec> d_xs(steps.size(), Vec(p.input_size()));
  Vec d_h = d_h_last;
  Vec d_prev;
  for (std::size_t t = steps.size(); t-- > 0;) {
    detail::gru_backward_acc(p, steps[t], d_h, acc, d_xs[t], d_prev);
    std::swap(d_h, d_prev);
  }
  if (d_h0 != nullptr) *d_h0 = std::move(d_h);
  return d_xs;
}

/// Bidirectional encoding with zero initial states. If `trace` is non-null it
/// receives every intermediate needed by birnn_backward.
inline Vec birnn_encode(const BiRnnParams& p, std::span<const Vec> xs, BiRnnTrace* trace = nullptr) {
  if (xs.empty()) throw std::invalid_argument("birnn_encode: empty sequence");
  const Vec h0(p.hidden_size());
  auto fwd = rnn_unroll(p.fwd, xs, h0);
  std::vector<Vec> reversed(xs.rbegin(), xs.rend());
  auto bwd = rnn_unroll(p.bwd, reversed, h0);
  Vec out = concat(fwd.back().h_new, bwd.back().h_new);
  if (trace != nullptr) {
    trace->fwd = std::move(fwd);
    trace->bwd = std::move(bwd);
  }
  return out;
}

/// Backward pass of birnn_encode. Returns dL/dx per input element in the
/// original (forward) order.
inline std::vector<Vec> birnn_backward(const BiRnnParams& p, const BiRnnTrace& trace,
                                       const Vec& d_out, BiRnnParams& acc) {
  if (d_out.size() != p.output_size()) throw ShapeError("birnn_backward: upstream gradient length");
  if (trace.fwd.size() != trace.bwd.size() || trace.fwd.empty()) {
    throw std::invalid_argument("birnn_backward: malformed trace");
  }
  auto [d_f, d_b] = split(d_out, p.hidden_size());
  auto d_xs = rnn_backward(p.fwd, trace.fwd, d_f, acc.fwd);
  auto d_xs_rev = rnn_backward(p.bwd, trace.bwd, d_b, acc.bwd);
  const std::size_t n = d_xs.size();
  for (std::size_t t = 0; t < n; ++t) {
    Vec& dst = d_xs[t];
    const Vec& src = d_xs_rev[n - 1 - t];
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return d_xs;
}

}  // namespace c2w
