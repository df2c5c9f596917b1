#pragma once

// Dense double-precision vectors and matrices plus the activation functions
// used by the recurrent cells and the regression head.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace c2w {

/// Raised when operand shapes do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation produces NaN or Inf.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class Vec {
 public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vec(std::initializer_list<double> init) : data_(init) {}
  explicit Vec(std::vector<double> data) : data_(std::move(data)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Vec&, const Vec&) = default;

 private:
  std::vector<double> data_;
};

/// Row-major dense matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Mat(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ShapeError("Mat: data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
    }
  }
  Mat(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("Mat: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

namespace detail {

inline void require_finite(std::span<const double> xs, const char* op) {
  for (double x : xs) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite result");
  }
}

/// Dot product with four interleaved partial sums. Summation order is fixed,
/// so results are reproducible bit-for-bit.
inline double dot(const double* a, const double* b, std::size_t n) noexcept {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// out += m * v
inline void gemv_acc(const Mat& m, const double* v, double* out) noexcept {
  const std::size_t cols = m.cols();
  const double* row = m.data();
  for (std::size_t r = 0; r < m.rows(); ++r, row += cols) out[r] += dot(row, v, cols);
}

// out += m^T * v
inline void gemv_t_acc(const Mat& m, const double* v, double* out) noexcept {
  const std::size_t cols = m.cols();
  const double* row = m.data();
  for (std::size_t r = 0; r < m.rows(); ++r, row += cols) {
    const double s = v[r];
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) out[c] += s * row[c];
  }
}

// m += a * b^T
inline void outer_acc(Mat& m, const double* a, const double* b) noexcept {
  const std::size_t cols = m.cols();
  double* row = m.data();
  for (std::size_t r = 0; r < m.rows(); ++r, row += cols) {
    const double s = a[r];
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) row[c] += s * b[c];
  }
}

inline double sigmoid(double x) noexcept {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

inline Vec matvec(const Mat& m, const Vec& v) {
  if (v.size() != m.cols()) {
    throw ShapeError("matvec: matrix " + m.shape_str() + " times vector of length " +
                     std::to_string(v.size()));
  }
  Vec out(m.rows());
  detail::gemv_acc(m, v.data(), out.data());
  detail::require_finite(out.span(), "matvec");
  return out;
}

/// m^T * v
inline Vec matvec_t(const Mat& m, const Vec& v) {
  if (v.size() != m.rows()) {
    throw ShapeError("matvec_t: transposed matrix " + m.shape_str() + " times vector of length " +
                     std::to_string(v.size()));
  }
  Vec out(m.cols());
  detail::gemv_t_acc(m, v.data(), out.data());
  detail::require_finite(out.span(), "matvec_t");
  return out;
}

inline Vec sigmoid(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = detail::sigmoid(v[i]);
  detail::require_finite(out.span(), "sigmoid");
  return out;
}

inline Vec tanh_v(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::tanh(v[i]);
  detail::require_finite(out.span(), "tanh");
  return out;
}

inline Vec relu_v(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] > 0.0 ? v[i] : 0.0;
  detail::require_finite(out.span(), "relu");
  return out;
}

inline Vec hadamard(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw ShapeError("hadamard: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  detail::require_finite(out.span(), "hadamard");
  return out;
}

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  std::copy(a.begin(), a.end(), out.begin());
  std::copy(b.begin(), b.end(), out.begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

inline Vec operator+(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw ShapeError("add: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  detail::require_finite(out.span(), "add");
  return out;
}

inline Vec operator-(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw ShapeError("sub: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  detail::require_finite(out.span(), "sub");
  return out;
}

inline Vec operator*(double s, const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = s * v[i];
  detail::require_finite(out.span(), "scale");
  return out;
}

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()));
  }
  return detail::dot(a.data(), b.data(), a.size());
}

inline double norm2(const Vec& v) { return std::sqrt(dot(v, v)); }

/// Splits v into [0, at) and [at, v.size()).
inline std::pair<Vec, Vec> split(const Vec& v, std::size_t at) {
  if (at > v.size()) throw ShapeError("split: offset past end");
  Vec a(at), b(v.size() - at);
  std::copy(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(at), a.begin());
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(at), v.end(), b.begin());
  return {std::move(a), std::move(b)};
}

}  // namespace c2w
