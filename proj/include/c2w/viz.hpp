#pragma once

// Two-component PCA of sentence embeddings and scatter export (CSV, SVG) for
// contrasting high- and low-scoring users.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2w/data.hpp"
#include "c2w/numkernel.hpp"
#include "c2w/random.hpp"

namespace c2w {

struct PcaModel {
  Vec mean;
  Mat components;  // n_components x d, orthonormal rows
  std::vector<double> explained_variance;
  bool rank_deficient = false;
};

struct PcaOptions {
  double tolerance = 1e-10;
  int max_iterations = 10000;
};

namespace detail {

/// Flips v so that its largest-magnitude entry (first on ties) is positive.
inline void fix_sign(std::span<double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) {
    for (double& x : v) x = -x;
  }
}

/// Removes the projections of v onto the first `n` rows of `basis`. Runs twice
/// to keep orthogonality at round-off level.
inline void orthogonalize(std::span<double> v, const Mat& basis, std::size_t n) {
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < n; ++j) {
      const auto b = basis.row(j);
      double p = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) p += v[i] * b[i];
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= p * b[i];
    }
  }
}

inline double normalize(std::span<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  const double n = std::sqrt(s);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
  return n;
}

inline double rayleigh(const Mat& c, std::span<const double> v) {
  Vec cv(c.rows());
  gemv_acc(c, v.data(), cv.data());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * cv[i];
  return s;
}

}  // namespace detail

/// Sample covariance (1/(N-1)) of the rows of `x` about `mean`.
inline Mat covariance(std::span<const Vec> x, const Vec& mean) {
  const std::size_t d = mean.size();
  Mat c(d, d);
  Vec centered(d);
  for (const auto& row : x) {
    for (std::size_t i = 0; i < d; ++i) centered[i] = row[i] - mean[i];
    detail::outer_acc(c, centered.data(), centered.data());
  }
  const double scale = 1.0 / static_cast<double>(x.size() - 1);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) c(i, j) *= scale;
  }
  return c;
}

/// Leading principal components by power iteration with deflation.
///
/// Each component iterates on the covariance deflated by the components found
/// so far; iterates are re-orthogonalized against them every step. Components
/// whose variance falls below 1e-12 of the leading one are reported with zero
/// variance, an arbitrary orthonormal completion, and `rank_deficient` set.
inline PcaModel pca_fit(std::span<const Vec> x, std::size_t n_components = 2,
                        const PcaOptions& opt = {}) {
  if (x.size() < 2) throw std::invalid_argument("pca_fit: need at least 2 samples");
  const std::size_t d = x.front().size();
  if (d < n_components) {
    throw std::invalid_argument("pca_fit: dimension " + std::to_string(d) + " is below " +
                                std::to_string(n_components) + " components");
  }
  PcaModel m;
  m.mean = Vec(d);
  for (const auto& row : x) {
    if (row.size() != d) throw ShapeError("pca_fit: ragged input rows");
    for (std::size_t i = 0; i < d; ++i) m.mean[i] += row[i];
  }
  for (std::size_t i = 0; i < d; ++i) m.mean[i] /= static_cast<double>(x.size());

  const Mat cov = covariance(x, m.mean);
  Mat a = cov;
  m.components = Mat(n_components, d);
  double lead = 0.0;
  Vec v(d), w(d);
  for (std::size_t k = 0; k < n_components; ++k) {
    SplitMix64 rng(0x9e3779b97f4a7c15ULL + k);
    for (std::size_t i = 0; i < d; ++i) v[i] = rng.uniform(-1.0, 1.0);
    detail::orthogonalize(v.span(), m.components, k);
    detail::normalize(v.span());
    bool degenerate = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
      w.fill(0.0);
      detail::gemv_acc(a, v.data(), w.data());
      detail::orthogonalize(w.span(), m.components, k);
      if (detail::normalize(w.span()) == 0.0) {
        degenerate = true;
        break;
      }
      double diff = 0.0;
      for (std::size_t i = 0; i < d; ++i) diff = std::max(diff, std::abs(w[i] - v[i]));
      std::swap(v, w);
      if (diff < opt.tolerance) break;
    }
    double lambda = degenerate ? 0.0 : detail::rayleigh(cov, v.span());
    if (k == 0) lead = std::max(lambda, 0.0);
    if (degenerate || lambda <= 1e-12 * lead) {
      lambda = 0.0;
      m.rank_deficient = true;
      // Orthonormal completion: the standard basis vector with the largest
      // residual after projecting out the components found so far.
      double best = -1.0;
      for (std::size_t j = 0; j < d; ++j) {
        Vec e(d);
        e[j] = 1.0;
        detail::orthogonalize(e.span(), m.components, k);
        const double n = std::sqrt(dot(e, e));
        if (n > best + 1e-12) {
          best = n;
          v = e;
        }
      }
      detail::normalize(v.span());
    }
    detail::fix_sign(v.span());
    auto row = m.components.row(k);
    std::copy(v.span().begin(), v.span().end(), row.begin());
    m.explained_variance.push_back(lambda);
    // Deflate.
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) a(i, j) -= lambda * v[i] * v[j];
    }
  }
  return m;
}

inline Vec pca_project(const PcaModel& m, const Vec& x) {
  if (x.size() != m.mean.size()) throw ShapeError("pca_project: dimension mismatch");
  Vec c = x - m.mean;
  return matvec(m.components, c);
}

// ---------------------------------------------------------------------------
// Extreme-user selection

enum class ScatterLabel { high, low };

inline std::string_view scatter_label_name(ScatterLabel l) {
  return l == ScatterLabel::high ? "HIGH" : "LOW";
}

struct Extremes {
  std::vector<std::size_t> high;  // tweet indices, ascending
  std::vector<std::size_t> low;
};

/// Samples `n_per_side` tweets from the users in the top and bottom
/// `tail_quantile` fraction (at least one user each) of the trait scores.
/// Users are ranked with a stable sort, so ties resolve by first appearance.
inline Extremes select_extremes(std::span<const Tweet> tweets, Trait trait, std::size_t n_per_side,
                                std::uint64_t seed, double tail_quantile = 0.25) {
  if (!(tail_quantile > 0.0 && tail_quantile <= 0.5)) {
    throw std::invalid_argument("select_extremes: tail quantile must be in (0, 0.5]");
  }
  std::vector<std::string> users;
  std::vector<double> score;
  std::map<std::string, std::size_t> index;
  for (const auto& t : tweets) {
    if (index.try_emplace(t.user_id, users.size()).second) {
      users.push_back(t.user_id);
      score.push_back(t.traits.get(trait));
    }
  }
  const std::size_t u = users.size();
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(tail_quantile * static_cast<double>(u))));
  if (u < 2 || 2 * m > u) {
    throw std::invalid_argument("select_extremes: " + std::to_string(u) +
                                " users are too few for disjoint high and low tails");
  }
  std::vector<std::size_t> order(u);
  for (std::size_t i = 0; i < u; ++i) order[i] = i;
  std::vector<std::size_t> desc = order, asc = order;
  std::stable_sort(desc.begin(), desc.end(), [&](auto a, auto b) { return score[a] > score[b]; });
  std::stable_sort(asc.begin(), asc.end(), [&](auto a, auto b) { return score[a] < score[b]; });
  std::vector<int> side(u, 0);
  for (std::size_t i = 0; i < m; ++i) side[desc[i]] = 1;
  for (std::size_t i = 0; i < m; ++i) {
    if (side[asc[i]] == 1) {
      throw std::invalid_argument("select_extremes: high and low tails overlap");
    }
    side[asc[i]] = -1;
  }
  std::vector<std::size_t> high_pool, low_pool;
  for (std::size_t i = 0; i < tweets.size(); ++i) {
    const int s = side[index.at(tweets[i].user_id)];
    if (s == 1) high_pool.push_back(i);
    if (s == -1) low_pool.push_back(i);
  }
  SplitMix64 rng(seed);
  auto sample = [&](std::vector<std::size_t>& pool, const char* what) {
    if (pool.size() < n_per_side) {
      throw std::invalid_argument(std::string("select_extremes: only ") +
                                  std::to_string(pool.size()) + " " + what + " tweets for " +
                                  std::to_string(n_per_side) + " requested");
    }
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < n_per_side; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(n_per_side);
    std::sort(pool.begin(), pool.end());
    return pool;
  };
  Extremes ex;
  ex.high = sample(high_pool, "high-tail");
  ex.low = sample(low_pool, "low-tail");
  return ex;
}

// ---------------------------------------------------------------------------
// Scatter export

struct ScatterPoint {
  double pc1 = 0.0;
  double pc2 = 0.0;
  ScatterLabel label = ScatterLabel::high;
  std::string text;
};

enum class ScatterFormat { csv, svg };

inline ScatterFormat parse_scatter_format(std::string_view s) {
  if (s == "csv") return ScatterFormat::csv;
  if (s == "svg") return ScatterFormat::svg;
  throw std::invalid_argument("unknown format '" + std::string(s) + "'");
}

namespace detail {

inline std::string csv_quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// Escapes backslash, tab, newline and carriage return as in the TSV format.
inline std::string tsv_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default:
        // Control characters other than tab/newline are not legal XML 1.0.
        if (static_cast<unsigned char>(c) < 0x20 && c != '\t' && c != '\n' && c != '\r') {
          out += ' ';
        } else {
          out += c;
        }
    }
  }
  return out;
}

inline std::string fmt3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  // Avoid "-0.000" so output does not depend on the sign of tiny values.
  if (std::string_view(buf) == "-0.000") return "0.000";
  return buf;
}

}  // namespace detail

inline std::string scatter_csv(std::span<const ScatterPoint> pts) {
  std::string out = "pc1,pc2,label,text\n";
  for (const auto& p : pts) {
    out += format_double(p.pc1) + "," + format_double(p.pc2) + "," +
           std::string(scatter_label_name(p.label)) + "," +
           detail::csv_quote(detail::tsv_escape(p.text)) + "\n";
  }
  return out;
}

inline std::string scatter_svg(std::span<const ScatterPoint> pts, std::string_view title = "") {
  constexpr double W = 800, H = 600, margin = 50;
  double x0 = -1, x1 = 1, y0 = -1, y1 = 1;
  if (!pts.empty()) {
    x0 = x1 = pts.front().pc1;
    y0 = y1 = pts.front().pc2;
    for (const auto& p : pts) {
      x0 = std::min(x0, p.pc1);
      x1 = std::max(x1, p.pc1);
      y0 = std::min(y0, p.pc2);
      y1 = std::max(y1, p.pc2);
    }
  }
  auto widen = [](double& lo, double& hi) {
    if (hi - lo < 1e-12) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
  };
  widen(x0, x1);
  widen(y0, y1);
  auto sx = [&](double x) { return margin + (x - x0) / (x1 - x0) * (W - 2 * margin); };
  auto sy = [&](double y) { return H - margin - (y - y0) / (y1 - y0) * (H - 2 * margin); };
  // Axes sit at zero when it is in range, otherwise on the frame edge.
  const double ax_y = sy(std::clamp(0.0, y0, y1));
  const double ax_x = sx(std::clamp(0.0, x0, x1));

  using detail::fmt3;
  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"600\" "
         "viewBox=\"0 0 800 600\">\n";
  if (!title.empty()) out += "<title>" + detail::xml_escape(title) + "</title>\n";
  out += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"#ffffff\"/>\n";
  out += "<g stroke=\"#888888\" stroke-width=\"1\">\n";
  out += "<line x1=\"" + fmt3(margin) + "\" y1=\"" + fmt3(ax_y) + "\" x2=\"" + fmt3(W - margin) +
         "\" y2=\"" + fmt3(ax_y) + "\"/>\n";
  out += "<line x1=\"" + fmt3(ax_x) + "\" y1=\"" + fmt3(margin) + "\" x2=\"" + fmt3(ax_x) +
         "\" y2=\"" + fmt3(H - margin) + "\"/>\n";
  out += "</g>\n";
  out += "<text x=\"" + fmt3(W - margin) + "\" y=\"" + fmt3(H - 15) +
         "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">PC1</text>\n";
  out += "<text x=\"15\" y=\"" + fmt3(margin - 10) +
         "\" font-family=\"sans-serif\" font-size=\"12\">PC2</text>\n";
  // Legend swatches are rects so that circles count exactly the data points.
  out += "<rect x=\"660\" y=\"15\" width=\"10\" height=\"10\" fill=\"#d62728\"/>\n";
  out += "<text x=\"676\" y=\"25\" font-family=\"sans-serif\" font-size=\"12\">HIGH</text>\n";
  out += "<rect x=\"720\" y=\"15\" width=\"10\" height=\"10\" fill=\"#1f77b4\"/>\n";
  out += "<text x=\"736\" y=\"25\" font-family=\"sans-serif\" font-size=\"12\">LOW</text>\n";
  for (const auto& p : pts) {
    const char* color = p.label == ScatterLabel::high ? "#d62728" : "#1f77b4";
    out += "<circle cx=\"" + fmt3(sx(p.pc1)) + "\" cy=\"" + fmt3(sy(p.pc2)) +
           "\" r=\"4\" fill=\"" + color + "\" fill-opacity=\"0.7\"><title>" +
           detail::xml_escape(p.text) + "</title></circle>\n";
  }
  out += "</svg>\n";
  return out;
}

inline void export_scatter(std::span<const ScatterPoint> pts, const std::string& path,
                           ScatterFormat format, std::string_view title = "") {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << (format == ScatterFormat::csv ? scatter_csv(pts) : scatter_svg(pts, title));
  if (!f) throw std::runtime_error("write to '" + path + "' failed");
}

/// Embeds the selected tweets, fits PCA on them and returns labelled points.
template <class Embed>
std::vector<ScatterPoint> build_scatter(std::span<const Tweet> tweets, const Extremes& ex,
                                        Embed&& embed, PcaModel* fitted = nullptr) {
  std::vector<Vec> rows;
  std::vector<ScatterPoint> pts;
  auto add = [&](const std::vector<std::size_t>& idx, ScatterLabel label) {
    for (std::size_t i : idx) {
      rows.push_back(embed(tweets[i]));
      pts.push_back({0.0, 0.0, label, encode_utf8(tweets[i].text)});
    }
  };
  add(ex.high, ScatterLabel::high);
  add(ex.low, ScatterLabel::low);
  PcaModel m = pca_fit(rows, 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Vec z = pca_project(m, rows[i]);
    pts[i].pc1 = z[0];
    pts[i].pc2 = z[1];
  }
  if (fitted) *fitted = std::move(m);
  return pts;
}

}  // namespace c2w
