#pragma once

// RMSE metrics at tweet and user level, the average baseline, and the k-fold
// cross-validation driver.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "c2w/data.hpp"
#include "c2w/train.hpp"

namespace c2w {

struct TweetPrediction {
  std::size_t index = 0;  // position in the evaluated corpus
  std::string user_id;
  Trait trait = Trait::ext;
  double y_hat = 0.0;
  double y = 0.0;
};

struct UserPrediction {
  std::string user_id;
  double y_hat = 0.0;  // mean of the user's tweet predictions
  double y = 0.0;
  std::size_t tweets = 0;
};

inline double rmse_tweet(std::span<const TweetPrediction> preds) {
  if (preds.empty()) throw std::invalid_argument("rmse_tweet: no predictions");
  double s = 0.0;
  for (const auto& p : preds) {
    const double d = p.y - p.y_hat;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(preds.size()));
}

/// Groups tweet predictions by user (first-appearance order). All tweets of a
/// user must carry the same label.
inline std::vector<UserPrediction> aggregate_user(std::span<const TweetPrediction> preds) {
  std::vector<UserPrediction> users;
  std::map<std::string, std::size_t> index;
  std::vector<double> sums;
  for (const auto& p : preds) {
    auto [it, inserted] = index.try_emplace(p.user_id, users.size());
    if (inserted) {
      users.push_back({p.user_id, 0.0, p.y, 0});
      sums.push_back(0.0);
    } else if (users[it->second].y != p.y) {
      throw std::invalid_argument("aggregate_user: user '" + p.user_id +
                                  "' has inconsistent labels across tweets");
    }
    sums[it->second] += p.y_hat;
    ++users[it->second].tweets;
  }
  for (std::size_t u = 0; u < users.size(); ++u) {
    users[u].y_hat = sums[u] / static_cast<double>(users[u].tweets);
  }
  return users;
}

inline double rmse_user(std::span<const UserPrediction> users) {
  if (users.empty()) throw std::invalid_argument("rmse_user: no users");
  double s = 0.0;
  for (const auto& u : users) {
    const double d = u.y - u.y_hat;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(users.size()));
}

struct AverageBaseline {
  double mean = 0.0;
  double predict() const noexcept { return mean; }
};

inline AverageBaseline average_baseline_fit(std::span<const double> train_scores) {
  if (train_scores.empty()) throw std::invalid_argument("average_baseline_fit: no scores");
  double s = 0.0;
  for (double x : train_scores) s += x;
  return {s / static_cast<double>(train_scores.size())};
}

/// One score per distinct user, first-appearance order.
inline std::vector<double> user_scores(std::span<const Tweet> tweets, Trait trait) {
  std::vector<double> out;
  std::map<std::string, bool> seen;
  for (const auto& t : tweets) {
    if (!seen[t.user_id]) {
      seen[t.user_id] = true;
      out.push_back(t.traits.get(trait));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation

struct CvReport {
  ModelKind kind = ModelKind::average;
  Trait trait = Trait::ext;
  int k = 0;
  FoldLevel level = FoldLevel::tweet;
  std::vector<double> fold_rmse;
  std::vector<std::size_t> fold_count;  // tweets (tweet level) or users (user level)
  double pooled_rmse = 0.0;             // over the union of held-out predictions
  double mean_fold_rmse = 0.0;
  std::uint64_t config_fingerprint = 0;
  std::uint64_t seed = 0;
  std::vector<TweetPrediction> predictions;
};

struct CvOptions {
  unsigned threads = 1;
  /// Called after each fold is trained, before prediction. Test hook.
  std::function<void(int fold, std::span<const std::size_t> train,
                     std::span<const std::size_t> test, const TrainedModel&)>
      observer;
};

inline std::string_view fold_level_name(FoldLevel l) { return l == FoldLevel::user ? "user" : "tweet"; }

inline FoldLevel parse_fold_level(std::string_view s) {
  if (s == "tweet") return FoldLevel::tweet;
  if (s == "user") return FoldLevel::user;
  throw std::invalid_argument("unknown level '" + std::string(s) + "'");
}

/// Training seed of fold `fold`, derived from the run seed.
inline std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  return derive_seed(seed, 1000 + static_cast<std::uint64_t>(fold));
}

/// k-fold cross-validation. The fold plan is stratified by user at tweet
/// level and partitions users at user level. Each fold builds its vocabulary
/// (or baseline mean) from its training folds only.
inline CvReport run_cv(ModelKind kind, std::span<const Tweet> corpus, Trait trait, int k,
                       FoldLevel level, const TrainConfig& cfg, std::uint64_t seed,
                       const CvOptions& opts = {}) {
  const FoldPlan plan = kfold_split(corpus, k, level, seed);
  CvReport rep;
  rep.kind = kind;
  rep.trait = trait;
  rep.k = k;
  rep.level = level;
  rep.seed = seed;
  rep.config_fingerprint = kind == ModelKind::average ? 0 : config_fingerprint(cfg);
  for (int fold = 0; fold < k; ++fold) {
    const auto train_idx = plan.train_indices(fold);
    const auto test_idx = plan.test_indices(fold);
    std::vector<Tweet> train_set;
    train_set.reserve(train_idx.size());
    for (std::size_t i : train_idx) train_set.push_back(corpus[i]);
    TrainedModel model;
    if (kind == ModelKind::average) {
      std::vector<double> scores;
      if (level == FoldLevel::user) {
        scores = user_scores(train_set, trait);
      } else {
        for (const auto& t : train_set) scores.push_back(t.traits.get(trait));
      }
      model.kind = ModelKind::average;
      model.trait = trait;
      model.config = cfg;
      model.average = average_baseline_fit(scores).mean;
    } else {
      TrainConfig fold_cfg = cfg;
      fold_cfg.seed = fold_seed(seed, fold);
      TrainOptions topts;
      topts.threads = opts.threads;
      model = train_model(kind, train_set, trait, fold_cfg, topts).model;
    }
    if (opts.observer) opts.observer(fold, train_idx, test_idx, model);
    std::vector<TweetPrediction> fold_preds;
    for (std::size_t i : test_idx) {
      const Tweet& t = corpus[i];
      fold_preds.push_back({i, t.user_id, trait, model.predict(t), t.traits.get(trait)});
    }
    if (level == FoldLevel::user) {
      const auto users = aggregate_user(fold_preds);
      rep.fold_rmse.push_back(rmse_user(users));
      rep.fold_count.push_back(users.size());
    } else {
      rep.fold_rmse.push_back(rmse_tweet(fold_preds));
      rep.fold_count.push_back(fold_preds.size());
    }
    rep.predictions.insert(rep.predictions.end(), fold_preds.begin(), fold_preds.end());
  }
  if (level == FoldLevel::user) {
    rep.pooled_rmse = rmse_user(aggregate_user(rep.predictions));
  } else {
    rep.pooled_rmse = rmse_tweet(rep.predictions);
  }
  double s = 0.0;
  for (double r : rep.fold_rmse) s += r;
  rep.mean_fold_rmse = s / static_cast<double>(rep.fold_rmse.size());
  return rep;
}

// ---------------------------------------------------------------------------
// Report formatting

/// Table with one row per (model, k, level) and one column per trait, in the
/// EXT/STA/AGR/CON/OPN layout. Cells hold the pooled RMSE, or the mean of the
/// per-fold values when `pooled` is false.
inline std::string format_cv_table(std::span<const CvReport> reports, bool pooled = true) {
  struct Row {
    std::string label;
    std::array<std::string, 5> cells{"-", "-", "-", "-", "-"};
  };
  std::vector<Row> rows;
  for (const auto& r : reports) {
    const std::string label = std::string(model_kind_name(r.kind)) + " k=" + std::to_string(r.k) +
                              " " + std::string(fold_level_name(r.level));
    auto it = std::find_if(rows.begin(), rows.end(), [&](const Row& x) { return x.label == label; });
    if (it == rows.end()) {
      rows.push_back({label, {}});
      rows.back().cells.fill("-");
      it = rows.end() - 1;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", pooled ? r.pooled_rmse : r.mean_fold_rmse);
    it->cells[static_cast<std::size_t>(r.trait)] = buf;
  }
  std::size_t w = 5;
  for (const auto& r : rows) w = std::max(w, r.label.size());
  std::string out;
  auto pad = [](std::string s, std::size_t n) {
    if (s.size() < n) s.append(n - s.size(), ' ');
    return s;
  };
  out += pad("Model", w) + " |   EXT     STA     AGR     CON     OPN\n";
  out += std::string(w, '-') + "-+" + std::string(40, '-') + "\n";
  for (const auto& r : rows) {
    out += pad(r.label, w) + " |";
    for (const auto& c : r.cells) out += " " + pad(c, 7);
    out += "\n";
  }
  return out;
}

/// CSV rows `model,trait,k,level,fold,rmse`; the pooled value uses fold=-1.
inline std::string format_cv_csv(std::span<const CvReport> reports) {
  std::string out = "model,trait,k,level,fold,rmse\n";
  for (const auto& r : reports) {
    const std::string prefix = std::string(model_kind_name(r.kind)) + "," +
                               std::string(trait_name(r.trait)) + "," + std::to_string(r.k) + "," +
                               std::string(fold_level_name(r.level)) + ",";
    for (std::size_t f = 0; f < r.fold_rmse.size(); ++f) {
      out += prefix + std::to_string(f) + "," + format_double(r.fold_rmse[f]) + "\n";
    }
    out += prefix + "-1," + format_double(r.pooled_rmse) + "\n";
  }
  return out;
}

}  // namespace c2w
