#pragma once

// Tweet preprocessing and corpus handling: entity normalization, rule-based
// tokenization, the TSV dataset format, cross-validation fold plans and the
// synthetic fixture generator.

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "c2w/random.hpp"
#include "c2w/utf8.hpp"

namespace c2w {

// ---------------------------------------------------------------------------
// Traits and records

enum class Trait { ext, sta, agr, con, opn };

inline constexpr std::array<Trait, 5> kAllTraits{Trait::ext, Trait::sta, Trait::agr, Trait::con,
                                                 Trait::opn};

inline std::string_view trait_name(Trait t) {
  switch (t) {
    case Trait::ext: return "ext";
    case Trait::sta: return "sta";
    case Trait::agr: return "agr";
    case Trait::con: return "con";
    case Trait::opn: return "opn";
  }
  return "?";
}

inline Trait parse_trait(std::string_view s) {
  for (Trait t : kAllTraits) {
    if (trait_name(t) == s) return t;
  }
  throw std::invalid_argument("unknown trait '" + std::string(s) + "'");
}

struct TraitScores {
  double ext = 0, sta = 0, agr = 0, con = 0, opn = 0;

  double get(Trait t) const {
    switch (t) {
      case Trait::ext: return ext;
      case Trait::sta: return sta;
      case Trait::agr: return agr;
      case Trait::con: return con;
      case Trait::opn: return opn;
    }
    return 0;
  }

  friend bool operator==(const TraitScores&, const TraitScores&) = default;
};

inline constexpr double kMinScore = -0.5;
inline constexpr double kMaxScore = 0.5;

struct RawRecord {
  std::string user_id;
  std::string text;
  TraitScores traits;

  friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

/// A record after normalization and tokenization.
struct Tweet {
  std::string user_id;
  std::u32string text;  // normalized, length-capped
  std::vector<std::u32string> tokens;
  TraitScores traits;
  std::size_t record_index = 0;  // position in the source record list
};

inline constexpr std::size_t kMaxTweetChars = 512;
inline constexpr std::size_t kMaxWordChars = 64;

// ---------------------------------------------------------------------------
// Character classes

inline bool is_space(char32_t c) {
  switch (c) {
    case U'\t': case U'\n': case U'\v': case U'\f': case U'\r': case U' ':
    case 0x1C: case 0x1D: case 0x1E: case 0x1F: case 0x85: case 0xA0:
    case 0x1680: case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

/// Username / URL-boundary characters: [A-Za-z0-9_].
inline bool is_ascii_word(char32_t c) {
  return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9') ||
         c == U'_';
}

/// Letters, numbers and combining marks. Everything else that is not
/// whitespace counts as punctuation for tokenization.
inline bool is_word_char(char32_t c) {
  const auto mask = U_GET_GC_MASK(static_cast<UChar32>(c));
  return (mask & (U_GC_L_MASK | U_GC_N_MASK | U_GC_M_MASK)) != 0;
}

inline bool is_punct_char(char32_t c) { return !is_space(c) && !is_word_char(c); }

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

inline std::string nfc(std::string_view utf8) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<std::int32_t>(utf8.size())));
  icu::UnicodeString dst = norm->normalize(src, status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalization failed");
  std::string out;
  dst.toUTF8String(out);
  return out;
}

inline bool starts_with_ci(std::u32string_view s, std::size_t at, std::u32string_view prefix) {
  if (s.size() - at < prefix.size()) return false;
  for (std::size_t k = 0; k < prefix.size(); ++k) {
    char32_t c = s[at + k];
    if (c >= U'A' && c <= U'Z') c = c - U'A' + U'a';
    if (c != prefix[k]) return false;
  }
  return true;
}

// URL: (http:// | https:// | www.) followed by one or more non-space
// characters, not preceded by [A-Za-z0-9_]. Matches are maximal.
inline std::u32string replace_urls(std::u32string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool boundary = out.empty() || !is_ascii_word(out.back());
    std::size_t scheme = 0;
    if (boundary) {
      if (starts_with_ci(s, i, U"https://")) scheme = 8;
      else if (starts_with_ci(s, i, U"http://")) scheme = 7;
      else if (starts_with_ci(s, i, U"www.")) scheme = 4;
    }
    if (scheme != 0 && i + scheme < s.size() && !is_space(s[i + scheme])) {
      std::size_t j = i + scheme;
      while (j < s.size() && !is_space(s[j])) ++j;
      out.push_back(U'^');
      i = j;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

// Mention: '@' followed by one or more [A-Za-z0-9_], not preceded by
// [A-Za-z0-9_].
inline std::u32string replace_mentions(std::u32string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const bool boundary = out.empty() || !is_ascii_word(out.back());
    if (boundary && s[i] == U'@' && i + 1 < s.size() && is_ascii_word(s[i + 1])) {
      std::size_t j = i + 1;
      while (j < s.size() && is_ascii_word(s[j])) ++j;
      out.push_back(U'@');
      i = j;
    } else {
      out.push_back(s[i++]);
    }
  }
  return out;
}

}  // namespace detail

/// NFC-normalizes the text and maps URLs to "^" and user mentions to "@".
/// Throws Utf8Error (carrying the byte offset) on malformed input.
inline std::string normalize_tweet(std::string_view text) {
  (void)decode_utf8(text);  // validation with offsets
  const std::u32string composed = decode_utf8(detail::nfc(text));
  return encode_utf8(detail::replace_mentions(detail::replace_urls(composed)));
}

// ---------------------------------------------------------------------------
// Tokenization

namespace detail {

inline bool in_set(char32_t c, std::u32string_view set) {
  return set.find(c) != std::u32string_view::npos;
}

inline bool is_eastern_emoticon(std::u32string_view f) {
  constexpr std::u32string_view eyes = U"^-><;=*0";
  auto eye = [&](char32_t c) {
    return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || in_set(c, eyes);
  };
  return f.size() == 3 && (f[1] == U'.' || f[1] == U'_') && eye(f[0]) && eye(f[2]);
}

inline bool is_western_emoticon(std::u32string_view f) {
  if (f.size() < 2 || f.size() > 8) return false;
  constexpr std::u32string_view mouth = U")(][DPpOo/\\|3*";
  constexpr std::u32string_view mouth_rev = U")(][/\\|";
  // [<>]? [:;=8xX] [-'^o]? mouth+
  {
    std::size_t i = 0;
    if (f[i] == U'<' || f[i] == U'>') ++i;
    if (i < f.size() && in_set(f[i], U":;=8xX")) {
      ++i;
      if (i < f.size() && in_set(f[i], U"-'^o") && i + 1 < f.size()) ++i;
      if (i < f.size() && std::all_of(f.begin() + static_cast<std::ptrdiff_t>(i), f.end(),
                                      [&](char32_t c) { return in_set(c, mouth); })) {
        return true;
      }
    }
  }
  // mouth_rev+ [-'^]? [:;=]
  {
    const char32_t last = f.back();
    if (in_set(last, U":;=")) {
      std::size_t end = f.size() - 1;
      if (end >= 2 && in_set(f[end - 1], U"-'^")) --end;
      if (end >= 1 && std::all_of(f.begin(), f.begin() + static_cast<std::ptrdiff_t>(end),
                                  [&](char32_t c) { return in_set(c, mouth_rev); })) {
        return true;
      }
    }
  }
  // <3, <333, </3
  if (f[0] == U'<') {
    std::size_t i = 1;
    if (f[i] == U'/') ++i;
    if (i < f.size() &&
        std::all_of(f.begin() + static_cast<std::ptrdiff_t>(i), f.end(),
                    [](char32_t c) { return c == U'3'; })) {
      return true;
    }
  }
  return false;
}

inline void split_punct(std::u32string_view piece, std::vector<std::u32string>& out) {
  if (piece.empty()) return;
  std::size_t lo = 0, hi = piece.size();
  while (lo < hi && is_punct_char(piece[lo])) ++lo;
  if (lo == hi) {
    out.emplace_back(piece);
    return;
  }
  while (hi > lo && is_punct_char(piece[hi - 1])) --hi;
  if (lo > 0) out.emplace_back(piece.substr(0, lo));
  out.emplace_back(piece.substr(lo, hi - lo));
  if (hi < piece.size()) out.emplace_back(piece.substr(hi));
}

}  // namespace detail

inline bool is_emoticon(std::u32string_view fragment) {
  return detail::is_eastern_emoticon(fragment) || detail::is_western_emoticon(fragment);
}

/// Rule-based tweet tokenizer.
///
/// Whitespace separates fragments. A fragment starting with '#' (a hashtag)
/// or matching an emoticon pattern is kept whole. Otherwise '@' and '^' are
/// split out as standalone tokens, and on each remaining piece the leading
/// and trailing runs of punctuation become separate tokens. Character floods
/// ("sooo", "!!!") are left as they are.
inline std::vector<std::u32string> tokenize(std::u32string_view text) {
  std::vector<std::u32string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j == i) break;
    const std::u32string_view frag = text.substr(i, j - i);
    i = j;
    if ((frag.size() > 1 && frag[0] == U'#') || is_emoticon(frag)) {
      out.emplace_back(frag);
      continue;
    }
    std::size_t start = 0;
    for (std::size_t k = 0; k < frag.size(); ++k) {
      if (frag[k] == U'@' || frag[k] == U'^') {
        detail::split_punct(frag.substr(start, k - start), out);
        out.emplace_back(1, frag[k]);
        start = k + 1;
      }
    }
    detail::split_punct(frag.substr(start), out);
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view utf8) {
  std::vector<std::string> out;
  for (const auto& t : tokenize(std::u32string_view(decode_utf8(utf8)))) out.push_back(encode_utf8(t));
  return out;
}

/// Normalizes, caps and tokenizes a record. Returns nullopt when nothing is
/// left to model.
inline std::optional<Tweet> make_tweet(const RawRecord& r, std::size_t record_index = 0) {
  std::u32string text = decode_utf8(normalize_tweet(r.text));
  if (text.size() > kMaxTweetChars) text.resize(kMaxTweetChars);
  auto tokens = tokenize(std::u32string_view(text));
  if (tokens.empty()) return std::nullopt;
  for (auto& t : tokens) {
    if (t.size() > kMaxWordChars) t.resize(kMaxWordChars);
  }
  return Tweet{r.user_id, std::move(text), std::move(tokens), r.traits, record_index};
}

// ---------------------------------------------------------------------------
// Dataset I/O
//
// One record per line, UTF-8:
//   user_id <TAB> ext <TAB> sta <TAB> agr <TAB> con <TAB> opn <TAB> text

struct LineError {
  std::size_t line = 0;
  std::string reason;
};

struct LoadReport {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t dropped_empty = 0;
  std::vector<LineError> rejected;
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

/// Parses one TSV line; returns the reason on failure.
inline std::variant<RawRecord, std::string> parse_record_line(std::string_view line) {
  std::array<std::string_view, 7> cols;
  std::size_t n = 0, start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == '\t') {
      if (n == cols.size()) return std::string("bad column count (expected 7)");
      cols[n++] = line.substr(start, i - start);
      start = i + 1;
    }
  }
  if (n != cols.size()) return "bad column count (expected 7, got " + std::to_string(n) + ")";
  RawRecord r;
  r.user_id = std::string(cols[0]);
  if (r.user_id.empty()) return std::string("empty user_id");
  double* slots[5] = {&r.traits.ext, &r.traits.sta, &r.traits.agr, &r.traits.con, &r.traits.opn};
  for (int k = 0; k < 5; ++k) {
    auto v = parse_double(cols[1 + k]);
    if (!v) return "non-numeric score '" + std::string(cols[1 + k]) + "'";
    if (!(*v >= kMinScore && *v <= kMaxScore)) {
      return "score " + std::string(cols[1 + k]) + " outside [-0.5, 0.5]";
    }
    *slots[k] = *v;
  }
  r.text = std::string(cols[6]);
  try {
    (void)decode_utf8(r.text);
  } catch (const Utf8Error& e) {
    return std::string("text: ") + e.what();
  }
  return r;
}

/// Reads the TSV dataset. Malformed lines are skipped and listed in the
/// report; with `strict` the first one raises DatasetError instead.
inline std::vector<RawRecord> load_dataset(const std::string& path, LoadReport& report,
                                           bool strict = false) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot open dataset '" + path + "'");
  std::vector<RawRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    ++report.lines;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto parsed = parse_record_line(line);
    if (auto* rec = std::get_if<RawRecord>(&parsed)) {
      out.push_back(std::move(*rec));
      ++report.parsed;
    } else {
      const auto& reason = std::get<std::string>(parsed);
      if (strict) {
        throw DatasetError(path + ":" + std::to_string(report.lines) + ": " + reason);
      }
      report.rejected.push_back({report.lines, reason});
    }
  }
  return out;
}

inline void save_dataset(std::span<const RawRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write dataset '" + path + "'");
  for (const auto& r : records) {
    if (r.text.find_first_of("\t\n") != std::string::npos) {
      throw DatasetError("record text contains TAB or newline");
    }
    out << r.user_id << '\t' << format_double(r.traits.ext) << '\t' << format_double(r.traits.sta)
        << '\t' << format_double(r.traits.agr) << '\t' << format_double(r.traits.con) << '\t'
        << format_double(r.traits.opn) << '\t' << r.text << '\n';
  }
  if (!out) throw DatasetError("write failed for '" + path + "'");
}

/// Turns records into tweets, dropping (and counting) the ones that are empty
/// after normalization.
inline std::vector<Tweet> prepare_corpus(std::span<const RawRecord> records, LoadReport& report) {
  std::vector<Tweet> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (auto t = make_tweet(records[i], i)) {
      out.push_back(std::move(*t));
    } else {
      ++report.dropped_empty;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fold plans

enum class FoldLevel { tweet, user };

struct FoldPlan {
  int k = 0;
  FoldLevel level = FoldLevel::tweet;
  std::uint64_t seed = 0;
  std::vector<int> assignment;  // item index -> fold index

  std::vector<std::size_t> test_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] == fold) out.push_back(i);
    }
    return out;
  }
  std::vector<std::size_t> train_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) {
      if (assignment[i] != fold) out.push_back(i);
    }
    return out;
  }
};

/// Builds a k-fold plan over items identified by their owning user.
///
/// USER level deals shuffled users round-robin, so no user spans two folds.
/// TWEET level is stratified by user: each user's shuffled tweets are dealt
/// round-robin, continuing the deal position across users so that both the
/// per-user and the total fold sizes differ by at most one.
inline FoldPlan kfold_split(std::span<const std::string> user_of, int k, FoldLevel level,
                            std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
  std::vector<std::string> users;
  std::map<std::string, std::size_t> user_index;
  std::vector<std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < user_of.size(); ++i) {
    auto [it, inserted] = user_index.try_emplace(user_of[i], users.size());
    if (inserted) {
      users.push_back(user_of[i]);
      members.emplace_back();
    }
    members[it->second].push_back(i);
  }
  FoldPlan plan{k, level, seed, std::vector<int>(user_of.size(), -1)};
  SplitMix64 rng(seed);
  if (level == FoldLevel::user) {
    if (users.size() < static_cast<std::size_t>(k)) {
      throw std::invalid_argument("kfold_split: " + std::to_string(users.size()) +
                                  " users is fewer than k=" + std::to_string(k));
    }
    std::vector<std::size_t> order(users.size());
    for (std::size_t u = 0; u < order.size(); ++u) order[u] = u;
    rng.shuffle(std::span(order));
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      for (std::size_t i : members[order[pos]]) plan.assignment[i] = static_cast<int>(pos % k);
    }
  } else {
    if (user_of.size() < static_cast<std::size_t>(k)) {
      throw std::invalid_argument("kfold_split: " + std::to_string(user_of.size()) +
                                  " tweets is fewer than k=" + std::to_string(k));
    }
    std::size_t deal = 0;
    for (auto& m : members) {
      rng.shuffle(std::span(m));
      for (std::size_t i : m) plan.assignment[i] = static_cast<int>(deal++ % k);
    }
  }
  return plan;
}

inline FoldPlan kfold_split(std::span<const Tweet> tweets, int k, FoldLevel level,
                            std::uint64_t seed) {
  std::vector<std::string> users;
  users.reserve(tweets.size());
  for (const auto& t : tweets) users.push_back(t.user_id);
  return kfold_split(std::span<const std::string>(users), k, level, seed);
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

/// Surface signal that drives EXT (and, negated, STA) in generated data.
enum class FixtureSignal {
  exclamation,  // number of '!' characters in every tweet of the user
  length,       // number of words beyond two
  marker,       // occurrences of the marker word "yay"
};

inline FixtureSignal parse_fixture_signal(std::string_view s) {
  if (s == "exclamation") return FixtureSignal::exclamation;
  if (s == "length") return FixtureSignal::length;
  if (s == "marker") return FixtureSignal::marker;
  throw std::invalid_argument("unknown fixture signal '" + std::string(s) + "'");
}

inline double clamp_score(double v) { return std::clamp(v, kMinScore, kMaxScore); }

/// Score carried by a signal strength: clamp(0.1 * level - 0.3, -0.5, 0.5),
/// evaluated as (level - 3) / 10 so that grid values are the nearest doubles.
inline double signal_score(int level) { return clamp_score((level - 3) / 10.0); }

/// Generates n_users * tweets_per_user records. Each user draws a signal level
/// in [0, 8]; every one of their tweets carries the signal at that level.
/// EXT = signal_score(level), STA = -EXT, each perturbed by N(0, noise^2)
/// label noise (per user) and clamped. AGR/CON/OPN are drawn per user on the
/// 0.1 grid and have no textual correlate.
inline std::vector<RawRecord> generate_fixture(int n_users, int tweets_per_user,
                                               FixtureSignal signal, double noise,
                                               std::uint64_t seed) {
  if (n_users <= 0 || tweets_per_user <= 0) {
    throw std::invalid_argument("generate_fixture: sizes must be positive");
  }
  static constexpr std::array<std::string_view, 32> lexicon{
      "the",   "day",   "coffee", "really", "going",  "home",  "work",  "today",
      "new",   "music", "time",   "good",   "people", "city",  "night", "just",
      "think", "book",  "friend", "weekend", "rain",  "train", "food",  "watch",
      "game",  "later", "again",  "back",   "early",  "phone", "walk",  "team"};
  static constexpr std::string_view alnum = "abcdefghijklmnopqrstuvwxyz0123456789";
  SplitMix64 rng(seed);
  std::vector<RawRecord> out;
  out.reserve(static_cast<std::size_t>(n_users) * static_cast<std::size_t>(tweets_per_user));
  for (int u = 0; u < n_users; ++u) {
    const int level = static_cast<int>(rng.below(9));
    TraitScores traits;
    const double base = signal_score(level);
    traits.ext = base;
    traits.sta = -base;
    if (noise > 0) {
      traits.ext = clamp_score(traits.ext + noise * rng.normal());
      traits.sta = clamp_score(traits.sta + noise * rng.normal());
    }
    traits.agr = (static_cast<int>(rng.below(11)) - 5) / 10.0;
    traits.con = (static_cast<int>(rng.below(11)) - 5) / 10.0;
    traits.opn = (static_cast<int>(rng.below(11)) - 5) / 10.0;
    const std::string user_id = "user" + std::to_string(u + 1);
    for (int t = 0; t < tweets_per_user; ++t) {
      const int n_words =
          signal == FixtureSignal::length ? 2 + level : 3 + static_cast<int>(rng.below(6));
      std::vector<std::string> words;
      for (int w = 0; w < n_words; ++w) words.emplace_back(lexicon[rng.below(lexicon.size())]);
      if (signal == FixtureSignal::exclamation && level > 0) {
        words[rng.below(words.size())] += std::string(static_cast<std::size_t>(level), '!');
      } else if (signal == FixtureSignal::marker) {
        for (int m = 0; m < level; ++m) {
          words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng.below(words.size() + 1)),
                       "yay");
        }
      }
      std::string text;
      if (rng.uniform() < 0.2) text += "@friend" + std::to_string(rng.below(50)) + " ";
      for (std::size_t w = 0; w < words.size(); ++w) {
        if (w) text += ' ';
        text += words[w];
      }
      if (rng.uniform() < 0.1) text += " #topic" + std::to_string(rng.below(10));
      if (rng.uniform() < 0.15) {
        text += " http://t.co/";
        for (int c = 0; c < 6; ++c) text += alnum[rng.below(alnum.size())];
      }
      out.push_back({user_id, std::move(text), traits});
    }
  }
  return out;
}

}  // namespace c2w
