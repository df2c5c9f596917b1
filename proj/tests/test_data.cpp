#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "test_util.hpp"

using namespace c2w;

using Tokens = std::vector<std::string>;

TEST(Utf8, RoundTripsAndRejectsMalformedInputWithOffset) {
  const std::string s = "a\xC3\xA9\xE2\x82\xAC\xF0\x9F\x98\x80";  // a é € 😀
  const auto cps = decode_utf8(s);
  EXPECT_EQ(cps, (std::u32string{U'a', 0xE9, 0x20AC, 0x1F600}));
  EXPECT_EQ(encode_utf8(cps), s);
  const std::pair<std::string, std::size_t> bad[] = {
      {"ab\xFF", 2},             // invalid lead byte
      {"x\xC3", 1},              // truncated sequence
      {"\xC0\xAF", 0},           // overlong
      {"ok\xED\xA0\x80", 2},     // surrogate
      {"\xF4\x90\x80\x80", 0},   // beyond U+10FFFF
      {"a\xE2\x28\xA1", 2},      // bad continuation: offset of the offending byte
  };
  for (const auto& [text, offset] : bad) {
    try {
      decode_utf8(text);
      ADD_FAILURE() << "accepted malformed input";
    } catch (const Utf8Error& e) {
      EXPECT_EQ(e.offset(), offset);
    }
  }
}

TEST(Normalize, EntityMappings) {
  EXPECT_EQ(normalize_tweet("@john hi http://t.co/abc"), "@ hi ^");
  EXPECT_EQ(normalize_tweet("no entities here!"), "no entities here!");
  EXPECT_EQ(normalize_tweet("see www.example.com and @a_b #topic"), "see ^ and @ #topic");
  EXPECT_EQ(normalize_tweet("HTTPS://X.org/A?b=1 ok"), "^ ok");
  EXPECT_EQ(normalize_tweet("mail me@host.com"), "mail me@host.com");
  EXPECT_EQ(normalize_tweet("http:// alone"), "http:// alone");
  EXPECT_EQ(normalize_tweet("@a@b"), "@@");
  EXPECT_EQ(normalize_tweet("#topic stays"), "#topic stays");
}

TEST(Normalize, ComposesToNfc) {
  EXPECT_EQ(normalize_tweet("cafe\xCC\x81"), "caf\xC3\xA9");
  EXPECT_EQ(normalize_tweet("caf\xC3\xA9"), "caf\xC3\xA9");
}

TEST(Normalize, InvalidUtf8ReportsByteOffset) {
  try {
    normalize_tweet("hello \xFF world");
    FAIL();
  } catch (const Utf8Error& e) {
    EXPECT_EQ(e.offset(), 6u);
  }
}

TEST(Tokenize, Examples) {
  EXPECT_EQ(tokenize(std::string_view("hi there")), (Tokens{"hi", "there"}));
  EXPECT_EQ(tokenize(std::string_view("@ hi ^")), (Tokens{"@", "hi", "^"}));
  EXPECT_EQ(tokenize(std::string_view("Being good ain't enough lately.")),
            (Tokens{"Being", "good", "ain't", "enough", "lately", "."}));
}

TEST(Tokenize, HashtagsEmoticonsAndFloods) {
  EXPECT_EQ(tokenize(std::string_view("#c++ rocks!!!")), (Tokens{"#c++", "rocks", "!!!"}));
  EXPECT_EQ(tokenize(std::string_view(":) o.O ^_^ <3 </3 :-( (: x3")),
            (Tokens{":)", "o.O", "^_^", "<3", "</3", ":-(", "(:", "x3"}));
  EXPECT_EQ(tokenize(std::string_view("sooo goooood")), (Tokens{"sooo", "goooood"}));
  EXPECT_EQ(tokenize(std::string_view("(really)")), (Tokens{"(", "really", ")"}));
  EXPECT_EQ(tokenize(std::string_view("...")), (Tokens{"..."}));
  EXPECT_EQ(tokenize(std::string_view("hi:)")), (Tokens{"hi", ":)"}));
  EXPECT_EQ(tokenize(std::string_view("a@b x^y")), (Tokens{"a", "@", "b", "x", "^", "y"}));
  EXPECT_EQ(tokenize(std::string_view("  \t ")), Tokens{});
}

TEST(Tokenize, NeverEmitsEmptyOrWhitespaceTokens) {
  SplitMix64 rng(77);
  const std::u32string alphabet = U"ab1 \t@^#:;)(.!,'-_ 　é\U0001F600<3oO";
  for (int i = 0; i < 5000; ++i) {
    std::u32string s;
    const auto n = rng.below(20);
    for (std::uint64_t k = 0; k < n; ++k) s += alphabet[rng.below(alphabet.size())];
    for (const auto& t : tokenize(std::u32string_view(s))) {
      ASSERT_FALSE(t.empty());
      for (char32_t c : t) ASSERT_FALSE(is_space(c));
    }
  }
}

TEST(MakeTweet, DropsEmptyAndAppliesCaps) {
  EXPECT_FALSE(make_tweet(RawRecord{"u", "   ", {}}).has_value());
  EXPECT_FALSE(make_tweet(RawRecord{"u", "", {}}).has_value());
  const std::string long_word(100, 'a');
  const auto t = make_tweet(RawRecord{"u", long_word + " " + std::string(600, 'b'), {}});
  ASSERT_TRUE(t.has_value());
  EXPECT_EQ(t->text.size(), kMaxTweetChars);
  EXPECT_EQ(t->tokens[0].size(), kMaxWordChars);
  EXPECT_EQ(t->tokens[1].size(), kMaxWordChars);
}

TEST(Dataset, ParsesLineAndRejectsBadOnes) {
  auto parsed = parse_record_line("u1\t0.25\t-0.5\t0\t0.1\t0.5\thello @john");
  ASSERT_TRUE(std::holds_alternative<RawRecord>(parsed));
  const auto& r = std::get<RawRecord>(parsed);
  EXPECT_EQ(r.user_id, "u1");
  EXPECT_EQ(r.traits.ext, 0.25);
  EXPECT_EQ(r.traits.sta, -0.5);
  EXPECT_EQ(r.traits.agr, 0.0);
  EXPECT_EQ(r.traits.con, 0.1);
  EXPECT_EQ(r.traits.opn, 0.5);
  EXPECT_EQ(r.text, "hello @john");

  const std::string bad[] = {
      "u1\t0.75\t0\t0\t0\t0\ttext",     // out of range
      "u1\t0.1\t0\t0\t0\ttext",         // six columns
      "u1\tabc\t0\t0\t0\t0\ttext",      // non-numeric
      "u1\t0\t0\t0\t0\t0\ta\tb",        // eight columns
      "\t0\t0\t0\t0\t0\ttext",          // empty user
      "u1\tnan\t0\t0\t0\t0\ttext",      // NaN is not in range
  };
  for (const auto& line : bad) {
    EXPECT_TRUE(std::holds_alternative<std::string>(parse_record_line(line))) << line;
  }
  const auto out_of_range = std::get<std::string>(parse_record_line(bad[0]));
  EXPECT_NE(out_of_range.find("0.75"), std::string::npos);
}

TEST(Dataset, LoadReportCountsLines) {
  testutil::TempDir dir;
  const auto path = dir.file("d.tsv");
  testutil::write_file(path,
                       "u1\t0.1\t0\t0\t0\t0\thello\n"
                       "u1\t0.9\t0\t0\t0\t0\tbad range\n"
                       "u2\t0.2\t0\t0\t0\t0\t\n"
                       "garbage\n"
                       "u2\t0.2\t0\t0\t0\t0\tworld\r\n");
  LoadReport rep;
  const auto records = load_dataset(path, rep);
  EXPECT_EQ(rep.lines, 5u);
  EXPECT_EQ(rep.parsed, 3u);
  ASSERT_EQ(rep.rejected.size(), 2u);
  EXPECT_EQ(rep.rejected[0].line, 2u);
  EXPECT_EQ(rep.rejected[1].line, 4u);
  const auto tweets = prepare_corpus(records, rep);
  EXPECT_EQ(rep.dropped_empty, 1u);
  ASSERT_EQ(tweets.size(), 2u);
  EXPECT_EQ(tweets[1].tokens, std::vector<std::u32string>{U"world"});
  LoadReport strict_rep;
  EXPECT_THROW(load_dataset(path, strict_rep, true), DatasetError);
  EXPECT_THROW(load_dataset(dir.file("missing.tsv"), rep), DatasetError);
}

TEST(Dataset, FixtureRoundTripsThroughSaveAndLoad) {
  testutil::TempDir dir;
  const auto records = generate_fixture(6, 7, FixtureSignal::marker, 0.05, 3);
  save_dataset(records, dir.file("f.tsv"));
  LoadReport rep;
  const auto loaded = load_dataset(dir.file("f.tsv"), rep);
  EXPECT_TRUE(rep.rejected.empty());
  ASSERT_EQ(loaded.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(loaded[i].user_id, records[i].user_id);
    EXPECT_EQ(loaded[i].text, records[i].text);
    for (Trait t : kAllTraits) EXPECT_EQ(loaded[i].traits.get(t), records[i].traits.get(t));
  }
}

TEST(Vocab, CharVocabularyFromTokens) {
  std::vector<Tweet> corpus{*make_tweet(RawRecord{"u", "ab", {}}), *make_tweet(RawRecord{"u", "ba", {}})};
  const auto v = build_char_vocab(corpus);
  EXPECT_EQ(v.size(), 3u);
  EXPECT_EQ(v.lookup(U'a'), 1u);
  EXPECT_EQ(v.lookup(U'b'), 2u);
  EXPECT_EQ(v.lookup(U'ω'), CharVocab::unk_id);
  EXPECT_EQ(build_char_vocab(corpus), v);
  EXPECT_THROW(build_char_vocab(std::vector<Tweet>{}), std::invalid_argument);
}

namespace {

std::vector<std::string> users_of(std::initializer_list<std::pair<std::string, int>> spec) {
  std::vector<std::string> out;
  for (const auto& [u, n] : spec) {
    for (int i = 0; i < n; ++i) out.push_back(u);
  }
  return out;
}

}  // namespace

TEST(Folds, SingleUserTweetLevel) {
  const auto users = users_of({{"u", 10}});
  const auto plan = kfold_split(std::span<const std::string>(users), 5, FoldLevel::tweet, 1);
  for (int f = 0; f < 5; ++f) EXPECT_EQ(plan.test_indices(f).size(), 2u);
}

TEST(Folds, TooFewUsersOrTweets) {
  const auto users = users_of({{"a", 3}, {"b", 3}, {"c", 3}, {"d", 3}});
  EXPECT_THROW(kfold_split(std::span<const std::string>(users), 5, FoldLevel::user, 1),
               std::invalid_argument);
  const auto few = users_of({{"a", 3}});
  EXPECT_THROW(kfold_split(std::span<const std::string>(few), 5, FoldLevel::tweet, 1),
               std::invalid_argument);
  EXPECT_THROW(kfold_split(std::span<const std::string>(users), 1, FoldLevel::tweet, 1),
               std::invalid_argument);
}

TEST(Folds, StratifiedByUser) {
  const auto users = users_of({{"a", 10}, {"b", 10}, {"c", 10}});
  const auto plan = kfold_split(std::span<const std::string>(users), 5, FoldLevel::tweet, 9);
  for (int f = 0; f < 5; ++f) {
    std::map<std::string, int> count;
    for (std::size_t i : plan.test_indices(f)) ++count[users[i]];
    EXPECT_EQ(count["a"], 2);
    EXPECT_EQ(count["b"], 2);
    EXPECT_EQ(count["c"], 2);
  }
}

TEST(Folds, PartitionAndBalanceProperties) {
  SplitMix64 rng(123);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> users;
    const int n_users = 2 + static_cast<int>(rng.below(12));
    for (int u = 0; u < n_users; ++u) {
      const int n = 1 + static_cast<int>(rng.below(9));
      for (int i = 0; i < n; ++i) users.push_back("u" + std::to_string(u));
    }
    // Interleave users so that fold assignment cannot rely on contiguity.
    rng.shuffle(std::span(users));
    const int k = 2 + static_cast<int>(rng.below(4));
    for (FoldLevel level : {FoldLevel::tweet, FoldLevel::user}) {
      if (level == FoldLevel::user && n_users < k) continue;
      if (users.size() < static_cast<std::size_t>(k)) continue;
      const auto plan = kfold_split(std::span<const std::string>(users), k, level, trial);
      std::vector<std::size_t> seen;
      std::size_t lo = users.size(), hi = 0;
      for (int f = 0; f < k; ++f) {
        const auto test = plan.test_indices(f);
        const auto train = plan.train_indices(f);
        EXPECT_EQ(test.size() + train.size(), users.size());
        seen.insert(seen.end(), test.begin(), test.end());
        if (level == FoldLevel::tweet) {
          lo = std::min(lo, test.size());
          hi = std::max(hi, test.size());
        } else {
          std::set<std::string> fold_users;
          for (std::size_t i : test) fold_users.insert(users[i]);
          lo = std::min(lo, fold_users.size());
          hi = std::max(hi, fold_users.size());
        }
      }
      std::sort(seen.begin(), seen.end());
      for (std::size_t i = 0; i < seen.size(); ++i) ASSERT_EQ(seen[i], i);
      EXPECT_LE(hi - lo, 1u);
      if (level == FoldLevel::user) {
        std::map<std::string, int> fold_of;
        for (std::size_t i = 0; i < users.size(); ++i) {
          auto [it, fresh] = fold_of.try_emplace(users[i], plan.assignment[i]);
          EXPECT_EQ(it->second, plan.assignment[i]);
        }
      }
      const auto again = kfold_split(std::span<const std::string>(users), k, level, trial);
      EXPECT_EQ(again.assignment, plan.assignment);
    }
  }
}

TEST(Fixture, ExclamationFormula) {
  EXPECT_NEAR(signal_score(5), 0.2, 1e-15);
  const auto records = generate_fixture(20, 10, FixtureSignal::exclamation, 0.0, 42);
  ASSERT_EQ(records.size(), 200u);
  for (const auto& r : records) {
    const auto bangs = std::count(r.text.begin(), r.text.end(), '!');
    EXPECT_NEAR(r.traits.ext, std::clamp(0.1 * static_cast<double>(bangs) - 0.3, -0.5, 0.5), 1e-12)
        << r.text;
    EXPECT_EQ(r.traits.sta, -r.traits.ext);
  }
}

TEST(Fixture, ReproducibleAndLabelsConstantPerUser) {
  const auto a = generate_fixture(8, 5, FixtureSignal::length, 0.1, 7);
  const auto b = generate_fixture(8, 5, FixtureSignal::length, 0.1, 7);
  ASSERT_EQ(a.size(), b.size());
  std::map<std::string, TraitScores> per_user;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].text, b[i].text);
    EXPECT_EQ(a[i].user_id, b[i].user_id);
    for (Trait t : kAllTraits) {
      EXPECT_EQ(a[i].traits.get(t), b[i].traits.get(t));
      EXPECT_GE(a[i].traits.get(t), -0.5);
      EXPECT_LE(a[i].traits.get(t), 0.5);
    }
    auto [it, fresh] = per_user.try_emplace(a[i].user_id, a[i].traits);
    for (Trait t : kAllTraits) EXPECT_EQ(it->second.get(t), a[i].traits.get(t));
  }
}
