// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "reflectkd/corpus.hpp"
#include "reflectkd/error.hpp"

using namespace reflectkd;

namespace {

std::vector<RawPair> raw(std::initializer_list<std::pair<const char*, const char*>> items) {
  std::vector<RawPair> out;
  std::size_t i = 0;
  for (const auto& [p, r] : items) out.push_back({"p" + std::to_string(i++), p, r});
  return out;
}

Dataset numbered_dataset(std::size_t n) {
  Dataset d;
  for (std::size_t i = 0; i < n; ++i) {
    d.pairs.push_back({"id" + std::to_string(i), {4}, {static_cast<TokenId>(4 + i % 3)}});
  }
  return d;
}

}  // namespace

TEST_CASE("reserved vocabulary entries occupy ids 0..3") {
  Vocabulary v;
  CHECK(v.size() == 4);
  CHECK(v.surface(kPad) == "<pad>");
  CHECK(v.surface(kBos) == "<bos>");
  CHECK(v.surface(kEos) == "<eos>");
  CHECK(v.surface(kUnk) == "<unk>");
  CHECK_THROWS_AS(v.surface(4), ValidationError);
}

TEST_CASE("build_vocab orders by descending frequency then surface") {
  SUBCASE("empty corpus") {
    CHECK(build_vocab({}, 1).size() == 4);
  }
  SUBCASE("a a b") {
    const std::vector<RawPair> corpus{{"x", "a a", "b"}};
    const auto v = build_vocab(corpus, 1);
    CHECK(v.entries() == std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "a", "b"});
    const auto v2 = build_vocab(corpus, 2);
    CHECK(v2.entries() == std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "a"});
  }
  SUBCASE("ties break by surface") {
    const std::vector<RawPair> corpus{{"x", "zeta alpha", "mid mid"}};
    const auto v = build_vocab(corpus, 1);
    CHECK(v.entries() == std::vector<std::string>{"<pad>", "<bos>", "<eos>", "<unk>", "mid", "alpha", "zeta"});
  }
  SUBCASE("deterministic") {
    const auto corpus = generate_synthetic({"mixed", 8, 1, 6, 0.1}, 200, 3);
    CHECK(build_vocab(corpus, 1) == build_vocab(corpus, 1));
  }
}

TEST_CASE("Vocabulary::from_entries validates the reserved prefix and uniqueness") {
  CHECK_NOTHROW(Vocabulary::from_entries({"<pad>", "<bos>", "<eos>", "<unk>", "x"}));
  CHECK_THROWS_AS(Vocabulary::from_entries({"<bos>", "<pad>", "<eos>", "<unk>"}), ValidationError);
  CHECK_THROWS_AS(Vocabulary::from_entries({"<pad>", "<bos>", "<eos>", "<unk>", "x", "x"}), ValidationError);
}

TEST_CASE("tokenize folds case, splits on whitespace and maps unknown words to UNK") {
  const std::vector<RawPair> corpus{{"x", "the cat", "sat"}};
  const auto v = build_vocab(corpus, 1);
  CHECK(tokenize("", v).empty());
  const auto t = tokenize("The the", v);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == t[1]);
  CHECK(t[0] == v.id_of("the"));
  CHECK(tokenize("dog", v) == TokenSeq{kUnk});
  CHECK(tokenize("  the\t\ncat  ", v).size() == 2);
}

TEST_CASE("detokenize inverts tokenize on in-vocabulary lowercased text") {
  const auto corpus = generate_synthetic({"mixed", 10, 1, 8, 0.0}, 50, 11);
  const auto v = build_vocab(corpus, 1);
  for (const auto& r : corpus) {
    CHECK(detokenize(tokenize(r.prompt, v), v) == r.prompt);
    CHECK(detokenize(tokenize(r.response, v), v) == r.response);
  }
}

TEST_CASE("parse_jsonl reads records and reports the offending line") {
  SUBCASE("valid with blank lines") {
    std::istringstream in(
        "{\"id\":\"a\",\"prompt\":\"x y\",\"response\":\"z\"}\n\n"
        "{\"id\":\"b\",\"prompt\":\"q\",\"response\":\"r s\"}\n");
    const auto recs = parse_jsonl(in);
    REQUIRE(recs.size() == 2);
    CHECK(recs[1] == RawPair{"b", "q", "r s"});
  }
  SUBCASE("empty input") {
    std::istringstream in("");
    CHECK(parse_jsonl(in).empty());
  }
  SUBCASE("missing response on line 3") {
    std::istringstream in(
        "{\"id\":\"a\",\"prompt\":\"x\",\"response\":\"z\"}\n"
        "{\"id\":\"b\",\"prompt\":\"x\",\"response\":\"z\"}\n"
        "{\"id\":\"c\",\"prompt\":\"x\"}\n");
    try {
      parse_jsonl(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
      CHECK(std::string(e.what()).find("response") != std::string::npos);
    }
  }
  SUBCASE("non-string field") {
    std::istringstream in("{\"id\":1,\"prompt\":\"x\",\"response\":\"z\"}\n");
    CHECK_THROWS_AS(parse_jsonl(in), ParseError);
  }
  SUBCASE("invalid JSON") {
    std::istringstream in("{\"id\":\"a\",\n");
    CHECK_THROWS_AS(parse_jsonl(in), ParseError);
  }
}

TEST_CASE("jsonl write then read round-trips") {
  const auto corpus = generate_synthetic({"mixed", 8, 1, 6, 0.2}, 30, 5);
  std::stringstream ss;
  write_jsonl(ss, corpus);
  CHECK(parse_jsonl(ss) == corpus);
}

TEST_CASE("tokenize_pairs drops over-length responses and rejects bad records") {
  const auto corpus = raw({{"a b", "a"}, {"a", "b b"}, {"b", "a b a b"}});
  const auto v = build_vocab(corpus, 1);
  const auto res = tokenize_pairs(corpus, v, 2);
  CHECK(res.dataset.size() == 2);
  CHECK(res.dropped_over_length == 1);

  auto dup = corpus;
  dup[2].id = dup[0].id;
  CHECK_THROWS_AS(tokenize_pairs(dup, v, 10), ValidationError);

  const auto empty_resp = raw({{"a", "   "}});
  CHECK_THROWS_AS(tokenize_pairs(empty_resp, v, 10), ValidationError);
}

TEST_CASE("load_jsonl on an empty file yields an empty dataset") {
  const auto path = std::filesystem::temp_directory_path() / "reflectkd_empty.jsonl";
  { std::ofstream(path) << ""; }
  CHECK(load_jsonl(path, Vocabulary{}, 8).dataset.size() == 0);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_jsonl(path, Vocabulary{}, 8), ValidationError);
}

TEST_CASE("split uses floor for valid/test and gives the remainder to train") {
  const auto d = numbered_dataset(10);
  const auto s = split(d, {0.8, 0.1, 0.1}, 7);
  CHECK(s.train.size() == 8);
  CHECK(s.valid.size() == 1);
  CHECK(s.test.size() == 1);

  const auto all_train = split(d, {1.0, 0.0, 0.0}, 7);
  CHECK(all_train.train.size() == 10);

  CHECK_THROWS_AS(split(d, {0.8, 0.1, 0.2}, 1), ValidationError);
  CHECK_THROWS_AS(split(d, {1.2, -0.1, -0.1}, 1), ValidationError);
}

TEST_CASE("split is a seeded partition of the input") {
  for (std::size_t n : {0u, 1u, 7u, 33u, 100u}) {
    const auto d = numbered_dataset(n);
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
      const auto s = split(d, {0.7, 0.2, 0.1}, seed);
      CHECK(s.train.size() + s.valid.size() + s.test.size() == n);
      std::multiset<std::string> ids;
      for (const auto* part : {&s.train, &s.valid, &s.test}) {
        for (const auto& p : part->pairs) ids.insert(p.id);
      }
      CHECK(ids.size() == n);
      CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == n);
      const auto again = split(d, {0.7, 0.2, 0.1}, seed);
      CHECK(again.train.pairs == s.train.pairs);
      CHECK(again.test.pairs == s.test.pairs);
    }
  }
}

TEST_CASE("synthetic generator") {
  SUBCASE("count 0") {
    CHECK(generate_synthetic({"copy", 8, 1, 6, 0.0}, 0, 1).empty());
  }
  SUBCASE("deterministic and id-stable") {
    const GrammarSpec spec{"mixed", 8, 1, 6, 0.3};
    CHECK(generate_synthetic(spec, 40, 9) == generate_synthetic(spec, 40, 9));
    CHECK(generate_synthetic(spec, 40, 9) != generate_synthetic(spec, 40, 10));
  }
  SUBCASE("copy response equals the payload") {
    for (const auto& r : generate_synthetic({"copy", 8, 1, 6, 0.0}, 50, 2)) {
      const auto words = split_words(r.prompt);
      REQUIRE(words.size() >= 3);
      CHECK(words.front() == "copy");
      CHECK(words.back() == "=");
      const std::vector<std::string> payload(words.begin() + 1, words.end() - 1);
      CHECK(split_words(r.response) == payload);
    }
  }
  SUBCASE("reverse response is the reversed payload") {
    for (const auto& r : generate_synthetic({"reverse", 8, 1, 6, 0.0}, 50, 2)) {
      auto words = split_words(r.prompt);
      std::vector<std::string> payload(words.begin() + 1, words.end() - 1);
      std::reverse(payload.begin(), payload.end());
      CHECK(split_words(r.response) == payload);
    }
  }
  SUBCASE("difficulty grows with response length") {
    const auto samples = generate_synthetic_samples({"copy", 8, 1, 8, 0.0}, 400, 4);
    double short_mean = 0.0, long_mean = 0.0;
    std::size_t short_n = 0, long_n = 0;
    for (const auto& s : samples) {
      CHECK(s.difficulty >= 0.0);
      CHECK(s.difficulty < 1.0);
      const auto len = split_words(s.pair.response).size();
      if (len <= 3) {
        short_mean += s.difficulty;
        ++short_n;
      } else if (len >= 6) {
        long_mean += s.difficulty;
        ++long_n;
      }
    }
    REQUIRE(short_n > 0);
    REQUIRE(long_n > 0);
    CHECK(short_mean / static_cast<double>(short_n) < long_mean / static_cast<double>(long_n));
  }
  SUBCASE("unknown template") {
    CHECK_THROWS_AS(generate_synthetic({"sort", 8, 1, 6, 0.0}, 3, 1), ValidationError);
  }
}
