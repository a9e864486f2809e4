// SPDX-License-Identifier: Apache-2.0
//
// Dataset ingestion: JSONL prompt/response records, a whitespace word
// tokenizer, vocabulary construction, seeded splits, and a synthetic corpus
// generator with a per-sample difficulty knob.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace reflectkd {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr std::size_t kNumReserved = 4;

/// Ordered list of unique surface strings. Ids 0..3 are PAD, BOS, EOS, UNK.
class Vocabulary {
 public:
  Vocabulary();

  /// Rebuilds a vocabulary from a stored entry list (e.g. a checkpoint).
  /// Throws ValidationError if the reserved prefix is wrong or a surface repeats.
  static Vocabulary from_entries(std::vector<std::string> entries);

  /// Id of `word`, or kUnk when absent.
  TokenId id_of(std::string_view word) const;
  std::optional<TokenId> find(std::string_view word) const;
  const std::string& surface(TokenId id) const;

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<std::string>& entries() const noexcept { return entries_; }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.entries_ == b.entries_; }

 private:
  void append(std::string surface);

  std::vector<std::string> entries_;
  std::unordered_map<std::string, TokenId> index_;
};

/// One untokenized JSONL record.
struct RawPair {
  std::string id;
  std::string prompt;
  std::string response;

  friend bool operator==(const RawPair&, const RawPair&) = default;
};

struct PromptResponsePair {
  std::string id;
  TokenSeq prompt;
  TokenSeq response;

  friend bool operator==(const PromptResponsePair&, const PromptResponsePair&) = default;
};

struct Dataset {
  std::vector<PromptResponsePair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  const PromptResponsePair& operator[](std::size_t i) const { return pairs[i]; }
};

struct LoadResult {
  Dataset dataset;
  std::size_t dropped_over_length = 0;
};

/// Lowercased whitespace-separated words.
std::vector<std::string> split_words(std::string_view text);

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab);
std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab);

/// Reserved entries, then every word with frequency >= min_count ordered by
/// descending frequency and ascending surface. Counts prompts and responses.
Vocabulary build_vocab(std::span<const RawPair> corpus, std::size_t min_count);

/// Parses records with string fields "id", "prompt", "response". Blank
/// lines are skipped. Throws ParseError naming the offending line.
std::vector<RawPair> parse_jsonl(std::istream& in);
std::vector<RawPair> read_jsonl(const std::filesystem::path& path);
void write_jsonl(std::ostream& out, std::span<const RawPair> pairs);
void write_jsonl(const std::filesystem::path& path, std::span<const RawPair> pairs);

/// Tokenizes records; pairs whose response exceeds max_len tokens are dropped
/// and counted. Throws ValidationError on duplicate ids or on a prompt or
/// response that tokenizes to nothing.
LoadResult tokenize_pairs(std::span<const RawPair> raw, const Vocabulary& vocab, std::size_t max_len);
LoadResult load_jsonl(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t max_len);

/// Words of `raw` (prompts and responses) missing from `vocab`, in first-seen order.
std::vector<std::string> out_of_vocabulary(std::span<const RawPair> raw, const Vocabulary& vocab);

struct SplitFractions {
  double train = 0.8;
  double valid = 0.1;
  double test = 0.1;
};

struct DatasetSplits {
  Dataset train;
  Dataset valid;
  Dataset test;
};

/// Seeded shuffle then contiguous slices. valid and test get floor(N*f);
/// the remainder goes to train.
DatasetSplits split(const Dataset& dataset, SplitFractions fractions, std::uint64_t seed);

// --- synthetic corpora -------------------------------------------------------

/// Built-in template families:
///   copy     "copy w1..wL =" -> "w1..wL"
///   reverse  "reverse w1..wL =" -> "wL..w1"
///   pattern  "pattern m1..mK =" -> motif repeated to length L (K = ceil(L/2))
///   mixed    one of the above per sample
/// Each sample draws a difficulty t in [0,1); the payload length grows
/// linearly with t and each response token is replaced by a random symbol
/// with probability noise*t.
struct GrammarSpec {
  std::string family = "copy";
  std::size_t alphabet = 8;
  std::size_t min_len = 1;
  std::size_t max_len = 6;
  double noise = 0.0;

  void validate() const;
};

/// Difficulty in [0,1) of the i-th generated sample; exposed for tests.
struct SyntheticSample {
  RawPair pair;
  double difficulty = 0.0;
};

std::vector<SyntheticSample> generate_synthetic_samples(const GrammarSpec& spec, std::size_t count, std::uint64_t seed);
std::vector<RawPair> generate_synthetic(const GrammarSpec& spec, std::size_t count, std::uint64_t seed);

}  // namespace reflectkd
