// SPDX-License-Identifier: Apache-2.0
//
// Student reflection over the training data: the student answers every
// prompt, each answer is scored by ROUGE-L against the reference and by the
// student's own cross-entropy, the two rankings are combined with
// reciprocal rank fusion, and the easiest lambda fraction is retained.
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "reflectkd/corpus.hpp"
#include "reflectkd/tinylm.hpp"

namespace reflectkd {

enum class DecodeMode { greedy, sample };
/// Which sequence the student's cross-entropy is measured on.
enum class CeSource { student_output, ground_truth };
/// Which rank lists feed the fused score.
enum class RankingMode { fusion, rouge_only, ce_only };
enum class RankDirection { higher_is_easier, lower_is_easier };

std::string_view to_string(DecodeMode m);
std::string_view to_string(CeSource s);
std::string_view to_string(RankingMode m);
DecodeMode parse_decode_mode(std::string_view s);
CeSource parse_ce_source(std::string_view s);
RankingMode parse_ranking_mode(std::string_view s);

struct DecodeSettings {
  DecodeMode mode = DecodeMode::greedy;
  std::size_t max_len = 32;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  /// Prompts longer than this are rejected.
  std::size_t max_prompt_tokens = 256;
};

struct CurationConfig {
  double lambda = 0.75;
  int rrf_k = 60;
  CeSource ce_source = CeSource::student_output;
  RankingMode ranking = RankingMode::fusion;
  DecodeSettings decode;

  void validate() const;
};

struct ReflectionRecord {
  std::string pair_id;
  TokenSeq student_output;
  double rouge_f = 0.0;
  double ce_nats = 0.0;
  std::size_t rank_rouge = 0;
  std::size_t rank_ce = 0;
  double fused_score = 0.0;
};

struct SampleScore {
  double rouge_f = 0.0;
  double ce_nats = 0.0;
};

/// Student continuation y_s of pair.prompt. Sampling seeds are derived from
/// (decode.seed, pair.id), so the output does not depend on scheduling.
TokenSeq generate_reflection(const TinyLmParams& student, const PromptResponsePair& pair, const DecodeSettings& decode);

SampleScore score_sample(const PromptResponsePair& pair, std::span<const TokenId> student_output,
                         const TinyLmParams& student, const CurationConfig& config);

/// 1-based ranks, rank 1 = easiest. Ties break by ascending id.
/// Throws ValidationError on empty input, NaN or a length mismatch.
std::vector<std::size_t> rank_by_metric(std::span<const double> values, RankDirection direction,
                                        std::span<const std::string> ids);

/// score_j = sum over lists of 1 / (k + rank_j). Every list must be a
/// permutation of 1..N.
std::vector<double> rrf_fuse(std::span<const std::vector<std::size_t>> rank_lists, int k);

/// Generates, scores, ranks and fuses every pair. Records come back in
/// dataset order regardless of `threads`.
std::vector<ReflectionRecord> reflect_dataset(const TinyLmParams& student, const Dataset& dataset,
                                              const CurationConfig& config, std::size_t threads);

/// floor(lambda * n), with a 1e-9 guard against products like 0.29 * 100.
std::size_t retained_count(std::size_t n, double lambda);

/// Easiest-first (descending fused score, ties by ascending id), truncated
/// to retained_count. Throws ValidationError when nothing would be kept.
std::vector<ReflectionRecord> select(std::span<const ReflectionRecord> records, double lambda);

/// One JSON object per record in the order given, with a `kept` flag for
/// ids present in `kept`.
void write_reflection_report(std::ostream& out, std::span<const ReflectionRecord> records,
                             std::span<const ReflectionRecord> kept);

}  // namespace reflectkd
