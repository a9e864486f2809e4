// SPDX-License-Identifier: Apache-2.0
#include "reflectkd/reflect.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "reflectkd/error.hpp"
#include "reflectkd/metrics.hpp"
#include "reflectkd/parallel.hpp"
#include "reflectkd/rng.hpp"

namespace reflectkd {

std::string_view to_string(DecodeMode m) { return m == DecodeMode::greedy ? "greedy" : "sample"; }

std::string_view to_string(CeSource s) { return s == CeSource::student_output ? "student_output" : "ground_truth"; }

std::string_view to_string(RankingMode m) {
  switch (m) {
    case RankingMode::fusion: return "fusion";
    case RankingMode::rouge_only: return "rouge";
    case RankingMode::ce_only: return "ce";
  }
  return "?";
}

DecodeMode parse_decode_mode(std::string_view s) {
  if (s == "greedy") return DecodeMode::greedy;
  if (s == "sample") return DecodeMode::sample;
  throw ValidationError("unknown decode mode '" + std::string(s) + "'");
}

CeSource parse_ce_source(std::string_view s) {
  if (s == "student_output") return CeSource::student_output;
  if (s == "ground_truth") return CeSource::ground_truth;
  throw ValidationError("unknown ce_source '" + std::string(s) + "'");
}

RankingMode parse_ranking_mode(std::string_view s) {
  if (s == "fusion") return RankingMode::fusion;
  if (s == "rouge") return RankingMode::rouge_only;
  if (s == "ce") return RankingMode::ce_only;
  throw ValidationError("unknown ranking '" + std::string(s) + "' (expected fusion, rouge or ce)");
}

void CurationConfig::validate() const {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ValidationError("lambda must be in (0, 1]");
  if (rrf_k < 1) throw ValidationError("rrf_k must be >= 1");
  if (decode.mode == DecodeMode::sample && !(decode.temperature > 0.0)) {
    throw ValidationError("reflection temperature must be positive");
  }
}

TokenSeq generate_reflection(const TinyLmParams& student, const PromptResponsePair& pair, const DecodeSettings& decode) {
  if (pair.prompt.size() > decode.max_prompt_tokens) {
    throw ValidationError("prompt of '" + pair.id + "' has " + std::to_string(pair.prompt.size()) +
                          " tokens, limit is " + std::to_string(decode.max_prompt_tokens));
  }
  if (decode.mode == DecodeMode::greedy) return greedy_decode(student, pair.prompt, decode.max_len);
  return sample_decode(student, pair.prompt, decode.max_len, decode.temperature,
                       derive_seed({decode.seed, fnv1a64(pair.id)}));
}

SampleScore score_sample(const PromptResponsePair& pair, std::span<const TokenId> student_output,
                         const TinyLmParams& student, const CurationConfig& config) {
  SampleScore s;
  s.rouge_f = rouge_l(pair.response, student_output).f_measure;
  const std::span<const TokenId> scored =
      config.ce_source == CeSource::student_output ? student_output : std::span<const TokenId>(pair.response);
  s.ce_nats = sequence_cross_entropy(student, pair.prompt, scored).mean_nats;
  return s;
}

std::vector<std::size_t> rank_by_metric(std::span<const double> values, RankDirection direction,
                                        std::span<const std::string> ids) {
  if (values.empty()) throw ValidationError("rank_by_metric: no values");
  if (values.size() != ids.size()) throw ValidationError("rank_by_metric: values and ids differ in length");
  for (double v : values) {
    if (std::isnan(v)) throw ValidationError("rank_by_metric: NaN value");
  }
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) {
      return direction == RankDirection::higher_is_easier ? values[a] > values[b] : values[a] < values[b];
    }
    return ids[a] < ids[b];
  });
  std::vector<std::size_t> ranks(values.size());
  for (std::size_t r = 0; r < order.size(); ++r) ranks[order[r]] = r + 1;
  return ranks;
}

std::vector<double> rrf_fuse(std::span<const std::vector<std::size_t>> rank_lists, int k) {
  if (k < 1) throw ValidationError("rrf_fuse: k must be >= 1");
  if (rank_lists.empty()) throw ValidationError("rrf_fuse: no rank lists");
  const std::size_t n = rank_lists.front().size();
  for (const auto& list : rank_lists) {
    if (list.size() != n) throw ValidationError("rrf_fuse: rank lists differ in length");
    std::vector<bool> seen(n + 1, false);
    for (std::size_t r : list) {
      if (r < 1 || r > n || seen[r]) throw ValidationError("rrf_fuse: rank list is not a permutation of 1..N");
      seen[r] = true;
    }
  }
  std::vector<double> scores(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (const auto& list : rank_lists) scores[j] += 1.0 / (static_cast<double>(k) + static_cast<double>(list[j]));
  }
  return scores;
}

std::vector<ReflectionRecord> reflect_dataset(const TinyLmParams& student, const Dataset& dataset,
                                              const CurationConfig& config, std::size_t threads) {
  config.validate();
  const std::size_t n = dataset.size();
  std::vector<ReflectionRecord> records(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const auto& pair = dataset[i];
    auto& rec = records[i];
    rec.pair_id = pair.id;
    rec.student_output = generate_reflection(student, pair, config.decode);
    const auto s = score_sample(pair, rec.student_output, student, config);
    rec.rouge_f = s.rouge_f;
    rec.ce_nats = s.ce_nats;
  });
  if (n == 0) return records;

  std::vector<std::string> ids(n);
  std::vector<double> rouge(n), ce(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = records[i].pair_id;
    rouge[i] = records[i].rouge_f;
    ce[i] = records[i].ce_nats;
  }
  const auto rank_rouge = rank_by_metric(rouge, RankDirection::higher_is_easier, ids);
  const auto rank_ce = rank_by_metric(ce, RankDirection::lower_is_easier, ids);
  std::vector<std::vector<std::size_t>> lists;
  if (config.ranking != RankingMode::ce_only) lists.push_back(rank_rouge);
  if (config.ranking != RankingMode::rouge_only) lists.push_back(rank_ce);
  const auto fused = rrf_fuse(lists, config.rrf_k);
  for (std::size_t i = 0; i < n; ++i) {
    records[i].rank_rouge = rank_rouge[i];
    records[i].rank_ce = rank_ce[i];
    records[i].fused_score = fused[i];
  }
  return records;
}

std::size_t retained_count(std::size_t n, double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw ValidationError("lambda must be in (0, 1]");
  return std::min(n, static_cast<std::size_t>(std::floor(lambda * static_cast<double>(n) + 1e-9)));
}

std::vector<ReflectionRecord> select(std::span<const ReflectionRecord> records, double lambda) {
  const std::size_t keep = retained_count(records.size(), lambda);
  if (keep == 0) throw ValidationError("retention eliminates all data");
  std::vector<ReflectionRecord> sorted(records.begin(), records.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const ReflectionRecord& a, const ReflectionRecord& b) {
    if (a.fused_score != b.fused_score) return a.fused_score > b.fused_score;
    return a.pair_id < b.pair_id;
  });
  sorted.resize(keep);
  return sorted;
}

void write_reflection_report(std::ostream& out, std::span<const ReflectionRecord> records,
                             std::span<const ReflectionRecord> kept) {
  std::unordered_set<std::string> kept_ids;
  for (const auto& r : kept) kept_ids.insert(r.pair_id);
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["pair_id"] = r.pair_id;
    j["rouge_f"] = r.rouge_f;
    j["ce_nats"] = r.ce_nats;
    j["rank_rouge"] = r.rank_rouge;
    j["rank_ce"] = r.rank_ce;
    j["fused_score"] = r.fused_score;
    j["kept"] = kept_ids.count(r.pair_id) != 0;
    out << j.dump() << '\n';
  }
}

}  // namespace reflectkd
