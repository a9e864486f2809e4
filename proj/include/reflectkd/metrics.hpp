// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>

#include "reflectkd/corpus.hpp"
#include "reflectkd/linalg.hpp"

namespace reflectkd {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f_measure = 0.0;
};

struct CeResult {
  double total_nats = 0.0;
  double mean_nats = 0.0;
  std::size_t token_count = 0;
};

/// Longest common subsequence length, O(|a|*|b|) time, O(min) memory.
std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b);

/// ROUGE-L with balanced F1. Empty reference or candidate gives all zeros.
RougeScore rouge_l(std::span<const TokenId> reference, std::span<const TokenId> candidate);

/// -sum_i ln probs(i, targets[i]) in nats. Rows of `probs` are per-position
/// distributions over the vocabulary.
///
/// Throws ValidationError on shape mismatch, negative entries or rows not
/// summing to 1 within 1e-6; DomainError when a target has probability 0.
CeResult token_cross_entropy(const Matrix& probs, std::span<const TokenId> targets);

}  // namespace reflectkd
