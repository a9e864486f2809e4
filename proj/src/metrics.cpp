// SPDX-License-Identifier: Apache-2.0
#include "reflectkd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "reflectkd/error.hpp"

namespace reflectkd {

std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b) {
  if (a.size() < b.size()) std::swap(a, b);
  if (b.empty()) return 0;
  // prev/cur are rows of the DP table indexed by prefix length of b.
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(std::span<const TokenId> reference, std::span<const TokenId> candidate) {
  if (reference.empty() || candidate.empty()) return {};
  const auto lcs = static_cast<double>(lcs_length(reference, candidate));
  if (lcs == 0.0) return {};
  RougeScore s;
  s.precision = lcs / static_cast<double>(candidate.size());
  s.recall = lcs / static_cast<double>(reference.size());
  s.f_measure = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

CeResult token_cross_entropy(const Matrix& probs, std::span<const TokenId> targets) {
  if (static_cast<std::size_t>(probs.rows()) != targets.size()) {
    throw ValidationError("cross-entropy: " + std::to_string(probs.rows()) + " distributions for " +
                          std::to_string(targets.size()) + " targets");
  }
  CeResult r;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const auto row = probs.row(i);
    if ((row.array() < 0.0).any() || !row.allFinite()) {
      throw ValidationError("cross-entropy: position " + std::to_string(i) + " has an invalid probability");
    }
    if (std::abs(row.sum() - 1.0) > 1e-6) {
      throw ValidationError("cross-entropy: position " + std::to_string(i) + " does not sum to 1");
    }
    const TokenId t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= probs.cols()) throw ValidationError("cross-entropy: target id outside vocabulary");
    const double p = row(t);
    if (p <= 0.0) {
      throw DomainError("cross-entropy: zero probability at target token (position " + std::to_string(i) + ")");
    }
    r.total_nats -= std::log(p);
  }
  r.token_count = targets.size();
  r.mean_nats = r.token_count == 0 ? 0.0 : r.total_nats / static_cast<double>(r.token_count);
  return r;
}

}  // namespace reflectkd
