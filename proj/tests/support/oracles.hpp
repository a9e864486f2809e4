// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used only by tests. Nothing here
// calls into the library's numerical code paths under test.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "reflectkd/corpus.hpp"
#include "reflectkd/linalg.hpp"

namespace oracle {

using reflectkd::TokenId;
using reflectkd::TokenSeq;

inline bool is_subsequence(const TokenSeq& sub, const TokenSeq& seq) {
  std::size_t j = 0;
  for (TokenId t : seq) {
    if (j < sub.size() && sub[j] == t) ++j;
  }
  return j == sub.size();
}

/// Longest common subsequence by enumerating every subsequence of `a`.
inline std::size_t lcs_brute(const TokenSeq& a, const TokenSeq& b) {
  std::size_t best = 0;
  const std::uint32_t total = 1u << a.size();
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    const auto len = static_cast<std::size_t>(__builtin_popcount(mask));
    if (len <= best) continue;
    TokenSeq sub;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (mask & (1u << i)) sub.push_back(a[i]);
    }
    if (is_subsequence(sub, b)) best = len;
  }
  return best;
}

/// Reciprocal rank fusion straight from the definition, with ranks computed
/// by counting how many items beat each item.
inline std::vector<double> rrf_direct(const std::vector<std::vector<double>>& metrics,
                                      const std::vector<bool>& higher_is_easier, const std::vector<std::string>& ids,
                                      int k) {
  const std::size_t n = ids.size();
  std::vector<double> fused(n, 0.0);
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t rank = 1;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double vi = metrics[m][i], vj = metrics[m][j];
        const bool beats = vi == vj ? ids[j] < ids[i] : (higher_is_easier[m] ? vj > vi : vj < vi);
        if (beats) ++rank;
      }
      fused[i] += 1.0 / (static_cast<double>(k) + static_cast<double>(rank));
    }
  }
  return fused;
}

/// Random probability vector with entries bounded away from zero.
inline reflectkd::Vector random_probs(std::mt19937_64& gen, Eigen::Index v, double min_weight = 0.02) {
  std::uniform_real_distribution<double> u(min_weight, 1.0);
  reflectkd::Vector p(v);
  for (Eigen::Index i = 0; i < v; ++i) p(i) = u(gen);
  return p / p.sum();
}

inline reflectkd::Vector random_logits(std::mt19937_64& gen, Eigen::Index v, double scale = 2.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  reflectkd::Vector z(v);
  for (Eigen::Index i = 0; i < v; ++i) z(i) = u(gen);
  return z;
}

/// Central finite difference of f at x along each coordinate of `x`.
template <typename F>
reflectkd::Vector central_difference(F&& f, reflectkd::Vector x, double h = 1e-5) {
  reflectkd::Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x(i);
    x(i) = orig + h;
    const double fp = f(x);
    x(i) = orig - h;
    const double fm = f(x);
    x(i) = orig;
    g(i) = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// ||a - b||_inf / max(||b||_inf, 1e-8).
inline double relative_error(const reflectkd::Vector& analytic, const reflectkd::Vector& numeric) {
  const double denom = std::max(numeric.cwiseAbs().maxCoeff(), 1e-8);
  return (analytic - numeric).cwiseAbs().maxCoeff() / denom;
}

/// Plain-loop softmax(z / tau) without flooring.
inline std::vector<double> softmax_plain(const std::vector<double>& z, double tau) {
  double m = z[0];
  for (double x : z) m = std::max(m, x);
  std::vector<double> e(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp((z[i] - m) / tau));
  for (double& x : e) x /= s;
  return e;
}

}  // namespace oracle
