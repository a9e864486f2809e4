// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers for the tiny model.
#pragma once

#include <random>
#include <vector>

#include "oracles.hpp"
#include "reflectkd/tinylm.hpp"

namespace fixture {

using namespace reflectkd;

// Views every parameter of an LmTensors as one flat list of scalars.
inline std::vector<double*> flat(LmTensors& t) {
  std::vector<double*> out;
  auto add = [&](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
  };
  add(t.embedding);
  add(t.w1);
  add(t.b1);
  add(t.w2);
  add(t.b2);
  return out;
}

inline std::vector<TrainingExample> random_batch(std::mt19937_64& gen, const LmConfig& cfg, std::size_t n,
                                                 bool teacher) {
  std::uniform_int_distribution<TokenId> tok(0, static_cast<TokenId>(cfg.vocab_size) - 1);
  std::vector<TrainingExample> batch;
  for (std::size_t i = 0; i < n; ++i) {
    TrainingExample ex;
    ex.context.resize(cfg.context);
    for (auto& t : ex.context) t = tok(gen);
    ex.target = tok(gen);
    if (teacher) ex.teacher_logits = oracle::random_logits(gen, static_cast<Eigen::Index>(cfg.vocab_size));
    batch.push_back(std::move(ex));
  }
  return batch;
}

// Central differences of loss_and_grad(...).loss.total over every parameter,
// paired with the analytic gradient in the same flat order.
inline std::pair<Vector, Vector> network_gradients(TinyLmParams params, const std::vector<TrainingExample>& batch,
                                                   double alpha, const DivergenceSpec& spec, double h = 1e-5) {
  auto lg = loss_and_grad(params, batch, alpha, spec);
  auto analytic_ptrs = flat(lg.grad);
  auto param_ptrs = flat(params.weights);
  Vector analytic(static_cast<Eigen::Index>(param_ptrs.size()));
  Vector numeric(analytic.size());
  for (std::size_t i = 0; i < param_ptrs.size(); ++i) {
    const double orig = *param_ptrs[i];
    *param_ptrs[i] = orig + h;
    const double fp = loss_and_grad(params, batch, alpha, spec).loss.total;
    *param_ptrs[i] = orig - h;
    const double fm = loss_and_grad(params, batch, alpha, spec).loss.total;
    *param_ptrs[i] = orig;
    numeric(static_cast<Eigen::Index>(i)) = (fp - fm) / (2.0 * h);
    analytic(static_cast<Eigen::Index>(i)) = *analytic_ptrs[i];
  }
  return {analytic, numeric};
}

}  // namespace fixture
