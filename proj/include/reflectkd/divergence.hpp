// SPDX-License-Identifier: Apache-2.0
//
// Temperature softmax, the six token-level distillation divergences, their
// gradients with respect to student logits, and the combined objective
//
//   L = alpha * L_ce + (1 - alpha) * L_kd,
//   L_kd = [tau^2] * sum_positions D(p_tau || q_tau).
//
// Throughout, p is the teacher distribution and q the student distribution.
#pragma once

#include <string>
#include <string_view>

#include "reflectkd/linalg.hpp"

namespace reflectkd {

/// Probabilities are clamped to at least this value and renormalized
/// before any logarithm is taken.
inline constexpr double kProbabilityFloor = 1e-12;

enum class DivergenceKind { kld, rkl, jsd, tvd, skl, srkl };

std::string_view to_string(DivergenceKind kind);
/// Accepts lowercase or uppercase names. Throws ValidationError otherwise.
DivergenceKind parse_divergence_kind(std::string_view name);

/// A floored, normalized probability vector.
class Distribution {
 public:
  /// Validates (finite, non-negative, sums to 1 within 1e-6), then floors
  /// and renormalizes.
  static Distribution from_probs(Vector probs);

  const Vector& probs() const noexcept { return probs_; }
  Eigen::Index size() const noexcept { return probs_.size(); }
  double operator[](Eigen::Index i) const { return probs_(i); }

 private:
  friend Distribution temp_softmax(const Eigen::Ref<const Vector>& logits, double tau);
  static Distribution floored(Vector probs);
  explicit Distribution(Vector probs) : probs_(std::move(probs)) {}
  Vector probs_;
};

struct DivergenceSpec {
  DivergenceKind kind = DivergenceKind::kld;
  /// Skew weight; only read by skl and srkl.
  double beta = 0.1;
  double tau = 1.0;
  bool tau_sq_scaling = false;

  void validate() const;
};

struct LossBreakdown {
  double ce = 0.0;
  double kd = 0.0;
  double total = 0.0;
  double alpha = 0.0;
};

/// softmax(logits / tau) with max subtraction, then floored.
Distribution temp_softmax(const Eigen::Ref<const Vector>& logits, double tau);

double kld(const Distribution& p, const Distribution& q);
/// sum q ln(q / p)
double rkl(const Distribution& p, const Distribution& q);
double jsd(const Distribution& p, const Distribution& q);
double tvd(const Distribution& p, const Distribution& q);
/// kld(p, beta p + (1 - beta) q)
double skl(const Distribution& p, const Distribution& q, double beta);
/// kld(q, (1 - beta) p + beta q)
double srkl(const Distribution& p, const Distribution& q, double beta);

double divergence(const DivergenceSpec& spec, const Distribution& p, const Distribution& q);

/// dD/dq for the divergence named by `spec`, holding p fixed.
Vector divergence_grad_q(const DivergenceSpec& spec, const Distribution& p, const Distribution& q);

/// Sum over rows of D(temp_softmax(teacher) || temp_softmax(student)),
/// times tau^2 when spec.tau_sq_scaling. Rows are positions.
double kd_loss(const Matrix& teacher_logits, const Matrix& student_logits, const DivergenceSpec& spec);

/// Gradient of kd_loss with respect to each student logit.
Matrix kd_grad(const Matrix& teacher_logits, const Matrix& student_logits, const DivergenceSpec& spec);

/// Per-position gradient (one row of kd_grad), exposed for the model backward pass.
Vector kd_grad_position(const Eigen::Ref<const Vector>& teacher_logits, const Eigen::Ref<const Vector>& student_logits,
                        const DivergenceSpec& spec);
double kd_loss_position(const Eigen::Ref<const Vector>& teacher_logits, const Eigen::Ref<const Vector>& student_logits,
                        const DivergenceSpec& spec);

/// total = alpha * ce + (1 - alpha) * kd. Throws ValidationError unless alpha is in [0, 1].
LossBreakdown total_loss(double ce, double kd, double alpha);

}  // namespace reflectkd
