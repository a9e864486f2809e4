// SPDX-License-Identifier: Apache-2.0
#include "reflectkd/divergence.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "reflectkd/error.hpp"

namespace reflectkd {

std::string_view to_string(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::kld: return "kld";
    case DivergenceKind::rkl: return "rkl";
    case DivergenceKind::jsd: return "jsd";
    case DivergenceKind::tvd: return "tvd";
    case DivergenceKind::skl: return "skl";
    case DivergenceKind::srkl: return "srkl";
  }
  return "?";
}

DivergenceKind parse_divergence_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  for (auto k : {DivergenceKind::kld, DivergenceKind::rkl, DivergenceKind::jsd, DivergenceKind::tvd,
                 DivergenceKind::skl, DivergenceKind::srkl}) {
    if (lower == to_string(k)) return k;
  }
  throw ValidationError("unknown divergence '" + std::string(name) + "'");
}

Distribution Distribution::floored(Vector probs) {
  probs = probs.cwiseMax(kProbabilityFloor);
  probs /= probs.sum();
  return Distribution(std::move(probs));
}

Distribution Distribution::from_probs(Vector probs) {
  if (probs.size() == 0) throw ValidationError("distribution is empty");
  if (!probs.allFinite() || (probs.array() < 0.0).any()) {
    throw ValidationError("distribution has negative or non-finite entries");
  }
  if (std::abs(probs.sum() - 1.0) > 1e-6) throw ValidationError("distribution does not sum to 1");
  return floored(std::move(probs));
}

void DivergenceSpec::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ValidationError("temperature must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ValidationError("skew beta must be in [0, 1]");
}

Distribution temp_softmax(const Eigen::Ref<const Vector>& logits, double tau) {
  if (!(tau > 0.0)) throw ValidationError("temperature must be positive");
  if (logits.size() == 0) throw ValidationError("empty logits");
  if (!logits.allFinite()) throw ValidationError("non-finite logits");
  Vector e = ((logits.array() - logits.maxCoeff()) / tau).exp();
  e /= e.sum();
  return Distribution::floored(std::move(e));
}

namespace {

void check_pair(const Distribution& p, const Distribution& q) {
  if (p.size() != q.size()) throw ValidationError("distributions have different sizes");
}

// sum a ln(a / b) for plain vectors; callers guarantee b > 0.
double kl_raw(const Vector& a, const Vector& b) {
  return (a.array() * (a.array() / b.array()).log()).sum();
}

}  // namespace

double kld(const Distribution& p, const Distribution& q) {
  check_pair(p, q);
  return kl_raw(p.probs(), q.probs());
}

double rkl(const Distribution& p, const Distribution& q) {
  check_pair(p, q);
  return kl_raw(q.probs(), p.probs());
}

double jsd(const Distribution& p, const Distribution& q) {
  check_pair(p, q);
  const Vector m = 0.5 * p.probs() + 0.5 * q.probs();
  return 0.5 * kl_raw(p.probs(), m) + 0.5 * kl_raw(q.probs(), m);
}

double tvd(const Distribution& p, const Distribution& q) {
  check_pair(p, q);
  return 0.5 * (p.probs() - q.probs()).cwiseAbs().sum();
}

double skl(const Distribution& p, const Distribution& q, double beta) {
  check_pair(p, q);
  if (beta == 1.0) return 0.0;
  const Vector r = beta * p.probs() + (1.0 - beta) * q.probs();
  return kl_raw(p.probs(), r);
}

double srkl(const Distribution& p, const Distribution& q, double beta) {
  check_pair(p, q);
  if (beta == 1.0) return 0.0;
  const Vector r = (1.0 - beta) * p.probs() + beta * q.probs();
  return kl_raw(q.probs(), r);
}

double divergence(const DivergenceSpec& spec, const Distribution& p, const Distribution& q) {
  switch (spec.kind) {
    case DivergenceKind::kld: return kld(p, q);
    case DivergenceKind::rkl: return rkl(p, q);
    case DivergenceKind::jsd: return jsd(p, q);
    case DivergenceKind::tvd: return tvd(p, q);
    case DivergenceKind::skl: return skl(p, q, spec.beta);
    case DivergenceKind::srkl: return srkl(p, q, spec.beta);
  }
  return 0.0;
}

Vector divergence_grad_q(const DivergenceSpec& spec, const Distribution& p, const Distribution& q) {
  check_pair(p, q);
  const auto pa = p.probs().array();
  const auto qa = q.probs().array();
  const double beta = spec.beta;
  switch (spec.kind) {
    case DivergenceKind::kld:
      return -(pa / qa).matrix();
    case DivergenceKind::rkl:
      return ((qa / pa).log() + 1.0).matrix();
    case DivergenceKind::jsd: {
      const auto m = 0.5 * pa + 0.5 * qa;
      return (0.5 * (qa / m).log()).matrix();
    }
    case DivergenceKind::tvd:
      return (0.5 * (qa - pa).sign()).matrix();
    case DivergenceKind::skl: {
      if (beta == 1.0) return Vector::Zero(q.size());
      const auto r = beta * pa + (1.0 - beta) * qa;
      return (-(1.0 - beta) * pa / r).matrix();
    }
    case DivergenceKind::srkl: {
      if (beta == 1.0) return Vector::Zero(q.size());
      const auto r = (1.0 - beta) * pa + beta * qa;
      return ((qa / r).log() + 1.0 - beta * qa / r).matrix();
    }
  }
  return Vector::Zero(q.size());
}

double kd_loss_position(const Eigen::Ref<const Vector>& teacher_logits, const Eigen::Ref<const Vector>& student_logits,
                        const DivergenceSpec& spec) {
  if (teacher_logits.size() != student_logits.size()) throw ValidationError("teacher/student vocabulary mismatch");
  const auto p = temp_softmax(teacher_logits, spec.tau);
  const auto q = temp_softmax(student_logits, spec.tau);
  const double d = divergence(spec, p, q);
  return spec.tau_sq_scaling ? spec.tau * spec.tau * d : d;
}

Vector kd_grad_position(const Eigen::Ref<const Vector>& teacher_logits, const Eigen::Ref<const Vector>& student_logits,
                        const DivergenceSpec& spec) {
  if (teacher_logits.size() != student_logits.size()) throw ValidationError("teacher/student vocabulary mismatch");
  const auto p = temp_softmax(teacher_logits, spec.tau);
  const auto q = temp_softmax(student_logits, spec.tau);
  const Vector g = divergence_grad_q(spec, p, q);
  // Softmax Jacobian: dq_j/dz_m = q_j (delta_jm - q_m) / tau.
  const Vector& qv = q.probs();
  Vector dz = qv.cwiseProduct((g.array() - qv.dot(g)).matrix()) / spec.tau;
  if (spec.tau_sq_scaling) dz *= spec.tau * spec.tau;
  return dz;
}

namespace {

void check_shapes(const Matrix& t, const Matrix& s) {
  if (t.rows() != s.rows() || t.cols() != s.cols()) {
    throw ValidationError("kd: teacher logits " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                          " vs student logits " + std::to_string(s.rows()) + "x" + std::to_string(s.cols()));
  }
}

}  // namespace

double kd_loss(const Matrix& teacher_logits, const Matrix& student_logits, const DivergenceSpec& spec) {
  spec.validate();
  check_shapes(teacher_logits, student_logits);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < teacher_logits.rows(); ++i) {
    sum += kd_loss_position(teacher_logits.row(i).transpose(), student_logits.row(i).transpose(), spec);
  }
  return sum;
}

Matrix kd_grad(const Matrix& teacher_logits, const Matrix& student_logits, const DivergenceSpec& spec) {
  spec.validate();
  check_shapes(teacher_logits, student_logits);
  Matrix out(student_logits.rows(), student_logits.cols());
  for (Eigen::Index i = 0; i < teacher_logits.rows(); ++i) {
    out.row(i) = kd_grad_position(teacher_logits.row(i).transpose(), student_logits.row(i).transpose(), spec).transpose();
  }
  return out;
}

LossBreakdown total_loss(double ce, double kd, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in [0, 1]");
  return {ce, kd, alpha * ce + (1.0 - alpha) * kd, alpha};
}

}  // namespace reflectkd
