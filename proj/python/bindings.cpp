// SPDX-License-Identifier: Apache-2.0
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "reflectkd/cli.hpp"
#include "reflectkd/curriculum.hpp"
#include "reflectkd/divergence.hpp"
#include "reflectkd/error.hpp"
#include "reflectkd/metrics.hpp"
#include "reflectkd/reflect.hpp"

namespace py = pybind11;
using namespace reflectkd;

namespace {

DivergenceSpec make_spec(const std::string& kind, double tau, double beta, bool tau_sq_scaling) {
  DivergenceSpec spec{parse_divergence_kind(kind), beta, tau, tau_sq_scaling};
  spec.validate();
  return spec;
}

ScheduleConfig make_schedule(std::size_t n_stages, double tau0, double tau_n, double alpha0, double alpha_n,
                             std::size_t epochs_per_stage) {
  ScheduleConfig c;
  c.n_stages = n_stages;
  c.tau0 = tau0;
  c.tau_n = tau_n;
  c.alpha0 = alpha0;
  c.alpha_n = alpha_n;
  c.epochs_per_stage = epochs_per_stage;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Selective reflection distillation toolkit (native core)";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);

  m.def("lcs_length", [](const TokenSeq& a, const TokenSeq& b) { return lcs_length(a, b); }, py::arg("a"),
        py::arg("b"));
  m.def(
      "rouge_l",
      [](const TokenSeq& reference, const TokenSeq& candidate) {
        const auto r = rouge_l(reference, candidate);
        return py::dict(py::arg("precision") = r.precision, py::arg("recall") = r.recall,
                        py::arg("f_measure") = r.f_measure);
      },
      py::arg("reference"), py::arg("candidate"));

  m.def(
      "temp_softmax", [](const Vector& logits, double tau) { return Vector(temp_softmax(logits, tau).probs()); },
      py::arg("logits"), py::arg("tau") = 1.0);
  m.def(
      "divergence",
      [](const std::string& kind, const Vector& p, const Vector& q, double beta) {
        return divergence(make_spec(kind, 1.0, beta, false), Distribution::from_probs(p), Distribution::from_probs(q));
      },
      py::arg("kind"), py::arg("p"), py::arg("q"), py::arg("beta") = 0.1);
  m.def(
      "kd_loss",
      [](const Matrix& teacher, const Matrix& student, const std::string& kind, double tau, double beta,
         bool tau_sq_scaling) { return kd_loss(teacher, student, make_spec(kind, tau, beta, tau_sq_scaling)); },
      py::arg("teacher_logits"), py::arg("student_logits"), py::arg("kind") = "kld", py::arg("tau") = 1.0,
      py::arg("beta") = 0.1, py::arg("tau_sq_scaling") = true);
  m.def(
      "kd_grad",
      [](const Matrix& teacher, const Matrix& student, const std::string& kind, double tau, double beta,
         bool tau_sq_scaling) { return kd_grad(teacher, student, make_spec(kind, tau, beta, tau_sq_scaling)); },
      py::arg("teacher_logits"), py::arg("student_logits"), py::arg("kind") = "kld", py::arg("tau") = 1.0,
      py::arg("beta") = 0.1, py::arg("tau_sq_scaling") = true);

  m.def(
      "rrf_fuse", [](const std::vector<std::vector<std::size_t>>& ranks, int k) { return rrf_fuse(ranks, k); },
      py::arg("rank_lists"), py::arg("k") = 60);
  m.def("retained_count", &retained_count, py::arg("n"), py::arg("lambda_"));

  m.def(
      "partition", [](const std::vector<std::string>& ids, std::size_t n) { return partition(ids, n); },
      py::arg("curated"), py::arg("n"));
  m.def(
      "schedule",
      [](std::size_t n_stages, double tau0, double tau_n, double alpha0, double alpha_n) {
        const auto c = make_schedule(n_stages, tau0, tau_n, alpha0, alpha_n, 1);
        std::vector<std::pair<double, double>> out;
        for (std::size_t i = 1; i <= n_stages; ++i) out.emplace_back(tau_at(i, c), alpha_at(i, c));
        return out;
      },
      py::arg("n_stages") = 3, py::arg("tau0") = 1.0, py::arg("tau_n") = 2.0, py::arg("alpha0") = 0.3,
      py::arg("alpha_n") = 0.1, "(tau_i, alpha_i) for every stage");
  m.def(
      "step_budget",
      [](std::size_t curated, std::size_t full_n, std::size_t n_stages, std::size_t epochs_per_stage,
         std::size_t baseline_epochs) {
        std::vector<std::string> ids(curated);
        for (std::size_t i = 0; i < curated; ++i) ids[i] = std::to_string(i);
        ScheduleConfig c;
        c.n_stages = n_stages;
        c.epochs_per_stage = epochs_per_stage;
        return step_budget(make_plan(ids, c), baseline_epochs, full_n);
      },
      py::arg("curated"), py::arg("full_n"), py::arg("n_stages") = 3, py::arg("epochs_per_stage") = 8,
      py::arg("baseline_epochs") = 20);
  m.def("cost_model", &cost_model, py::arg("reflect_seconds"), py::arg("baseline_seconds"), py::arg("budget"));

  m.def(
      "generate_synthetic",
      [](const std::string& family, std::size_t count, std::uint64_t seed, std::size_t alphabet, std::size_t min_len,
         std::size_t max_len, double noise) {
        py::list out;
        for (const auto& s : generate_synthetic_samples({family, alphabet, min_len, max_len, noise}, count, seed)) {
          out.append(py::dict(py::arg("id") = s.pair.id, py::arg("prompt") = s.pair.prompt,
                              py::arg("response") = s.pair.response, py::arg("difficulty") = s.difficulty));
        }
        return out;
      },
      py::arg("template") = "mixed", py::arg("count") = 100, py::arg("seed") = 0, py::arg("alphabet") = 8,
      py::arg("min_len") = 1, py::arg("max_len") = 6, py::arg("noise") = 0.0);

  m.def(
      "effective_config",
      [](const std::string& text) {
        auto cfg = parse_config(text);
        finalize_config(cfg);
        return config_to_text(cfg);
      },
      py::arg("text"), "Parses key=value text and returns the fully resolved configuration as text.");
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code = 0;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI command in-process; returns (exit_code, stdout, stderr).");
}
