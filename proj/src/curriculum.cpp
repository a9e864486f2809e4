// SPDX-License-Identifier: Apache-2.0
#include "reflectkd/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include "reflectkd/error.hpp"

namespace reflectkd {

std::string_view to_string(CurriculumOrder o) {
  return o == CurriculumOrder::easy_to_hard ? "easy_to_hard" : "hard_to_easy";
}

CurriculumOrder parse_curriculum_order(std::string_view s) {
  if (s == "easy_to_hard") return CurriculumOrder::easy_to_hard;
  if (s == "hard_to_easy") return CurriculumOrder::hard_to_easy;
  throw ValidationError("unknown order '" + std::string(s) + "' (expected easy_to_hard or hard_to_easy)");
}

std::string_view to_string(ScheduleShape s) {
  switch (s) {
    case ScheduleShape::fixed: return "fixed";
    case ScheduleShape::reversed: return "reversed";
    case ScheduleShape::scheduled: break;
  }
  return "scheduled";
}

ScheduleShape parse_schedule_shape(std::string_view s) {
  if (s == "scheduled") return ScheduleShape::scheduled;
  if (s == "fixed") return ScheduleShape::fixed;
  if (s == "reversed") return ScheduleShape::reversed;
  throw ValidationError("unknown schedule shape '" + std::string(s) + "' (expected scheduled, fixed or reversed)");
}

void ScheduleConfig::validate() const {
  if (n_stages < 1) throw ValidationError("n_stages must be >= 1");
  if (!(tau0 > 0.0) || !(tau_n > 0.0)) throw ValidationError("temperatures must be positive");
  if (!(alpha0 >= 0.0 && alpha0 <= 1.0) || !(alpha_n >= 0.0 && alpha_n <= 1.0)) {
    throw ValidationError("alpha0 and alpha_n must be in [0, 1]");
  }
  if (epochs_per_stage < 1) throw ValidationError("epochs_per_stage must be >= 1");
}

std::size_t CurriculumPlan::curated_size() const {
  std::size_t n = 0;
  for (const auto& s : subsets) n += s.size();
  return n;
}

std::vector<std::vector<std::string>> partition(std::span<const std::string> curated, std::size_t n) {
  if (n == 0) throw ValidationError("partition: n must be >= 1");
  if (curated.size() < n) {
    throw ValidationError("partition: " + std::to_string(curated.size()) + " items cannot fill " +
                          std::to_string(n) + " subsets");
  }
  const std::size_t base = curated.size() / n;
  const std::size_t extra = curated.size() % n;
  std::vector<std::vector<std::string>> out(n);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    out[s].assign(curated.begin() + static_cast<std::ptrdiff_t>(pos),
                  curated.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

namespace {

void check_stage(std::size_t i, std::size_t n) {
  if (i < 1 || i > n) {
    throw ValidationError("stage index " + std::to_string(i) + " outside 1.." + std::to_string(n));
  }
}

std::pair<double, double> endpoints(double first, double last, ScheduleShape shape) {
  switch (shape) {
    case ScheduleShape::fixed: return {first, first};
    case ScheduleShape::reversed: return {last, first};
    case ScheduleShape::scheduled: break;
  }
  return {first, last};
}

}  // namespace

double tau_at(std::size_t i, const ScheduleConfig& cfg) {
  check_stage(i, cfg.n_stages);
  const auto [t0, tn] = endpoints(cfg.tau0, cfg.tau_n, cfg.tau_shape);
  if (cfg.n_stages == 1 || i == cfg.n_stages) return tn;
  if (i == 1) return t0;
  return t0 + (tn - t0) * static_cast<double>(i - 1) / static_cast<double>(cfg.n_stages - 1);
}

double alpha_at(std::size_t i, const ScheduleConfig& cfg) {
  check_stage(i, cfg.n_stages);
  const auto [a0, an] = endpoints(cfg.alpha0, cfg.alpha_n, cfg.alpha_shape);
  if (cfg.n_stages == 1 || i == cfg.n_stages) return an;
  if (i == 1) return a0;
  return a0 - (a0 - an) * static_cast<double>(i - 1) / static_cast<double>(cfg.n_stages - 1);
}

CurriculumPlan make_plan(std::span<const std::string> easiest_first, const ScheduleConfig& cfg, CurriculumOrder order) {
  cfg.validate();
  std::vector<std::string> ordered(easiest_first.begin(), easiest_first.end());
  if (order == CurriculumOrder::hard_to_easy) std::reverse(ordered.begin(), ordered.end());
  CurriculumPlan plan;
  plan.subsets = partition(ordered, cfg.n_stages);
  for (std::size_t i = 1; i <= cfg.n_stages; ++i) {
    plan.stage_params.push_back({tau_at(i, cfg), alpha_at(i, cfg), cfg.epochs_per_stage});
  }
  return plan;
}

std::vector<std::string> cumulative_set(const CurriculumPlan& plan, std::size_t i) {
  check_stage(i, plan.n_stages());
  std::vector<std::string> out;
  for (std::size_t s = 0; s < i; ++s) out.insert(out.end(), plan.subsets[s].begin(), plan.subsets[s].end());
  return out;
}

std::uint64_t planned_sample_visits(const CurriculumPlan& plan) {
  if (plan.stage_params.size() != plan.subsets.size()) throw ValidationError("plan has mismatched stage parameters");
  std::uint64_t visits = 0;
  std::uint64_t cumulative = 0;
  for (std::size_t s = 0; s < plan.subsets.size(); ++s) {
    cumulative += plan.subsets[s].size();
    visits += plan.stage_params[s].epochs * cumulative;
  }
  return visits;
}

double step_budget(const CurriculumPlan& plan, std::size_t baseline_epochs, std::size_t full_n) {
  if (baseline_epochs == 0 || full_n == 0) throw ValidationError("step_budget: zero baseline epochs or dataset size");
  return static_cast<double>(planned_sample_visits(plan)) /
         (static_cast<double>(baseline_epochs) * static_cast<double>(full_n));
}

double cost_model(double t_reflect, double t_train_baseline, double budget_fraction) {
  if (!(t_train_baseline > 0.0)) throw ValidationError("cost_model: baseline time must be positive");
  if (!(t_reflect >= 0.0)) throw ValidationError("cost_model: reflection time must be non-negative");
  if (!(budget_fraction > 0.0 && budget_fraction <= 1.0)) throw ValidationError("cost_model: budget must be in (0, 1]");
  return 1.0 - (t_reflect + budget_fraction * t_train_baseline) / t_train_baseline;
}

nlohmann::ordered_json plan_to_json(const CurriculumPlan& plan) {
  nlohmann::ordered_json j;
  j["n_stages"] = plan.n_stages();
  j["stages"] = nlohmann::ordered_json::array();
  for (std::size_t s = 0; s < plan.subsets.size(); ++s) {
    nlohmann::ordered_json st;
    st["stage"] = s + 1;
    st["tau"] = plan.stage_params[s].tau;
    st["alpha"] = plan.stage_params[s].alpha;
    st["epochs"] = plan.stage_params[s].epochs;
    st["ids"] = plan.subsets[s];
    j["stages"].push_back(std::move(st));
  }
  return j;
}

CurriculumPlan plan_from_json(const nlohmann::ordered_json& j) {
  try {
    CurriculumPlan plan;
    for (const auto& st : j.at("stages")) {
      plan.subsets.push_back(st.at("ids").get<std::vector<std::string>>());
      plan.stage_params.push_back(
          {st.at("tau").get<double>(), st.at("alpha").get<double>(), st.at("epochs").get<std::size_t>()});
    }
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed plan: ") + e.what());
  }
}

void write_plan(const std::filesystem::path& path, const CurriculumPlan& plan) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write plan " + path.string());
  out << plan_to_json(plan).dump(2) << '\n';
}

CurriculumPlan read_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open plan " + path.string());
  try {
    return plan_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed plan: ") + e.what());
  }
}

}  // namespace reflectkd
