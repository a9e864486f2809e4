// SPDX-License-Identifier: Apache-2.0
//
// Baby-step curriculum planning: partition of the curated, easiest-first id
// list into n stages, linear temperature / SFT-ratio schedules, and the
// step-budget and wall-clock cost arithmetic.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace reflectkd {

enum class CurriculumOrder { easy_to_hard, hard_to_easy };

std::string_view to_string(CurriculumOrder o);
CurriculumOrder parse_curriculum_order(std::string_view s);

/// How a schedule moves between its endpoints: as configured, held at its
/// first value, or run backwards (last value first).
enum class ScheduleShape { scheduled, fixed, reversed };

std::string_view to_string(ScheduleShape s);
ScheduleShape parse_schedule_shape(std::string_view s);

struct ScheduleConfig {
  std::size_t n_stages = 3;
  double tau0 = 1.0;
  double tau_n = 2.0;
  double alpha0 = 0.3;
  double alpha_n = 0.1;
  std::size_t epochs_per_stage = 8;
  ScheduleShape tau_shape = ScheduleShape::scheduled;
  ScheduleShape alpha_shape = ScheduleShape::scheduled;

  void validate() const;
};

struct StageParams {
  double tau = 1.0;
  double alpha = 0.0;
  std::size_t epochs = 0;

  friend bool operator==(const StageParams&, const StageParams&) = default;
};

struct CurriculumPlan {
  /// Delta_1..Delta_n in training order.
  std::vector<std::vector<std::string>> subsets;
  std::vector<StageParams> stage_params;

  std::size_t n_stages() const noexcept { return subsets.size(); }
  std::size_t curated_size() const;
};

/// Contiguous slices; the first (|curated| mod n) slices get one extra element.
/// Throws ValidationError if n == 0 or |curated| < n.
std::vector<std::vector<std::string>> partition(std::span<const std::string> curated, std::size_t n);

/// tau0 + (tau_n - tau0) (i - 1) / (n - 1), exact at both endpoints; tau_n when n == 1.
/// tau_shape substitutes the endpoints: fixed uses (tau0, tau0), reversed (tau_n, tau0).
double tau_at(std::size_t i, const ScheduleConfig& cfg);
/// alpha0 - (alpha0 - alpha_n) (i - 1) / (n - 1), exact at both endpoints; alpha_n when n == 1.
double alpha_at(std::size_t i, const ScheduleConfig& cfg);

/// Partitions `easiest_first` (reversed first for hard_to_easy) and attaches
/// per-stage (tau_i, alpha_i, epochs_per_stage).
CurriculumPlan make_plan(std::span<const std::string> easiest_first, const ScheduleConfig& cfg,
                         CurriculumOrder order = CurriculumOrder::easy_to_hard);

/// Delta_1 ++ ... ++ Delta_i (1-based i).
std::vector<std::string> cumulative_set(const CurriculumPlan& plan, std::size_t i);

/// sum_i epochs_i * |cumulative_set(i)|.
std::uint64_t planned_sample_visits(const CurriculumPlan& plan);

/// planned_sample_visits / (baseline_epochs * full_n).
double step_budget(const CurriculumPlan& plan, std::size_t baseline_epochs, std::size_t full_n);

/// Fractional time saved: 1 - (t_reflect + budget * t_baseline) / t_baseline.
double cost_model(double t_reflect, double t_train_baseline, double budget_fraction);

nlohmann::ordered_json plan_to_json(const CurriculumPlan& plan);
CurriculumPlan plan_from_json(const nlohmann::ordered_json& j);
void write_plan(const std::filesystem::path& path, const CurriculumPlan& plan);
CurriculumPlan read_plan(const std::filesystem::path& path);

}  // namespace reflectkd
