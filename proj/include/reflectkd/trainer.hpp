// SPDX-License-Identifier: Apache-2.0
//
// Training orchestration: teacher training, student warm-up, the staged
// reflection-curated distillation run, full-data baselines (off- and
// on-policy), and evaluation.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "reflectkd/corpus.hpp"
#include "reflectkd/curriculum.hpp"
#include "reflectkd/divergence.hpp"
#include "reflectkd/reflect.hpp"
#include "reflectkd/tinylm.hpp"

namespace reflectkd {

enum class RunMode { srd, baseline_offpolicy, baseline_onpolicy, srd_onpolicy };

std::string_view to_string(RunMode m);
/// Also accepts "baseline" for baseline_offpolicy.
RunMode parse_run_mode(std::string_view s);
bool is_on_policy(RunMode m);
bool is_curated(RunMode m);

struct OptimConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  /// Prompt/response pairs per mini-batch.
  std::size_t batch_size = 16;
  /// Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
};

struct RunConfig {
  CurationConfig curation;
  ScheduleConfig schedule;
  /// kind, beta and tau_sq_scaling; tau is set per stage.
  DivergenceSpec divergence{DivergenceKind::kld, 0.1, 1.0, true};
  RunMode mode = RunMode::srd;
  CurriculumOrder order = CurriculumOrder::easy_to_hard;
  double sgo_mix = 0.5;
  std::uint64_t seed = 1;
  OptimConfig optim;
  LmConfig teacher_cfg{0, 8, 32, 64, 0};
  LmConfig student_cfg{0, 8, 8, 16, 0};
  std::size_t baseline_epochs = 20;
  double baseline_tau = 1.0;
  double baseline_alpha = 0.3;
  std::size_t teacher_epochs = 20;
  /// SFT epochs applied to a fresh student before reflection; stands in for
  /// the pretrained student every run starts from.
  std::size_t warmup_epochs = 2;
  /// Early stop within a stage after this many epochs without valid-CE
  /// improvement; 0 trains the fixed epoch count.
  std::size_t patience = 0;
  bool teacher_cache = false;
  /// Return the student with the best validation ROUGE-L over every epoch of
  /// the run (ties keep the earlier one) instead of the final parameters.
  bool select_best = true;
  /// Decode length for evaluation and on-policy samples.
  std::size_t max_len = 32;
  /// Worker threads for reflection and evaluation; 0 = REFLECTKD_THREADS / hardware.
  std::size_t threads = 0;

  void validate() const;
};

nlohmann::ordered_json to_json(const RunConfig& cfg);

struct EpochRecord {
  std::size_t stage = 0;
  std::size_t epoch = 0;
  double tau = 0.0;
  double alpha = 0.0;
  double train_ce = 0.0;
  double train_kd = 0.0;
  double train_loss = 0.0;
  std::optional<double> valid_ce;
  std::optional<double> valid_rouge_l;
  std::uint64_t cumulative_visits = 0;
  double wall_seconds = 0.0;
};

struct TrainingReport {
  RunMode mode = RunMode::srd;
  std::vector<EpochRecord> epochs;
  std::uint64_t sample_visits = 0;
  std::uint64_t baseline_visits = 0;
  double budget_fraction = 0.0;
  std::size_t full_size = 0;
  std::size_t curated_size = 0;
  std::size_t sgo_replaced = 0;
  std::size_t sgo_considered = 0;
  double test_ce = 0.0;
  double test_rouge_l = 0.0;
  std::optional<double> final_valid_ce;
  /// Stage and epoch of the returned student; (0, 0) is the initial student.
  std::size_t selected_stage = 0;
  std::size_t selected_epoch = 0;
  std::optional<double> selected_valid_rouge_l;
  double reflect_seconds = 0.0;
  double train_seconds = 0.0;
  double eval_seconds = 0.0;
  std::vector<ReflectionRecord> reflection;
  std::vector<ReflectionRecord> curated;
  std::optional<CurriculumPlan> plan;
  nlohmann::ordered_json config;
};

/// Per-stage×epoch CSV. Header:
/// stage,epoch,tau,alpha,train_ce,train_kd,train_loss,valid_ce,valid_rouge_l,cumulative_visits,wall_seconds
void write_report_csv(std::ostream& out, const TrainingReport& report);
/// Summary document; measured times live under "timing" only.
nlohmann::ordered_json report_summary(const TrainingReport& report);

/// Memoized teacher logits keyed by context. Only valid for one fixed teacher.
class TeacherCache {
 public:
  const Vector& logits(const TinyLmParams& teacher, const TokenSeq& context);
  std::size_t size() const noexcept { return map_.size(); }

 private:
  struct Hash {
    std::size_t operator()(const TokenSeq& s) const noexcept;
  };
  std::unordered_map<TokenSeq, Vector, Hash> map_;
};

struct StageSpec {
  std::size_t stage = 1;
  double tau = 1.0;
  double alpha = 1.0;
  std::size_t epochs = 0;
};

/// Loop settings shared by teacher training, warm-up and KD stages.
struct LoopSettings {
  std::uint64_t seed = 1;
  OptimConfig optim;
  DivergenceSpec divergence{DivergenceKind::kld, 0.1, 1.0, true};
  bool on_policy = false;
  double sgo_mix = 0.5;
  std::size_t max_len = 32;
  std::size_t patience = 0;
};

LoopSettings loop_settings(const RunConfig& cfg);

struct StageContext {
  const Dataset* valid = nullptr;
  TrainingReport* report = nullptr;
  TeacherCache* cache = nullptr;
  std::size_t threads = 1;
  /// When set (and `valid` is non-empty), receives the parameters of the
  /// epoch with the lowest validation CE.
  TinyLmParams* best = nullptr;
  /// Called after every epoch's bookkeeping with the current student; may
  /// write valid_rouge_l into the epoch record just pushed to `report`.
  std::function<void(const TinyLmParams&, EpochRecord*)> on_epoch_end;
};

/// Trains `student` on data[indices] for stage.epochs epochs. Each epoch
/// visits the indices (sorted, then shuffled with a seed derived from
/// (settings.seed, stage, epoch)) in mini-batches. Teacher logits are taken
/// at every scored position; `teacher` may be null only when alpha == 1.
/// Returns the number of sample visits.
std::uint64_t kd_train_stage(TinyLmParams& student, OptState& opt, const TinyLmParams* teacher, const Dataset& data,
                             std::span<const std::size_t> indices, const StageSpec& stage,
                             const LoopSettings& settings, StageContext ctx = {});

/// CE-only training of a fresh teacher. With a non-empty `valid` set the
/// epoch with the lowest validation CE is returned instead of the last one.
TinyLmParams train_teacher(const Dataset& train, const LmConfig& teacher_cfg, std::size_t epochs, std::uint64_t seed,
                           const OptimConfig& optim, const Dataset* valid = nullptr);

/// Fresh student plus `warmup_epochs` of SFT on `train`.
TinyLmParams prepare_student(const Dataset& train, const LmConfig& student_cfg, std::size_t warmup_epochs,
                             std::uint64_t seed, const OptimConfig& optim);

/// Replaces each response, with probability sgo_mix, by a temperature-1
/// sample from the student. Per-sample coins are derived from (seed, i).
std::vector<PromptResponsePair> mix_on_policy(std::span<const PromptResponsePair> batch, const TinyLmParams& student,
                                              double sgo_mix, std::uint64_t seed, std::size_t max_len,
                                              std::size_t* replaced = nullptr);

struct EvalResult {
  double mean_ce = 0.0;
  double mean_rouge_l = 0.0;
  std::size_t pairs = 0;
  std::size_t tokens = 0;
};

/// Token-level mean CE over responses + EOS; 0 for an empty dataset.
double mean_token_ce(const TinyLmParams& model, const Dataset& data, std::size_t threads = 1);

/// Token-level mean CE (responses + EOS) and mean ROUGE-L F of greedy decodes.
EvalResult evaluate(const TinyLmParams& model, const Dataset& test, std::size_t max_len, std::size_t threads = 1);

struct RunResult {
  TinyLmParams student;
  TrainingReport report;
};

/// Reflection with the initial student, selection, curriculum partition and
/// staged training on cumulative subsets with the scheduled (tau_i, alpha_i).
RunResult run_srd(const DatasetSplits& splits, const TinyLmParams& teacher, const TinyLmParams& initial_student,
                  const RunConfig& cfg);

/// Full-data training for baseline_epochs at (baseline_tau, baseline_alpha).
RunResult run_baseline(const DatasetSplits& splits, const TinyLmParams& teacher, const TinyLmParams& initial_student,
                       const RunConfig& cfg);

/// Dispatches on cfg.mode.
RunResult run(const DatasetSplits& splits, const TinyLmParams& teacher, const TinyLmParams& initial_student,
              const RunConfig& cfg);

struct PipelineResult {
  TinyLmParams teacher;
  TinyLmParams initial_student;
  RunResult run;
};

/// Teacher training (unless given), student warm-up (unless given), then run().
/// Vocabulary size must already be set in cfg.teacher_cfg / cfg.student_cfg.
PipelineResult run_pipeline(const DatasetSplits& splits, const RunConfig& cfg, const TinyLmParams* teacher = nullptr,
                            const TinyLmParams* initial_student = nullptr);

}  // namespace reflectkd
