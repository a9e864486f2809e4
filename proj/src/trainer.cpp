// SPDX-License-Identifier: Apache-2.0
#include "reflectkd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "reflectkd/error.hpp"
#include "reflectkd/format.hpp"
#include "reflectkd/metrics.hpp"
#include "reflectkd/parallel.hpp"
#include "reflectkd/rng.hpp"

namespace reflectkd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Domain tags for derive_seed so that streams never collide.
constexpr std::uint64_t kTagTeacher = 0x7465616368ULL;
constexpr std::uint64_t kTagStudent = 0x73747564ULL;
constexpr std::uint64_t kTagWarmup = 0x7761726dULL;
constexpr std::uint64_t kTagEpoch = 0x65706f63ULL;
constexpr std::uint64_t kTagSgo = 0x73676fULL;

std::size_t resolve_threads(std::size_t t) { return t == 0 ? worker_threads() : t; }

}  // namespace

std::string_view to_string(RunMode m) {
  switch (m) {
    case RunMode::srd: return "srd";
    case RunMode::baseline_offpolicy: return "baseline_offpolicy";
    case RunMode::baseline_onpolicy: return "baseline_onpolicy";
    case RunMode::srd_onpolicy: return "srd_onpolicy";
  }
  return "?";
}

RunMode parse_run_mode(std::string_view s) {
  if (s == "srd") return RunMode::srd;
  if (s == "baseline" || s == "baseline_offpolicy") return RunMode::baseline_offpolicy;
  if (s == "baseline_onpolicy") return RunMode::baseline_onpolicy;
  if (s == "srd_onpolicy") return RunMode::srd_onpolicy;
  throw ValidationError("unknown mode '" + std::string(s) +
                        "' (expected srd, baseline_offpolicy, baseline_onpolicy or srd_onpolicy)");
}

bool is_on_policy(RunMode m) { return m == RunMode::baseline_onpolicy || m == RunMode::srd_onpolicy; }
bool is_curated(RunMode m) { return m == RunMode::srd || m == RunMode::srd_onpolicy; }

void RunConfig::validate() const {
  curation.validate();
  schedule.validate();
  divergence.validate();
  if (!(sgo_mix >= 0.0 && sgo_mix <= 1.0)) throw ValidationError("sgo_mix must be in [0, 1]");
  if (!(optim.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(optim.momentum >= 0.0 && optim.momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
  if (optim.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(optim.clip_norm >= 0.0)) throw ValidationError("clip_norm must be >= 0");
  if (baseline_epochs < 1) throw ValidationError("baseline_epochs must be >= 1");
  if (!(baseline_tau > 0.0)) throw ValidationError("baseline_tau must be positive");
  if (!(baseline_alpha >= 0.0 && baseline_alpha <= 1.0)) throw ValidationError("baseline_alpha must be in [0, 1]");
  if (max_len < 1) throw ValidationError("max_len must be >= 1");
  if (teacher_cfg.context != student_cfg.context) {
    throw ValidationError("teacher and student must share the context length");
  }
}

nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["lambda"] = c.curation.lambda;
  j["rrf_k"] = c.curation.rrf_k;
  j["ranking"] = to_string(c.curation.ranking);
  j["ce_source"] = to_string(c.curation.ce_source);
  j["reflect_decode"] = to_string(c.curation.decode.mode);
  j["reflect_temperature"] = c.curation.decode.temperature;
  j["reflect_seed"] = c.curation.decode.seed;
  j["max_prompt_tokens"] = c.curation.decode.max_prompt_tokens;
  j["n_stages"] = c.schedule.n_stages;
  j["tau0"] = c.schedule.tau0;
  j["tau_n"] = c.schedule.tau_n;
  j["alpha0"] = c.schedule.alpha0;
  j["alpha_n"] = c.schedule.alpha_n;
  j["epochs_per_stage"] = c.schedule.epochs_per_stage;
  j["tau_schedule"] = to_string(c.schedule.tau_shape);
  j["alpha_schedule"] = to_string(c.schedule.alpha_shape);
  j["order"] = to_string(c.order);
  j["divergence"] = to_string(c.divergence.kind);
  j["beta"] = c.divergence.beta;
  j["tau_sq_scaling"] = c.divergence.tau_sq_scaling;
  j["sgo_mix"] = c.sgo_mix;
  j["learning_rate"] = c.optim.learning_rate;
  j["momentum"] = c.optim.momentum;
  j["batch_size"] = c.optim.batch_size;
  j["clip_norm"] = c.optim.clip_norm;
  j["baseline_epochs"] = c.baseline_epochs;
  j["baseline_tau"] = c.baseline_tau;
  j["baseline_alpha"] = c.baseline_alpha;
  j["teacher_epochs"] = c.teacher_epochs;
  j["warmup_epochs"] = c.warmup_epochs;
  j["patience"] = c.patience;
  j["select_best"] = c.select_best;
  j["teacher_cache"] = c.teacher_cache;
  j["max_len"] = c.max_len;
  j["context"] = c.student_cfg.context;
  j["teacher_embed_dim"] = c.teacher_cfg.embed_dim;
  j["teacher_hidden_dim"] = c.teacher_cfg.hidden_dim;
  j["student_embed_dim"] = c.student_cfg.embed_dim;
  j["student_hidden_dim"] = c.student_cfg.hidden_dim;
  return j;
}

// --- reports -------------------------------------------------------------------

void write_report_csv(std::ostream& out, const TrainingReport& report) {
  out << "stage,epoch,tau,alpha,train_ce,train_kd,train_loss,valid_ce,valid_rouge_l,cumulative_visits,wall_seconds\n";
  for (const auto& e : report.epochs) {
    out << e.stage << ',' << e.epoch << ',' << format_real(e.tau) << ',' << format_real(e.alpha) << ','
        << format_real(e.train_ce) << ',' << format_real(e.train_kd) << ',' << format_real(e.train_loss) << ',';
    if (e.valid_ce) out << format_real(*e.valid_ce);
    out << ',';
    if (e.valid_rouge_l) out << format_real(*e.valid_rouge_l);
    out << ',' << e.cumulative_visits << ',' << format_real(e.wall_seconds) << '\n';
  }
}

nlohmann::ordered_json report_summary(const TrainingReport& r) {
  nlohmann::ordered_json j;
  j["mode"] = to_string(r.mode);
  j["full_size"] = r.full_size;
  j["curated_size"] = r.curated_size;
  j["sample_visits"] = r.sample_visits;
  j["baseline_visits"] = r.baseline_visits;
  j["budget_fraction"] = r.budget_fraction;
  j["test_ce"] = r.test_ce;
  j["test_rouge_l"] = r.test_rouge_l;
  j["final_valid_ce"] = r.final_valid_ce ? nlohmann::ordered_json(*r.final_valid_ce) : nlohmann::ordered_json();
  if (r.selected_valid_rouge_l) {
    j["selected"] = {{"stage", r.selected_stage},
                     {"epoch", r.selected_epoch},
                     {"valid_rouge_l", *r.selected_valid_rouge_l}};
  }
  if (is_on_policy(r.mode)) {
    j["sgo_replaced"] = r.sgo_replaced;
    j["sgo_considered"] = r.sgo_considered;
  }
  if (r.plan) j["plan"] = plan_to_json(*r.plan);
  j["config"] = r.config;

  nlohmann::ordered_json timing;
  timing["reflect_seconds"] = r.reflect_seconds;
  timing["train_seconds"] = r.train_seconds;
  timing["eval_seconds"] = r.eval_seconds;
  if (is_curated(r.mode) && r.train_seconds > 0.0 && r.budget_fraction > 0.0 && r.budget_fraction <= 1.0) {
    // Baseline training time extrapolated from this run's throughput.
    const double t_baseline = r.train_seconds / r.budget_fraction;
    timing["projected_baseline_train_seconds"] = t_baseline;
    timing["projected_time_reduction"] = cost_model(r.reflect_seconds, t_baseline, r.budget_fraction);
  }
  j["timing"] = timing;
  return j;
}

// --- teacher cache ---------------------------------------------------------------

std::size_t TeacherCache::Hash::operator()(const TokenSeq& s) const noexcept {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (TokenId t : s) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
  return static_cast<std::size_t>(h);
}

const Vector& TeacherCache::logits(const TinyLmParams& teacher, const TokenSeq& context) {
  auto it = map_.find(context);
  if (it == map_.end()) it = map_.emplace(context, forward(teacher, context)).first;
  return it->second;
}

// --- training loop -----------------------------------------------------------------

LoopSettings loop_settings(const RunConfig& cfg) {
  LoopSettings s;
  s.seed = cfg.seed;
  s.optim = cfg.optim;
  s.divergence = cfg.divergence;
  s.on_policy = is_on_policy(cfg.mode);
  s.sgo_mix = cfg.sgo_mix;
  s.max_len = cfg.max_len;
  s.patience = cfg.patience;
  return s;
}

std::vector<PromptResponsePair> mix_on_policy(std::span<const PromptResponsePair> batch, const TinyLmParams& student,
                                              double sgo_mix, std::uint64_t seed, std::size_t max_len,
                                              std::size_t* replaced) {
  if (!(sgo_mix >= 0.0 && sgo_mix <= 1.0)) throw ValidationError("sgo_mix must be in [0, 1]");
  std::vector<PromptResponsePair> out(batch.begin(), batch.end());
  std::size_t count = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    Rng coin(derive_seed({seed, i}));
    if (coin.uniform() < sgo_mix) {
      out[i].response = sample_decode(student, out[i].prompt, max_len, 1.0, derive_seed({seed, i, 1}));
      ++count;
    }
  }
  if (replaced) *replaced += count;
  return out;
}

std::uint64_t kd_train_stage(TinyLmParams& student, OptState& opt, const TinyLmParams* teacher, const Dataset& data,
                             std::span<const std::size_t> indices, const StageSpec& stage,
                             const LoopSettings& settings, StageContext ctx) {
  if (!(stage.alpha >= 0.0 && stage.alpha <= 1.0)) throw ValidationError("alpha must be in [0, 1]");
  if (stage.alpha < 1.0 && teacher == nullptr) throw ValidationError("a teacher is required when alpha < 1");
  if (settings.optim.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  for (std::size_t idx : indices) {
    if (idx >= data.size()) throw ValidationError("training index out of range");
  }

  DivergenceSpec spec = settings.divergence;
  spec.tau = stage.tau;
  spec.validate();

  std::vector<std::size_t> canonical(indices.begin(), indices.end());
  std::sort(canonical.begin(), canonical.end());

  std::uint64_t visits = 0;
  double best_valid = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const auto stage_start = Clock::now();

  for (std::size_t epoch = 1; epoch <= stage.epochs; ++epoch) {
    std::vector<std::size_t> order = canonical;
    Rng rng(derive_seed({settings.seed, kTagEpoch, stage.stage, epoch}));
    rng.shuffle(order);

    double ce_sum = 0.0, kd_sum = 0.0, loss_sum = 0.0;
    std::size_t positions = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += settings.optim.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + settings.optim.batch_size);
      std::vector<PromptResponsePair> pairs;
      pairs.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) pairs.push_back(data[order[k]]);
      if (settings.on_policy) {
        std::size_t replaced = 0;
        pairs = mix_on_policy(pairs, student, settings.sgo_mix,
                              derive_seed({settings.seed, kTagSgo, stage.stage, epoch, batch_index}), settings.max_len,
                              &replaced);
        if (ctx.report) {
          ctx.report->sgo_replaced += replaced;
          ctx.report->sgo_considered += pairs.size();
        }
      }

      std::vector<TrainingExample> examples;
      for (const auto& p : pairs) {
        auto ex = sequence_examples(p.prompt, p.response, student.config.context);
        for (auto& e : ex) examples.push_back(std::move(e));
      }
      if (stage.alpha < 1.0) {
        for (auto& e : examples) {
          e.teacher_logits = ctx.cache ? ctx.cache->logits(*teacher, e.context) : forward(*teacher, e.context);
        }
      }

      auto lg = loss_and_grad(student, examples, stage.alpha, spec);
      if (settings.optim.clip_norm > 0.0) {
        const double norm = std::sqrt(lg.grad.squared_norm());
        if (norm > settings.optim.clip_norm) lg.grad.scale(settings.optim.clip_norm / norm);
      }
      apply_update(student, lg.grad, opt);

      const double w = static_cast<double>(examples.size());
      ce_sum += lg.loss.ce * w;
      kd_sum += lg.loss.kd * w;
      loss_sum += lg.loss.total * w;
      positions += examples.size();
    }
    visits += order.size();
    if (!student.weights.all_finite()) {
      throw DomainError("training diverged (non-finite weights) in stage " + std::to_string(stage.stage) +
                        ", epoch " + std::to_string(epoch));
    }

    std::optional<double> valid_ce;
    if (ctx.valid && !ctx.valid->empty()) valid_ce = mean_token_ce(student, *ctx.valid, ctx.threads);

    if (ctx.report) {
      EpochRecord rec;
      rec.stage = stage.stage;
      rec.epoch = epoch;
      rec.tau = stage.tau;
      rec.alpha = stage.alpha;
      if (positions > 0) {
        rec.train_ce = ce_sum / static_cast<double>(positions);
        rec.train_kd = kd_sum / static_cast<double>(positions);
        rec.train_loss = loss_sum / static_cast<double>(positions);
      }
      rec.valid_ce = valid_ce;
      ctx.report->sample_visits += order.size();
      rec.cumulative_visits = ctx.report->sample_visits;
      rec.wall_seconds = seconds_since(stage_start);
      ctx.report->epochs.push_back(rec);
      ctx.report->final_valid_ce = valid_ce;
    }
    if (ctx.on_epoch_end) ctx.on_epoch_end(student, ctx.report ? &ctx.report->epochs.back() : nullptr);

    if (valid_ce) {
      if (*valid_ce < best_valid) {
        best_valid = *valid_ce;
        since_best = 0;
        if (ctx.best) *ctx.best = student;
      } else if (settings.patience > 0 && ++since_best >= settings.patience) {
        break;
      }
    }
  }
  return visits;
}

TinyLmParams train_teacher(const Dataset& train, const LmConfig& teacher_cfg, std::size_t epochs, std::uint64_t seed,
                           const OptimConfig& optim, const Dataset* valid) {
  LmConfig cfg = teacher_cfg;
  cfg.seed = derive_seed({seed, kTagTeacher});
  TinyLmParams teacher = init(cfg);
  auto opt = OptState::for_params(teacher, optim.learning_rate, optim.momentum);
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), 0);
  LoopSettings s;
  s.seed = derive_seed({seed, kTagTeacher});
  s.optim = optim;
  StageContext ctx;
  TinyLmParams best = teacher;
  if (valid && !valid->empty()) {
    ctx.valid = valid;
    ctx.best = &best;
  }
  kd_train_stage(teacher, opt, nullptr, train, all, {1, 1.0, 1.0, epochs}, s, ctx);
  return ctx.best ? best : teacher;
}

TinyLmParams prepare_student(const Dataset& train, const LmConfig& student_cfg, std::size_t warmup_epochs,
                             std::uint64_t seed, const OptimConfig& optim) {
  LmConfig cfg = student_cfg;
  cfg.seed = derive_seed({seed, kTagStudent});
  TinyLmParams student = init(cfg);
  if (warmup_epochs == 0) return student;
  auto opt = OptState::for_params(student, optim.learning_rate, optim.momentum);
  std::vector<std::size_t> all(train.size());
  std::iota(all.begin(), all.end(), 0);
  LoopSettings s;
  s.seed = derive_seed({seed, kTagWarmup});
  s.optim = optim;
  kd_train_stage(student, opt, nullptr, train, all, {1, 1.0, 1.0, warmup_epochs}, s);
  return student;
}

double mean_token_ce(const TinyLmParams& model, const Dataset& data, std::size_t threads) {
  std::vector<double> totals(data.size(), 0.0);
  std::vector<std::size_t> counts(data.size(), 0);
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto ce = sequence_cross_entropy(model, data[i].prompt, data[i].response);
    totals[i] = ce.total_nats;
    counts[i] = ce.token_count;
  });
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += totals[i];
    count += counts[i];
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

EvalResult evaluate(const TinyLmParams& model, const Dataset& test, std::size_t max_len, std::size_t threads) {
  EvalResult r;
  r.pairs = test.size();
  if (test.empty()) return r;
  std::vector<double> totals(test.size(), 0.0), rouge(test.size(), 0.0);
  std::vector<std::size_t> counts(test.size(), 0);
  parallel_for(test.size(), threads, [&](std::size_t i) {
    const auto& p = test[i];
    const auto ce = sequence_cross_entropy(model, p.prompt, p.response);
    totals[i] = ce.total_nats;
    counts[i] = ce.token_count;
    rouge[i] = rouge_l(p.response, greedy_decode(model, p.prompt, max_len)).f_measure;
  });
  double total = 0.0, rouge_sum = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    total += totals[i];
    rouge_sum += rouge[i];
    r.tokens += counts[i];
  }
  r.mean_ce = r.tokens == 0 ? 0.0 : total / static_cast<double>(r.tokens);
  r.mean_rouge_l = rouge_sum / static_cast<double>(test.size());
  return r;
}

// --- runs -----------------------------------------------------------------------------

namespace {

void finish(RunResult& res, const DatasetSplits& splits, const RunConfig& cfg, std::size_t threads) {
  auto& rep = res.report;
  rep.full_size = splits.train.size();
  rep.baseline_visits = static_cast<std::uint64_t>(cfg.baseline_epochs) * splits.train.size();
  rep.budget_fraction =
      rep.baseline_visits == 0 ? 0.0 : static_cast<double>(rep.sample_visits) / static_cast<double>(rep.baseline_visits);
  const auto t0 = Clock::now();
  const auto ev = evaluate(res.student, splits.test, cfg.max_len, threads);
  rep.eval_seconds = seconds_since(t0);
  rep.test_ce = ev.mean_ce;
  rep.test_rouge_l = ev.mean_rouge_l;
  rep.config = to_json(cfg);
}

// Global best-validation-ROUGE-L checkpoint across all stages of a run.
class Selector {
 public:
  Selector(const RunConfig& cfg, const Dataset& valid, std::size_t threads, TrainingReport& rep)
      : cfg_(cfg), valid_(valid), threads_(threads), rep_(rep) {}

  bool active() const { return cfg_.select_best && !valid_.empty(); }

  void offer(const TinyLmParams& student, EpochRecord* rec) {
    const double r = evaluate(student, valid_, cfg_.max_len, threads_).mean_rouge_l;
    if (rec) rec->valid_rouge_l = r;
    if (rep_.selected_valid_rouge_l && r <= *rep_.selected_valid_rouge_l) return;
    best_ = student;
    rep_.selected_valid_rouge_l = r;
    rep_.selected_stage = rec ? rec->stage : 0;
    rep_.selected_epoch = rec ? rec->epoch : 0;
  }

  void attach(StageContext& ctx) {
    if (active()) ctx.on_epoch_end = [this](const TinyLmParams& s, EpochRecord* rec) { offer(s, rec); };
  }

  void apply(TinyLmParams& student) {
    if (best_) student = std::move(*best_);
  }

 private:
  const RunConfig& cfg_;
  const Dataset& valid_;
  std::size_t threads_;
  TrainingReport& rep_;
  std::optional<TinyLmParams> best_;
};

void check_models(const DatasetSplits& splits, const TinyLmParams& teacher, const TinyLmParams& student,
                  const RunConfig& cfg) {
  cfg.validate();
  if (splits.train.empty()) throw ValidationError("training split is empty");
  if (teacher.config.vocab_size != student.config.vocab_size) {
    throw ValidationError("teacher and student vocabularies differ in size");
  }
  if (teacher.config.context != student.config.context) {
    throw ValidationError("teacher and student context lengths differ");
  }
}

}  // namespace

RunResult run_srd(const DatasetSplits& splits, const TinyLmParams& teacher, const TinyLmParams& initial_student,
                  const RunConfig& cfg) {
  check_models(splits, teacher, initial_student, cfg);
  const std::size_t threads = resolve_threads(cfg.threads);
  RunResult res{initial_student, {}};
  auto& rep = res.report;
  rep.mode = cfg.mode;

  auto t0 = Clock::now();
  rep.reflection = reflect_dataset(initial_student, splits.train, cfg.curation, threads);
  rep.curated = select(rep.reflection, cfg.curation.lambda);
  rep.reflect_seconds = seconds_since(t0);
  rep.curated_size = rep.curated.size();

  std::vector<std::string> easiest_first;
  easiest_first.reserve(rep.curated.size());
  for (const auto& r : rep.curated) easiest_first.push_back(r.pair_id);
  rep.plan = make_plan(easiest_first, cfg.schedule, cfg.order);

  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < splits.train.size(); ++i) index_of.emplace(splits.train[i].id, i);

  auto opt = OptState::for_params(res.student, cfg.optim.learning_rate, cfg.optim.momentum);
  TeacherCache cache;
  const auto settings = loop_settings(cfg);
  StageContext ctx{&splits.valid, &rep, cfg.teacher_cache ? &cache : nullptr, threads, nullptr, {}};
  Selector selector(cfg, splits.valid, threads, rep);
  selector.attach(ctx);

  t0 = Clock::now();
  if (selector.active()) selector.offer(res.student, nullptr);
  for (std::size_t i = 1; i <= rep.plan->n_stages(); ++i) {
    std::vector<std::size_t> indices;
    for (const auto& id : cumulative_set(*rep.plan, i)) indices.push_back(index_of.at(id));
    const auto& sp = rep.plan->stage_params[i - 1];
    kd_train_stage(res.student, opt, &teacher, splits.train, indices, {i, sp.tau, sp.alpha, sp.epochs}, settings,
                   ctx);
  }
  selector.apply(res.student);
  rep.train_seconds = seconds_since(t0);
  finish(res, splits, cfg, threads);
  return res;
}

RunResult run_baseline(const DatasetSplits& splits, const TinyLmParams& teacher, const TinyLmParams& initial_student,
                       const RunConfig& cfg) {
  check_models(splits, teacher, initial_student, cfg);
  const std::size_t threads = resolve_threads(cfg.threads);
  RunResult res{initial_student, {}};
  auto& rep = res.report;
  rep.mode = cfg.mode;
  rep.curated_size = splits.train.size();

  std::vector<std::size_t> all(splits.train.size());
  std::iota(all.begin(), all.end(), 0);
  auto opt = OptState::for_params(res.student, cfg.optim.learning_rate, cfg.optim.momentum);
  TeacherCache cache;
  StageContext ctx{&splits.valid, &rep, cfg.teacher_cache ? &cache : nullptr, threads, nullptr, {}};
  Selector selector(cfg, splits.valid, threads, rep);
  selector.attach(ctx);

  const auto t0 = Clock::now();
  if (selector.active()) selector.offer(res.student, nullptr);
  kd_train_stage(res.student, opt, &teacher, splits.train, all,
                 {1, cfg.baseline_tau, cfg.baseline_alpha, cfg.baseline_epochs}, loop_settings(cfg), ctx);
  selector.apply(res.student);
  rep.train_seconds = seconds_since(t0);
  finish(res, splits, cfg, threads);
  return res;
}

RunResult run(const DatasetSplits& splits, const TinyLmParams& teacher, const TinyLmParams& initial_student,
              const RunConfig& cfg) {
  return is_curated(cfg.mode) ? run_srd(splits, teacher, initial_student, cfg)
                              : run_baseline(splits, teacher, initial_student, cfg);
}

PipelineResult run_pipeline(const DatasetSplits& splits, const RunConfig& cfg, const TinyLmParams* teacher,
                            const TinyLmParams* initial_student) {
  cfg.validate();
  if (splits.train.empty()) throw ValidationError("training split is empty");
  PipelineResult out{teacher ? *teacher
                             : train_teacher(splits.train, cfg.teacher_cfg, cfg.teacher_epochs, cfg.seed, cfg.optim, &splits.valid),
                     initial_student
                         ? *initial_student
                         : prepare_student(splits.train, cfg.student_cfg, cfg.warmup_epochs, cfg.seed, cfg.optim),
                     {}};
  out.run = run(splits, out.teacher, out.initial_student, cfg);
  return out;
}

}  // namespace reflectkd
