// SPDX-License-Identifier: Apache-2.0
#include "reflectkd/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "reflectkd/error.hpp"
#include "reflectkd/format.hpp"
#include "reflectkd/parallel.hpp"

namespace reflectkd {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(std::string_view key, std::string_view v) {
  double x = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(x)) {
    throw ValidationError(std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
  return x;
}

std::uint64_t parse_count(std::string_view key, std::string_view v) {
  std::uint64_t x = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), x);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ValidationError(std::string(key) + ": expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return x;
}

bool parse_flag(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(std::string(key) + ": expected true or false, got '" + std::string(v) + "'");
}

template <typename F>
auto rethrow_as_key_error(std::string_view key, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(key) + ": " + e.what());
  }
}

using Setter = std::function<void(CliConfig&, std::string_view key, std::string_view value)>;

struct KeyEntry {
  ConfigKey info;
  Setter set;
  std::function<std::string(const CliConfig&)> get;
};

#define REAL(field) \
  [](CliConfig& c, std::string_view k, std::string_view v) { c.field = parse_real(k, v); }, \
      [](const CliConfig& c) { return format_real(c.field); }
#define COUNT(field) \
  [](CliConfig& c, std::string_view k, std::string_view v) { c.field = parse_count(k, v); }, \
      [](const CliConfig& c) { return std::to_string(c.field); }
#define FLAG(field) \
  [](CliConfig& c, std::string_view k, std::string_view v) { c.field = parse_flag(k, v); }, \
      [](const CliConfig& c) { return std::string(c.field ? "true" : "false"); }
#define ENUM(field, parser) \
  [](CliConfig& c, std::string_view k, std::string_view v) { \
    c.field = rethrow_as_key_error(k, [&] { return parser(v); }); \
  }, \
      [](const CliConfig& c) { return std::string(to_string(c.field)); }

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = {
      {{"data", "JSONL dataset path (required for train and sweep)"},
       [](CliConfig& c, std::string_view, std::string_view v) { c.data = std::string(v); },
       [](const CliConfig& c) { return c.data; }},
      {{"mode", "srd | baseline_offpolicy | baseline_onpolicy | srd_onpolicy"}, ENUM(run.mode, parse_run_mode)},
      {{"seed", "run seed (teacher/student init, shuffling, on-policy sampling)"}, COUNT(run.seed)},
      {{"split_seed", "seed of the train/valid/test shuffle"}, COUNT(split_seed)},
      {{"split_train", "train fraction"}, REAL(fractions.train)},
      {{"split_valid", "validation fraction"}, REAL(fractions.valid)},
      {{"split_test", "test fraction"}, REAL(fractions.test)},
      {{"min_count", "minimum word frequency for the vocabulary"}, COUNT(min_count)},
      {{"max_seq_len", "responses longer than this many tokens are dropped"}, COUNT(max_seq_len)},
      {{"lambda", "retained fraction of the ranked train split"}, REAL(run.curation.lambda)},
      {{"rrf_k", "reciprocal rank fusion constant"},
       [](CliConfig& c, std::string_view k, std::string_view v) {
         const auto x = parse_count(k, v);
         if (x > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
           throw ValidationError(std::string(k) + ": out of range");
         }
         c.run.curation.rrf_k = static_cast<int>(x);
       },
       [](const CliConfig& c) { return std::to_string(c.run.curation.rrf_k); }},
      {{"ranking", "fusion | rouge | ce"}, ENUM(run.curation.ranking, parse_ranking_mode)},
      {{"ce_source", "student_output | ground_truth"}, ENUM(run.curation.ce_source, parse_ce_source)},
      {{"reflect_decode", "greedy | sample"}, ENUM(run.curation.decode.mode, parse_decode_mode)},
      {{"reflect_temperature", "sampling temperature when reflect_decode = sample"},
       REAL(run.curation.decode.temperature)},
      {{"reflect_seed", "sampling seed when reflect_decode = sample"}, COUNT(run.curation.decode.seed)},
      {{"max_prompt_tokens", "longest accepted prompt"}, COUNT(run.curation.decode.max_prompt_tokens)},
      {{"n_stages", "curriculum stages"}, COUNT(run.schedule.n_stages)},
      {{"tau0", "temperature of the first stage"}, REAL(run.schedule.tau0)},
      {{"tau_n", "temperature of the last stage"}, REAL(run.schedule.tau_n)},
      {{"alpha0", "SFT weight of the first stage"}, REAL(run.schedule.alpha0)},
      {{"alpha_n", "SFT weight of the last stage"}, REAL(run.schedule.alpha_n)},
      {{"epochs_per_stage", "epochs trained in every stage"}, COUNT(run.schedule.epochs_per_stage)},
      {{"tau_schedule", "scheduled | fixed (tau0 throughout) | reversed (tau_n to tau0)"},
       ENUM(run.schedule.tau_shape, parse_schedule_shape)},
      {{"alpha_schedule", "scheduled | fixed (alpha0 throughout) | reversed (alpha_n to alpha0)"},
       ENUM(run.schedule.alpha_shape, parse_schedule_shape)},
      {{"order", "easy_to_hard | hard_to_easy"}, ENUM(run.order, parse_curriculum_order)},
      {{"divergence", "kld | rkl | jsd | tvd | skl | srkl"}, ENUM(run.divergence.kind, parse_divergence_kind)},
      {{"beta", "skew of skl / srkl"}, REAL(run.divergence.beta)},
      {{"tau_sq_scaling", "multiply the KD term by tau^2"}, FLAG(run.divergence.tau_sq_scaling)},
      {{"sgo_mix", "probability of replacing a response by a student sample (on-policy modes)"},
       REAL(run.sgo_mix)},
      {{"baseline_epochs", "epochs of the full-data baseline; also the budget denominator"},
       COUNT(run.baseline_epochs)},
      {{"baseline_tau", "baseline temperature"}, REAL(run.baseline_tau)},
      {{"baseline_alpha", "baseline SFT weight (default 0.3, or 0 in baseline_onpolicy)"},
       [](CliConfig& c, std::string_view k, std::string_view v) {
         c.run.baseline_alpha = parse_real(k, v);
         c.baseline_alpha_set = true;
       },
       [](const CliConfig& c) { return format_real(c.run.baseline_alpha); }},
      {{"teacher_epochs", "CE-only teacher epochs; the epoch with the lowest validation CE is kept"}, COUNT(run.teacher_epochs)},
      {{"warmup_epochs", "SFT epochs giving the initial student before reflection"}, COUNT(run.warmup_epochs)},
      {{"patience", "early stop within a stage on validation CE; 0 disables"}, COUNT(run.patience)},
      {{"learning_rate", "SGD learning rate"}, REAL(run.optim.learning_rate)},
      {{"momentum", "SGD momentum"}, REAL(run.optim.momentum)},
      {{"batch_size", "pairs per mini-batch"}, COUNT(run.optim.batch_size)},
      {{"clip_norm", "gradient norm clip; 0 disables"}, REAL(run.optim.clip_norm)},
      {{"teacher_cache", "memoize teacher logits by context"}, FLAG(run.teacher_cache)},
      {{"select_best", "return the student with the best validation ROUGE-L over all epochs"}, FLAG(run.select_best)},
      {{"max_len", "decode length for evaluation and on-policy samples"}, COUNT(run.max_len)},
      {{"reflect_max_len", "decode length for reflection"}, COUNT(run.curation.decode.max_len)},
      {{"context", "model context window (teacher and student)"},
       [](CliConfig& c, std::string_view k, std::string_view v) {
         c.run.teacher_cfg.context = c.run.student_cfg.context = parse_count(k, v);
       },
       [](const CliConfig& c) { return std::to_string(c.run.student_cfg.context); }},
      {{"teacher_embed_dim", "teacher embedding width"}, COUNT(run.teacher_cfg.embed_dim)},
      {{"teacher_hidden_dim", "teacher hidden width"}, COUNT(run.teacher_cfg.hidden_dim)},
      {{"student_embed_dim", "student embedding width"}, COUNT(run.student_cfg.embed_dim)},
      {{"student_hidden_dim", "student hidden width"}, COUNT(run.student_cfg.hidden_dim)},
      {{"threads", "worker threads; 0 uses REFLECTKD_THREADS or the processor count"}, COUNT(run.threads)},
  };
  return table;
}

#undef REAL
#undef COUNT
#undef FLAG
#undef ENUM

const KeyEntry* find_key(std::string_view key) {
  for (const auto& e : key_table()) {
    if (e.info.name == key) return &e;
  }
  return nullptr;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : key_table()) out.push_back(e.info);
    return out;
  }();
  return keys;
}

void apply_setting(CliConfig& cfg, std::string_view key, std::string_view value) {
  const auto* entry = find_key(key);
  if (!entry) throw ValidationError("unknown config key '" + std::string(key) + "'");
  entry->set(cfg, key, value);
}

CliConfig parse_config(std::string_view text, CliConfig base) {
  std::vector<std::string> problems;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    try {
      apply_setting(base, key, value);
    } catch (const ValidationError& e) {
      problems.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& p : problems) msg += "\n  " + p;
    throw ValidationError(msg);
  }
  return base;
}

CliConfig load_config(const std::filesystem::path& path, CliConfig base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string config_to_text(const CliConfig& cfg) {
  std::string out;
  for (const auto& e : key_table()) out += std::string(e.info.name) + " = " + e.get(cfg) + "\n";
  return out;
}

void finalize_config(CliConfig& cfg) {
  if (cfg.run.mode == RunMode::baseline_onpolicy && !cfg.baseline_alpha_set) cfg.run.baseline_alpha = 0.0;
  if (cfg.min_count < 1) throw ValidationError("min_count must be >= 1");
  if (cfg.max_seq_len < 1) throw ValidationError("max_seq_len must be >= 1");
  cfg.run.validate();
}

// --- commands ---------------------------------------------------------------------

namespace {

struct LoadedData {
  Vocabulary vocab;
  Dataset dataset;
  std::size_t dropped = 0;
};

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

CliConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets) {
  CliConfig cfg = config_path.empty() ? CliConfig{} : load_config(config_path);
  std::string overrides;
  for (const auto& s : sets) overrides += s + "\n";
  return parse_config(overrides, std::move(cfg));
}

/// Data tokenized with an existing vocabulary (checkpoint); unknown words are
/// an error unless allowed.
Dataset load_with_vocab(const std::string& path, const Vocabulary& vocab, std::size_t max_len, bool allow_unk) {
  const auto raw = read_jsonl(path);
  if (!allow_unk) {
    const auto oov = out_of_vocabulary(raw, vocab);
    if (!oov.empty()) {
      std::string msg = "vocabulary mismatch: " + std::to_string(oov.size()) + " word(s) of " + path +
                        " are not in the checkpoint vocabulary (first: '" + oov.front() + "')";
      throw ValidationError(msg);
    }
  }
  return tokenize_pairs(raw, vocab, max_len).dataset;
}

LoadedData load_training_data(const CliConfig& cfg) {
  const auto raw = read_jsonl(cfg.data);
  LoadedData d;
  d.vocab = build_vocab(raw, cfg.min_count);
  auto loaded = tokenize_pairs(raw, d.vocab, cfg.max_seq_len);
  d.dataset = std::move(loaded.dataset);
  d.dropped = loaded.dropped_over_length;
  return d;
}

void require_data(const CliConfig& cfg) {
  if (cfg.data.empty()) throw ValidationError("missing required config key 'data'");
}

std::size_t threads_of(const CliConfig& cfg) { return cfg.run.threads == 0 ? worker_threads() : cfg.run.threads; }

DatasetSplits make_splits(const CliConfig& cfg, LoadedData& data) {
  auto splits = split(data.dataset, cfg.fractions, cfg.split_seed);
  if (splits.train.empty()) throw ValidationError("training split is empty");
  return splits;
}

void set_vocab_size(CliConfig& cfg, std::size_t v) {
  cfg.run.teacher_cfg.vocab_size = v;
  cfg.run.student_cfg.vocab_size = v;
}

int cmd_gen(const std::string& family, std::size_t count, std::uint64_t seed, std::size_t alphabet,
            std::size_t min_len, std::size_t max_len, double noise, const std::string& out_path, std::ostream& out) {
  GrammarSpec spec{family, alphabet, min_len, max_len, noise};
  spec.validate();
  const auto pairs = generate_synthetic(spec, count, seed);
  write_jsonl(std::filesystem::path(out_path), pairs);
  out << "wrote " << pairs.size() << " pairs to " << out_path << '\n';
  return kExitOk;
}

int cmd_reflect(const std::string& data_path, const std::string& student_path, const CliConfig& cfg_in,
                const std::string& out_path, const std::string& plan_path, bool allow_unk, std::ostream& out) {
  CliConfig cfg = cfg_in;
  finalize_config(cfg);
  const auto ckpt = load_checkpoint(student_path);
  const auto dataset = load_with_vocab(data_path, ckpt.vocab, cfg.max_seq_len, allow_unk);
  if (dataset.empty()) throw ValidationError("no records to reflect on in " + data_path);
  const auto records = reflect_dataset(ckpt.params, dataset, cfg.run.curation, threads_of(cfg));
  const auto kept = select(records, cfg.run.curation.lambda);
  std::ostringstream report;
  write_reflection_report(report, records, kept);
  write_text(out_path, report.str());
  if (!plan_path.empty()) {
    std::vector<std::string> ids;
    for (const auto& r : kept) ids.push_back(r.pair_id);
    write_plan(plan_path, make_plan(ids, cfg.run.schedule, cfg.run.order));
  }
  out << "kept " << kept.size() << " / " << records.size() << '\n';
  return kExitOk;
}

int cmd_train(CliConfig cfg, const std::string& out_dir, const std::string& teacher_path, std::ostream& out) {
  require_data(cfg);
  finalize_config(cfg);
  auto data = load_training_data(cfg);
  set_vocab_size(cfg, data.vocab.size());
  const auto splits = make_splits(cfg, data);

  std::optional<TinyLmParams> teacher;
  if (!teacher_path.empty()) {
    auto ckpt = load_checkpoint(teacher_path);
    if (!(ckpt.vocab == data.vocab)) throw ValidationError("teacher checkpoint vocabulary does not match the data");
    teacher = std::move(ckpt.params);
  }
  const auto result = run_pipeline(splits, cfg.run, teacher ? &*teacher : nullptr);
  const auto& rep = result.run.report;

  const std::filesystem::path dir(out_dir);
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "student.json", result.run.student, data.vocab);
  save_checkpoint(dir / "teacher.json", result.teacher, data.vocab);
  std::ostringstream csv;
  write_report_csv(csv, rep);
  write_text(dir / "report.csv", csv.str());
  auto summary = report_summary(rep);
  summary["dropped_over_length"] = data.dropped;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  write_text(dir / "config.txt", config_to_text(cfg));
  if (is_curated(cfg.run.mode)) {
    std::ostringstream refl;
    write_reflection_report(refl, rep.reflection, rep.curated);
    write_text(dir / "reflection.jsonl", refl.str());
  }
  out << to_string(rep.mode) << ": test_ce=" << format_real(rep.test_ce)
      << " test_rouge_l=" << format_real(rep.test_rouge_l) << " budget_fraction=" << format_real(rep.budget_fraction)
      << '\n';
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, std::size_t max_len, bool allow_unk,
             std::size_t threads, const std::string& out_path, std::ostream& out) {
  const auto ckpt = load_checkpoint(ckpt_path);
  const auto test = load_with_vocab(data_path, ckpt.vocab, std::numeric_limits<std::size_t>::max(), allow_unk);
  if (test.empty()) throw ValidationError("test file " + data_path + " has no records");
  const auto r = evaluate(ckpt.params, test, max_len, threads == 0 ? worker_threads() : threads);
  nlohmann::ordered_json j;
  j["pairs"] = r.pairs;
  j["tokens"] = r.tokens;
  j["vocab_size"] = ckpt.vocab.size();
  j["mean_ce"] = r.mean_ce;
  j["mean_rouge_l"] = r.mean_rouge_l;
  const std::string text = j.dump(2) + "\n";
  if (!out_path.empty()) write_text(out_path, text);
  out << text;
  return kExitOk;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ValidationError("empty entry in list '" + s + "'");
    out.push_back(item);
  }
  if (out.empty()) throw ValidationError("empty list");
  return out;
}

int cmd_sweep(CliConfig cfg, const std::string& axis, const std::string& values_text, const std::string& seeds_text,
              const std::string& out_path, std::ostream& out) {
  static const std::vector<std::string> kAxes = {"lambda", "n_stages", "tau_n", "alpha0"};
  if (std::find(kAxes.begin(), kAxes.end(), axis) == kAxes.end()) {
    throw ValidationError("unknown sweep axis '" + axis + "' (expected lambda, n_stages, tau_n or alpha0)");
  }
  require_data(cfg);
  const auto values = split_list(values_text);
  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(seeds_text)) seeds.push_back(parse_count("seeds", s));
  // Validate every grid point before any training starts.
  for (const auto& v : values) {
    CliConfig probe = cfg;
    apply_setting(probe, axis, v);
    finalize_config(probe);
  }
  finalize_config(cfg);
  auto data = load_training_data(cfg);
  set_vocab_size(cfg, data.vocab.size());
  const auto splits = make_splits(cfg, data);

  std::ostringstream csv;
  csv << "seed," << axis << ",mode,curated_size,sample_visits,budget_fraction,test_ce,test_rouge_l,wall_seconds\n";
  for (const auto seed : seeds) {
    CliConfig base = cfg;
    base.run.seed = seed;
    const auto teacher =
        train_teacher(splits.train, base.run.teacher_cfg, base.run.teacher_epochs, seed, base.run.optim,
                      &splits.valid);
    const auto student =
        prepare_student(splits.train, base.run.student_cfg, base.run.warmup_epochs, seed, base.run.optim);
    for (const auto& v : values) {
      CliConfig point = base;
      apply_setting(point, axis, v);
      finalize_config(point);
      const auto res = run(splits, teacher, student, point.run);
      const auto& rep = res.report;
      csv << seed << ',' << v << ',' << to_string(rep.mode) << ',' << rep.curated_size << ',' << rep.sample_visits
          << ',' << format_real(rep.budget_fraction) << ',' << format_real(rep.test_ce) << ','
          << format_real(rep.test_rouge_l) << ','
          << format_real(rep.reflect_seconds + rep.train_seconds + rep.eval_seconds) << '\n';
    }
  }
  if (out_path.empty()) {
    out << csv.str();
  } else {
    write_text(out_path, csv.str());
    out << "wrote " << seeds.size() * values.size() << " rows to " << out_path << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Selective reflection distillation toolkit", "reflectkd"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, student_path, checkpoint_path, plan_path, out_dir, teacher_path;
  std::string mode_text, axis, values_text, seeds_text = "1";
  std::vector<std::string> sets;
  bool allow_unk = false;
  std::size_t eval_max_len = 32, threads = 0;

  std::string family = "mixed";
  std::size_t count = 2000, alphabet = 8, min_len = 1, max_len = 6;
  std::uint64_t gen_seed = 0;
  double noise = 0.0;

  auto* gen = app.add_subcommand("gen", "write a synthetic prompt/response corpus as JSONL");
  gen->add_option("--template", family, "copy | reverse | pattern | mixed")->capture_default_str();
  gen->add_option("--count", count, "number of pairs")->capture_default_str();
  gen->add_option("--seed", gen_seed, "generator seed")->capture_default_str();
  gen->add_option("--alphabet", alphabet, "symbol count (2..26)")->capture_default_str();
  gen->add_option("--min-len", min_len, "shortest payload")->capture_default_str();
  gen->add_option("--max-len", max_len, "longest payload")->capture_default_str();
  gen->add_option("--noise", noise, "response corruption rate at difficulty 1")->capture_default_str();
  gen->add_option("--out", out_path, "output JSONL path")->required();

  auto* reflect = app.add_subcommand("reflect", "score and rank a dataset with a student checkpoint");
  reflect->add_option("--data", data_path, "JSONL dataset")->required();
  reflect->add_option("--student", student_path, "student checkpoint")->required();
  reflect->add_option("--config", config_path, "key=value config");
  reflect->add_option("--set", sets, "config override key=value (repeatable)");
  reflect->add_option("--out", out_path, "reflection report (JSONL)")->required();
  reflect->add_option("--plan", plan_path, "also write the curriculum plan (JSON)");
  reflect->add_flag("--allow-unk", allow_unk, "map unknown words to <unk> instead of failing");

  auto* train = app.add_subcommand("train", "train teacher and student; write checkpoints and reports");
  train->add_option("--config", config_path, "key=value config");
  train->add_option("--set", sets, "config override key=value (repeatable)");
  train->add_option("--data", data_path, "overrides the data key");
  train->add_option("--mode", mode_text, "overrides the mode key");
  train->add_option("--teacher", teacher_path, "reuse a teacher checkpoint");
  train->add_option("--out-dir", out_dir, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "held-out CE and ROUGE-L of a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  eval->add_option("--data", data_path, "JSONL test data")->required();
  eval->add_option("--max-len", eval_max_len, "greedy decode length")->capture_default_str();
  eval->add_option("--threads", threads, "worker threads (0 = REFLECTKD_THREADS or all)");
  eval->add_option("--out", out_path, "also write the metrics JSON here");
  eval->add_flag("--allow-unk", allow_unk, "map unknown words to <unk> instead of failing");

  auto* sweep = app.add_subcommand("sweep", "grid over one hyperparameter and several seeds");
  sweep->add_option("--config", config_path, "key=value config");
  sweep->add_option("--set", sets, "config override key=value (repeatable)");
  sweep->add_option("--data", data_path, "overrides the data key");
  sweep->add_option("--axis", axis, "lambda | n_stages | tau_n | alpha0")->required();
  sweep->add_option("--values", values_text, "comma-separated axis values")->required();
  sweep->add_option("--seeds", seeds_text, "comma-separated run seeds")->capture_default_str();
  sweep->add_option("--out", out_path, "CSV path (default: standard output)");

  std::vector<const char*> argv{"reflectkd"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(family, count, gen_seed, alphabet, min_len, max_len, noise, out_path, out);
    if (eval->parsed()) return cmd_eval(checkpoint_path, data_path, eval_max_len, allow_unk, threads, out_path, out);

    CliConfig cfg = resolve_config(config_path, sets);
    if (!data_path.empty()) cfg.data = data_path;
    if (reflect->parsed()) return cmd_reflect(data_path, student_path, cfg, out_path, plan_path, allow_unk, out);
    if (train->parsed()) {
      if (!mode_text.empty()) apply_setting(cfg, "mode", mode_text);
      return cmd_train(std::move(cfg), out_dir, teacher_path, out);
    }
    if (sweep->parsed()) return cmd_sweep(std::move(cfg), axis, values_text, seeds_text, out_path, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace reflectkd
