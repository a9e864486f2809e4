// SPDX-License-Identifier: Apache-2.0
//
// Batch command-line surface: gen, reflect, train, eval, sweep.
// Exit codes: 0 success, 2 usage or configuration error, 1 runtime failure.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "reflectkd/corpus.hpp"
#include "reflectkd/trainer.hpp"

namespace reflectkd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Everything a flat key=value config file can set.
struct CliConfig {
  RunConfig run;
  std::string data;
  SplitFractions fractions;
  std::uint64_t split_seed = 0;
  std::size_t min_count = 1;
  /// Pairs whose response exceeds this many tokens are dropped on load.
  std::size_t max_seq_len = 64;
  bool baseline_alpha_set = false;
};

struct ConfigKey {
  std::string_view name;
  std::string_view doc;
};

/// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key. Throws ValidationError for an unknown key or a bad value.
void apply_setting(CliConfig& cfg, std::string_view key, std::string_view value);

/// Parses `key = value` lines ('#' starts a comment). All unknown keys and
/// bad values are reported together in one ValidationError.
CliConfig parse_config(std::string_view text, CliConfig base = {});
CliConfig load_config(const std::filesystem::path& path, CliConfig base = {});

/// Effective configuration as key=value lines, one per documented key.
std::string config_to_text(const CliConfig& cfg);

/// Resolves mode-dependent defaults and validates the run configuration.
void finalize_config(CliConfig& cfg);

/// Entry point; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace reflectkd
