// SPDX-License-Identifier: Apache-2.0
#include "reflectkd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "reflectkd/error.hpp"
#include "reflectkd/rng.hpp"

namespace reflectkd {

namespace {

const std::vector<std::string> kReservedSurfaces = {"<pad>", "<bos>", "<eos>", "<unk>"};

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& s : kReservedSurfaces) append(s);
}

Vocabulary Vocabulary::from_entries(std::vector<std::string> entries) {
  if (entries.size() < kNumReserved ||
      !std::equal(kReservedSurfaces.begin(), kReservedSurfaces.end(), entries.begin())) {
    throw ValidationError("vocabulary must start with the reserved entries <pad>, <bos>, <eos>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = kNumReserved; i < entries.size(); ++i) {
    if (v.index_.count(entries[i]) != 0) {
      throw ValidationError("duplicate vocabulary entry '" + entries[i] + "'");
    }
    v.append(std::move(entries[i]));
  }
  return v;
}

void Vocabulary::append(std::string surface) {
  index_.emplace(surface, static_cast<TokenId>(entries_.size()));
  entries_.push_back(std::move(surface));
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_of(std::string_view word) const { return find(word).value_or(kUnk); }

const std::string& Vocabulary::surface(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
    throw ValidationError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(entries_.size()));
  }
  return entries_[static_cast<std::size_t>(id)];
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

TokenSeq tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenSeq out;
  for (const auto& w : split_words(text)) out.push_back(vocab.id_of(w));
  return out;
}

std::string detokenize(std::span<const TokenId> tokens, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i != 0) out.push_back(' ');
    out += vocab.surface(tokens[i]);
  }
  return out;
}

Vocabulary build_vocab(std::span<const RawPair> corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& p : corpus) {
    for (const auto* text : {&p.prompt, &p.response}) {
      for (auto& w : split_words(*text)) ++counts[std::move(w)];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, n] : counts) {
    if (n >= min_count && std::find(kReservedSurfaces.begin(), kReservedSurfaces.end(), w) == kReservedSurfaces.end()) {
      ranked.emplace_back(w, n);
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> entries = kReservedSurfaces;
  for (auto& [w, n] : ranked) entries.push_back(std::move(w));
  return Vocabulary::from_entries(std::move(entries));
}

std::vector<RawPair> parse_jsonl(std::istream& in) {
  std::vector<RawPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(lineno, "record is not a JSON object");
    RawPair p;
    for (auto [key, field] : {std::pair{"id", &p.id}, {"prompt", &p.prompt}, {"response", &p.response}}) {
      auto it = j.find(key);
      if (it == j.end()) throw ParseError(lineno, std::string("missing field \"") + key + "\"");
      if (!it->is_string()) throw ParseError(lineno, std::string("field \"") + key + "\" is not a string");
      *field = it->get<std::string>();
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<RawPair> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file " + path.string());
  return parse_jsonl(in);
}

void write_jsonl(std::ostream& out, std::span<const RawPair> pairs) {
  for (const auto& p : pairs) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["prompt"] = p.prompt;
    j["response"] = p.response;
    out << j.dump() << '\n';
  }
}

void write_jsonl(const std::filesystem::path& path, std::span<const RawPair> pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  write_jsonl(out, pairs);
}

LoadResult tokenize_pairs(std::span<const RawPair> raw, const Vocabulary& vocab, std::size_t max_len) {
  LoadResult result;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& r = raw[i];
    if (!seen.insert(r.id).second) {
      throw ValidationError("duplicate id '" + r.id + "' (record " + std::to_string(i + 1) + ")");
    }
    PromptResponsePair p{r.id, tokenize(r.prompt, vocab), tokenize(r.response, vocab)};
    if (p.prompt.empty() || p.response.empty()) {
      throw ValidationError("record " + std::to_string(i + 1) + " ('" + r.id + "') has an empty prompt or response");
    }
    if (p.response.size() > max_len) {
      ++result.dropped_over_length;
      continue;
    }
    result.dataset.pairs.push_back(std::move(p));
  }
  return result;
}

LoadResult load_jsonl(const std::filesystem::path& path, const Vocabulary& vocab, std::size_t max_len) {
  return tokenize_pairs(read_jsonl(path), vocab, max_len);
}

std::vector<std::string> out_of_vocabulary(std::span<const RawPair> raw, const Vocabulary& vocab) {
  std::vector<std::string> missing;
  std::set<std::string> seen;
  for (const auto& p : raw) {
    for (const auto* text : {&p.prompt, &p.response}) {
      for (auto& w : split_words(*text)) {
        if (!vocab.find(w) && seen.insert(w).second) missing.push_back(std::move(w));
      }
    }
  }
  return missing;
}

DatasetSplits split(const Dataset& dataset, SplitFractions f, std::uint64_t seed) {
  for (double x : {f.train, f.valid, f.test}) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("split fractions must be non-negative");
  }
  if (std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) {
    throw ValidationError("split fractions must sum to 1");
  }
  const std::size_t n = dataset.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(derive_seed({seed, 0x5b11u}));
  rng.shuffle(order);

  // Tolerance keeps exact products such as 10 * 0.1 from flooring to 0.
  auto slice = [n](double frac) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * frac + 1e-9)); };
  const std::size_t n_valid = slice(f.valid);
  const std::size_t n_test = slice(f.test);
  const std::size_t n_train = n - n_valid - n_test;

  DatasetSplits out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& dst = i < n_train ? out.train : (i < n_train + n_valid ? out.valid : out.test);
    dst.pairs.push_back(dataset.pairs[order[i]]);
  }
  return out;
}

void GrammarSpec::validate() const {
  static const std::set<std::string> kFamilies = {"copy", "reverse", "pattern", "mixed"};
  if (kFamilies.count(family) == 0) {
    throw ValidationError("unknown template '" + family + "' (expected copy, reverse, pattern or mixed)");
  }
  if (alphabet < 2 || alphabet > 26) throw ValidationError("alphabet must be in [2, 26]");
  if (min_len < 1 || max_len < min_len) throw ValidationError("need 1 <= min_len <= max_len");
  if (!(noise >= 0.0 && noise <= 1.0)) throw ValidationError("noise must be in [0, 1]");
}

std::vector<SyntheticSample> generate_synthetic_samples(const GrammarSpec& spec, std::size_t count, std::uint64_t seed) {
  spec.validate();
  static const char* kFamilies[] = {"copy", "reverse", "pattern"};
  Rng rng(derive_seed({seed, 0x59e7u}));
  auto symbol = [](std::size_t k) { return std::string(1, static_cast<char>('a' + k)); };
  auto join = [](const std::vector<std::string>& words) {
    std::string s;
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (i != 0) s.push_back(' ');
      s += words[i];
    }
    return s;
  };

  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = rng.uniform();
    std::string family = spec.family;
    if (family == "mixed") family = kFamilies[rng.below(3)];
    const std::size_t span_len = spec.max_len - spec.min_len + 1;
    const std::size_t len = spec.min_len + std::min(span_len - 1, static_cast<std::size_t>(t * static_cast<double>(span_len)));

    std::vector<std::string> payload;
    std::vector<std::string> response;
    if (family == "pattern") {
      const std::size_t motif = (len + 1) / 2;
      for (std::size_t k = 0; k < motif; ++k) payload.push_back(symbol(rng.below(spec.alphabet)));
      for (std::size_t k = 0; k < len; ++k) response.push_back(payload[k % motif]);
    } else {
      for (std::size_t k = 0; k < len; ++k) payload.push_back(symbol(rng.below(spec.alphabet)));
      response = payload;
      if (family == "reverse") std::reverse(response.begin(), response.end());
    }
    for (auto& w : response) {
      // Always draw, so the noise level does not shift the payload stream.
      const double u = rng.uniform();
      const std::size_t replacement = rng.below(spec.alphabet);
      if (u < spec.noise * t) w = symbol(replacement);
    }

    std::vector<std::string> prompt{family};
    prompt.insert(prompt.end(), payload.begin(), payload.end());
    prompt.push_back("=");

    char id[32];
    std::snprintf(id, sizeof id, "syn-%06zu", i);
    out.push_back({RawPair{id, join(prompt), join(response)}, t});
  }
  return out;
}

std::vector<RawPair> generate_synthetic(const GrammarSpec& spec, std::size_t count, std::uint64_t seed) {
  std::vector<RawPair> out;
  for (auto& s : generate_synthetic_samples(spec, count, seed)) out.push_back(std::move(s.pair));
  return out;
}

}  // namespace reflectkd
