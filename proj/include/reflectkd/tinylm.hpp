// SPDX-License-Identifier: Apache-2.0
//
// Fixed-window neural language model:
//
//   x      = concat(E[t_1], ..., E[t_c])            (c*d)
//   hidden = tanh(W1^T x + b1)                      (h)
//   logits = W2^T hidden + b2                       (V)
//
// with hand-written backpropagation and SGD with momentum. The same class
// serves as teacher and student; they differ only in (d, h).
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "reflectkd/corpus.hpp"
#include "reflectkd/divergence.hpp"
#include "reflectkd/linalg.hpp"
#include "reflectkd/metrics.hpp"

namespace reflectkd {

struct LmConfig {
  std::size_t vocab_size = 0;
  std::size_t context = 8;
  std::size_t embed_dim = 8;
  std::size_t hidden_dim = 16;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const LmConfig&, const LmConfig&) = default;
};

/// Parameter-shaped tensor bundle; used for weights, gradients and momentum.
struct LmTensors {
  Matrix embedding;  // V x d
  Matrix w1;         // (c*d) x h
  Vector b1;         // h
  Matrix w2;         // h x V
  Vector b2;         // V

  static LmTensors zeros(const LmConfig& cfg);
  bool same_shape(const LmTensors& other) const;
  bool all_finite() const;
  double squared_norm() const;
  void scale(double s);
  /// this += s * other
  void add_scaled(const LmTensors& other, double s);

  friend bool operator==(const LmTensors& a, const LmTensors& b);
};

struct TinyLmParams {
  LmConfig config;
  LmTensors weights;
};

/// Seeded uniform init in [-0.1, 0.1].
TinyLmParams init(const LmConfig& config);
/// All weights zero; the model is exactly uniform.
TinyLmParams init_zero(const LmConfig& config);

/// Left-pads with PAD to exactly c tokens: the last c tokens of stream[0, end).
TokenSeq context_window(std::span<const TokenId> stream, std::size_t end, std::size_t c);

/// Logits for one context of exactly c tokens. Throws ValidationError on
/// a wrong length or a token id >= V.
Vector forward(const TinyLmParams& params, std::span<const TokenId> context);

/// Logits for each position of a teacher-forced sequence: rows predict
/// response[0..], then EOS, given BOS + prompt as prefix.
Matrix sequence_logits(const TinyLmParams& params, std::span<const TokenId> prompt, std::span<const TokenId> response);

/// Mean CE of response + EOS under the model (floored probabilities).
CeResult sequence_cross_entropy(const TinyLmParams& params, std::span<const TokenId> prompt,
                                std::span<const TokenId> response);

struct TrainingExample {
  TokenSeq context;
  TokenId target = kPad;
  std::optional<Vector> teacher_logits;
};

/// One example per scored position of BOS + prompt + response + EOS.
std::vector<TrainingExample> sequence_examples(std::span<const TokenId> prompt, std::span<const TokenId> response,
                                               std::size_t context);

struct LossAndGrad {
  LossBreakdown loss;
  LmTensors grad;
};

/// Batch-mean alpha * CE + (1 - alpha) * KD and its gradient with respect to
/// every parameter. The KD path (temperature, divergence, tau^2) follows
/// `spec` and is skipped entirely when alpha == 1.
LossAndGrad loss_and_grad(const TinyLmParams& params, std::span<const TrainingExample> batch, double alpha,
                          const DivergenceSpec& spec);

struct OptState {
  double learning_rate = 0.1;
  double momentum = 0.9;
  LmTensors buffers;
  std::uint64_t step_count = 0;

  static OptState for_params(const TinyLmParams& params, double learning_rate = 0.1, double momentum = 0.9);
};

/// buf <- mu * buf + g; w <- w - lr * buf.
void apply_update(TinyLmParams& params, const LmTensors& grads, OptState& opt);

/// Greedy continuation of BOS + prompt. Candidates are the non-reserved ids
/// (ties go to the lowest id); EOS is emitted only when its logit strictly
/// exceeds the best candidate, and ends generation without being appended.
/// PAD, BOS and UNK are never produced.
TokenSeq greedy_decode(const TinyLmParams& params, std::span<const TokenId> prompt, std::size_t max_len);

/// Seeded ancestral sampling from softmax(logits / temperature) over the
/// same candidate set as greedy_decode.
TokenSeq sample_decode(const TinyLmParams& params, std::span<const TokenId> prompt, std::size_t max_len,
                       double temperature, std::uint64_t seed);

// --- checkpoints --------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  TinyLmParams params;
  Vocabulary vocab;
};

nlohmann::ordered_json checkpoint_to_json(const TinyLmParams& params, const Vocabulary& vocab);
Checkpoint checkpoint_from_json(const nlohmann::ordered_json& j);
void save_checkpoint(const std::filesystem::path& path, const TinyLmParams& params, const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace reflectkd
