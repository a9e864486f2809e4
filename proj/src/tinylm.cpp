// SPDX-License-Identifier: Apache-2.0
#include "reflectkd/tinylm.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "reflectkd/error.hpp"
#include "reflectkd/rng.hpp"

namespace reflectkd {

void LmConfig::validate() const {
  if (vocab_size < kNumReserved) throw ValidationError("vocab_size must cover the reserved tokens");
  if (context < 1 || embed_dim < 1 || hidden_dim < 1) throw ValidationError("model dimensions must be >= 1");
}

LmTensors LmTensors::zeros(const LmConfig& cfg) {
  const auto V = static_cast<Eigen::Index>(cfg.vocab_size);
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  const auto h = static_cast<Eigen::Index>(cfg.hidden_dim);
  const auto cd = static_cast<Eigen::Index>(cfg.context) * d;
  return {Matrix::Zero(V, d), Matrix::Zero(cd, h), Vector::Zero(h), Matrix::Zero(h, V), Vector::Zero(V)};
}

bool LmTensors::same_shape(const LmTensors& o) const {
  auto eq = [](const auto& a, const auto& b) { return a.rows() == b.rows() && a.cols() == b.cols(); };
  return eq(embedding, o.embedding) && eq(w1, o.w1) && eq(b1, o.b1) && eq(w2, o.w2) && eq(b2, o.b2);
}

bool LmTensors::all_finite() const {
  return embedding.allFinite() && w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

double LmTensors::squared_norm() const {
  return embedding.squaredNorm() + w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
}

void LmTensors::scale(double s) {
  embedding *= s;
  w1 *= s;
  b1 *= s;
  w2 *= s;
  b2 *= s;
}

void LmTensors::add_scaled(const LmTensors& o, double s) {
  embedding += s * o.embedding;
  w1 += s * o.w1;
  b1 += s * o.b1;
  w2 += s * o.w2;
  b2 += s * o.b2;
}

bool operator==(const LmTensors& a, const LmTensors& b) {
  return a.same_shape(b) && a.embedding == b.embedding && a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 &&
         a.b2 == b.b2;
}

TinyLmParams init(const LmConfig& config) {
  config.validate();
  TinyLmParams p{config, LmTensors::zeros(config)};
  Rng rng(derive_seed({config.seed, 0x1417u}));
  auto fill = [&rng](auto& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-0.1, 0.1);
  };
  fill(p.weights.embedding);
  fill(p.weights.w1);
  fill(p.weights.b1);
  fill(p.weights.w2);
  fill(p.weights.b2);
  return p;
}

TinyLmParams init_zero(const LmConfig& config) {
  config.validate();
  return {config, LmTensors::zeros(config)};
}

TokenSeq context_window(std::span<const TokenId> stream, std::size_t end, std::size_t c) {
  TokenSeq ctx(c, kPad);
  const std::size_t take = std::min(c, end);
  for (std::size_t k = 0; k < take; ++k) ctx[c - take + k] = stream[end - take + k];
  return ctx;
}

namespace {

struct Activations {
  Vector x;       // concatenated embeddings
  Vector hidden;  // tanh output
  Vector logits;
};

// Each row is computed on its own so results never depend on batch composition.
Activations forward_full(const TinyLmParams& params, std::span<const TokenId> context) {
  const auto& cfg = params.config;
  const auto& w = params.weights;
  if (context.size() != cfg.context) {
    throw ValidationError("context has " + std::to_string(context.size()) + " tokens, model expects " +
                          std::to_string(cfg.context));
  }
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  Activations a;
  a.x.resize(static_cast<Eigen::Index>(cfg.context) * d);
  for (std::size_t k = 0; k < context.size(); ++k) {
    const TokenId t = context[k];
    if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size) {
      throw ValidationError("token id " + std::to_string(t) + " >= vocab size " + std::to_string(cfg.vocab_size));
    }
    a.x.segment(static_cast<Eigen::Index>(k) * d, d) = w.embedding.row(t).transpose();
  }
  a.hidden = (w.w1.transpose() * a.x + w.b1).array().tanh().matrix();
  a.logits = w.w2.transpose() * a.hidden + w.b2;
  return a;
}

// ln softmax(z)[t] via log-sum-exp.
double log_softmax_at(const Vector& z, TokenId t) {
  const double m = z.maxCoeff();
  return z(t) - m - std::log((z.array() - m).exp().sum());
}

}  // namespace

Vector forward(const TinyLmParams& params, std::span<const TokenId> context) {
  return forward_full(params, context).logits;
}

Matrix sequence_logits(const TinyLmParams& params, std::span<const TokenId> prompt, std::span<const TokenId> response) {
  TokenSeq stream;
  stream.reserve(prompt.size() + response.size() + 1);
  stream.push_back(kBos);
  stream.insert(stream.end(), prompt.begin(), prompt.end());
  stream.insert(stream.end(), response.begin(), response.end());
  const std::size_t first = 1 + prompt.size();
  const auto n = static_cast<Eigen::Index>(response.size() + 1);
  Matrix out(n, static_cast<Eigen::Index>(params.config.vocab_size));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ctx = context_window(stream, first + static_cast<std::size_t>(i), params.config.context);
    out.row(i) = forward(params, ctx).transpose();
  }
  return out;
}

CeResult sequence_cross_entropy(const TinyLmParams& params, std::span<const TokenId> prompt,
                                std::span<const TokenId> response) {
  const Matrix logits = sequence_logits(params, prompt, response);
  Matrix probs(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    probs.row(i) = temp_softmax(logits.row(i).transpose(), 1.0).probs().transpose();
  }
  TokenSeq targets(response.begin(), response.end());
  targets.push_back(kEos);
  return token_cross_entropy(probs, targets);
}

std::vector<TrainingExample> sequence_examples(std::span<const TokenId> prompt, std::span<const TokenId> response,
                                               std::size_t context) {
  TokenSeq stream;
  stream.push_back(kBos);
  stream.insert(stream.end(), prompt.begin(), prompt.end());
  stream.insert(stream.end(), response.begin(), response.end());
  stream.push_back(kEos);
  std::vector<TrainingExample> out;
  out.reserve(response.size() + 1);
  for (std::size_t pos = 1 + prompt.size(); pos < stream.size(); ++pos) {
    out.push_back({context_window(stream, pos, context), stream[pos], std::nullopt});
  }
  return out;
}

LossAndGrad loss_and_grad(const TinyLmParams& params, std::span<const TrainingExample> batch, double alpha,
                          const DivergenceSpec& spec) {
  if (batch.empty()) throw ValidationError("loss_and_grad: empty batch");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must be in [0, 1]");
  const bool use_kd = alpha < 1.0;
  if (use_kd) {
    spec.validate();
    for (const auto& ex : batch) {
      if (!ex.teacher_logits) throw ValidationError("teacher logits are required when alpha < 1");
    }
  }
  const auto& cfg = params.config;
  const auto& w = params.weights;
  const auto B = static_cast<Eigen::Index>(batch.size());
  const auto V = static_cast<Eigen::Index>(cfg.vocab_size);
  const auto d = static_cast<Eigen::Index>(cfg.embed_dim);
  const auto cd = static_cast<Eigen::Index>(cfg.context) * d;
  const auto H = static_cast<Eigen::Index>(cfg.hidden_dim);
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  Matrix X(B, cd), Hid(B, H), dZ(B, V);
  double ce_sum = 0.0;
  double kd_sum = 0.0;
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& ex = batch[static_cast<std::size_t>(b)];
    if (ex.target < 0 || ex.target >= V) throw ValidationError("target id outside vocabulary");
    auto act = forward_full(params, ex.context);
    X.row(b) = act.x.transpose();
    Hid.row(b) = act.hidden.transpose();

    const double m = act.logits.maxCoeff();
    Vector softmax = (act.logits.array() - m).exp().matrix();
    softmax /= softmax.sum();
    ce_sum -= log_softmax_at(act.logits, ex.target);
    Vector dz = softmax;
    dz(ex.target) -= 1.0;
    dz *= alpha;
    if (use_kd) {
      const auto& t = *ex.teacher_logits;
      if (t.size() != V) throw ValidationError("teacher logits have the wrong vocabulary size");
      kd_sum += kd_loss_position(t, act.logits, spec);
      dz += (1.0 - alpha) * kd_grad_position(t, act.logits, spec);
    }
    dZ.row(b) = dz.transpose() * inv_b;
  }

  LossAndGrad out;
  out.loss = total_loss(ce_sum * inv_b, kd_sum * inv_b, alpha);
  auto& g = out.grad;
  g = LmTensors::zeros(cfg);
  g.w2.noalias() = Hid.transpose() * dZ;
  g.b2 = dZ.colwise().sum().transpose();
  Matrix dA = (dZ * w.w2.transpose()).array() * (1.0 - Hid.array().square());
  g.w1.noalias() = X.transpose() * dA;
  g.b1 = dA.colwise().sum().transpose();
  const Matrix dX = dA * w.w1.transpose();
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& ctx = batch[static_cast<std::size_t>(b)].context;
    for (std::size_t k = 0; k < ctx.size(); ++k) {
      g.embedding.row(ctx[k]) += dX.row(b).segment(static_cast<Eigen::Index>(k) * d, d);
    }
  }
  return out;
}

OptState OptState::for_params(const TinyLmParams& params, double learning_rate, double momentum) {
  OptState s;
  s.learning_rate = learning_rate;
  s.momentum = momentum;
  s.buffers = LmTensors::zeros(params.config);
  return s;
}

void apply_update(TinyLmParams& params, const LmTensors& grads, OptState& opt) {
  if (!grads.same_shape(params.weights) || !opt.buffers.same_shape(params.weights)) {
    throw ValidationError("apply_update: gradient or momentum shape does not match parameters");
  }
  opt.buffers.scale(opt.momentum);
  opt.buffers.add_scaled(grads, 1.0);
  params.weights.add_scaled(opt.buffers, -opt.learning_rate);
  ++opt.step_count;
}

namespace {

template <typename Pick>
TokenSeq decode_loop(const TinyLmParams& params, std::span<const TokenId> prompt, std::size_t max_len, Pick pick) {
  TokenSeq stream;
  stream.push_back(kBos);
  stream.insert(stream.end(), prompt.begin(), prompt.end());
  TokenSeq out;
  while (out.size() < max_len) {
    const Vector z = forward(params, context_window(stream, stream.size(), params.config.context));
    const TokenId next = pick(z);
    if (next == kEos) break;
    out.push_back(next);
    stream.push_back(next);
  }
  return out;
}

}  // namespace

TokenSeq greedy_decode(const TinyLmParams& params, std::span<const TokenId> prompt, std::size_t max_len) {
  return decode_loop(params, prompt, max_len, [](const Vector& z) {
    if (z.size() <= static_cast<Eigen::Index>(kNumReserved)) return kEos;
    auto best = static_cast<Eigen::Index>(kNumReserved);
    for (Eigen::Index j = best + 1; j < z.size(); ++j) {
      if (z(j) > z(best)) best = j;
    }
    return z(kEos) > z(best) ? kEos : static_cast<TokenId>(best);
  });
}

TokenSeq sample_decode(const TinyLmParams& params, std::span<const TokenId> prompt, std::size_t max_len,
                       double temperature, std::uint64_t seed) {
  if (!(temperature > 0.0)) throw ValidationError("sampling temperature must be positive");
  Rng rng(derive_seed({seed, 0x5a3bu}));
  return decode_loop(params, prompt, max_len, [&](const Vector& z) {
    // Candidates: EOS and every non-reserved id.
    std::vector<TokenId> ids{kEos};
    for (auto j = static_cast<TokenId>(kNumReserved); j < z.size(); ++j) ids.push_back(j);
    double m = -INFINITY;
    for (auto j : ids) m = std::max(m, z(j));
    std::vector<double> w(ids.size());
    double total = 0.0;
    for (std::size_t k = 0; k < ids.size(); ++k) total += (w[k] = std::exp((z(ids[k]) - m) / temperature));
    double u = rng.uniform() * total;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (u < w[k]) return ids[k];
      u -= w[k];
    }
    // Rounding left u just past the last bucket.
    for (std::size_t k = ids.size(); k-- > 0;) {
      if (w[k] > 0.0) return ids[k];
    }
    return kEos;
  });
}

// --- checkpoints --------------------------------------------------------------

namespace {

template <typename M>
nlohmann::json tensor_to_json(const M& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

template <typename M>
void tensor_from_json(const nlohmann::json& j, M& m, const char* name) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows != m.rows() || cols != m.cols() || static_cast<Eigen::Index>(data.size()) != m.size()) {
    throw ValidationError(std::string("checkpoint tensor '") + name + "' has the wrong shape");
  }
  std::copy(data.begin(), data.end(), m.data());
}

}  // namespace

nlohmann::ordered_json checkpoint_to_json(const TinyLmParams& params, const Vocabulary& vocab) {
  const auto& c = params.config;
  const auto& w = params.weights;
  nlohmann::ordered_json j;
  j["format"] = "reflectkd-checkpoint";
  j["version"] = kCheckpointVersion;
  j["config"] = {{"vocab_size", c.vocab_size},
                 {"context", c.context},
                 {"embed_dim", c.embed_dim},
                 {"hidden_dim", c.hidden_dim},
                 {"seed", c.seed}};
  j["vocab"] = vocab.entries();
  j["tensors"] = {{"embedding", tensor_to_json(w.embedding)},
                  {"w1", tensor_to_json(w.w1)},
                  {"b1", tensor_to_json(w.b1)},
                  {"w2", tensor_to_json(w.w2)},
                  {"b2", tensor_to_json(w.b2)}};
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::ordered_json& j) {
  try {
    if (j.at("format") != "reflectkd-checkpoint") throw ValidationError("not a reflectkd checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + j.at("version").dump());
    }
    const auto& jc = j.at("config");
    LmConfig c;
    c.vocab_size = jc.at("vocab_size").get<std::size_t>();
    c.context = jc.at("context").get<std::size_t>();
    c.embed_dim = jc.at("embed_dim").get<std::size_t>();
    c.hidden_dim = jc.at("hidden_dim").get<std::size_t>();
    c.seed = jc.at("seed").get<std::uint64_t>();
    c.validate();
    auto vocab = Vocabulary::from_entries(j.at("vocab").get<std::vector<std::string>>());
    if (vocab.size() != c.vocab_size) throw ValidationError("checkpoint vocabulary size does not match config");
    Checkpoint ck{init_zero(c), std::move(vocab)};
    const auto& jt = j.at("tensors");
    auto& w = ck.params.weights;
    tensor_from_json(jt.at("embedding"), w.embedding, "embedding");
    tensor_from_json(jt.at("w1"), w.w1, "w1");
    tensor_from_json(jt.at("b1"), w.b1, "b1");
    tensor_from_json(jt.at("w2"), w.w2, "w2");
    tensor_from_json(jt.at("b2"), w.b2, "b2");
    if (!w.all_finite()) throw ValidationError("checkpoint contains non-finite weights");
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const TinyLmParams& params, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << checkpoint_to_json(params, vocab).dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace reflectkd
