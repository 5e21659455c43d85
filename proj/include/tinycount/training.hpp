#pragma once

// Cross-entropy gradients for every architecture (derived by hand, checked
// against finite differences in the tests), Adam, and the online protocol:
// a fresh dataset every epoch, minibatches, evaluation on a fixed stream.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "tinycount/data.hpp"
#include "tinycount/error.hpp"
#include "tinycount/model.hpp"
#include "tinycount/numerics.hpp"
#include "tinycount/rng.hpp"

namespace tinycount {

/// Mutable views of every array in visiting order.
inline std::vector<std::span<double>> array_spans(ModelParams& p) {
  std::vector<std::span<double>> out;
  for_each_array(p, [&](const auto& v) { out.push_back(v.values); });
  return out;
}

inline std::vector<std::span<const double>> array_spans(const ModelParams& p) {
  std::vector<std::span<const double>> out;
  for_each_array(p, [&](const auto& v) { out.push_back(v.values); });
  return out;
}

/// Gaussian init: embeddings with std 1/sqrt(d), weight matrices with std
/// 1/sqrt(fan_in), biases zero.
inline ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = zero_params(config);
  SplitMix64 rng(derive_seed(seed, {hash_string("init")}));
  std::normal_distribution<double> normal(0.0, 1.0);
  const double R = config.rows(), d = config.d, hidden = config.p;
  for_each_array(p, [&](const auto& v) {
    const std::string& n = v.name;
    double stddev = 0.0;
    if (n == "embeddings" || n == "bos_embedding") {
      stddev = 1.0 / std::sqrt(d);
    } else if (n.ends_with(".mixing")) {
      stddev = 1.0 / std::sqrt(R);
    } else if (n.ends_with(".wq") || n.ends_with(".wk") || n.ends_with(".w1")) {
      stddev = 1.0 / std::sqrt(d);
    } else if (n.ends_with(".w2")) {
      stddev = 1.0 / std::sqrt(hidden);
    }
    if (stddev == 0.0) return;
    for (double& x : v.values) x = stddev * normal(rng);
  });
  return p;
}

namespace detail {

inline void add_colsum(Vector& out, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  }
}

inline void add_into(Matrix& out, const Matrix& m) {
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += m.values()[i];
}

/// Backward through one block given d(loss)/d(output); returns d/d(input).
inline Matrix backward_layer(const ModelConfig& config, const LayerParams& lp, const LayerTrace& tr,
                             const Matrix& d_out, LayerParams& g) {
  add_into(g.w2, matmul_tn(tr.hidden, d_out));
  add_colsum(g.b2, d_out);
  Matrix dz = matmul_nt(d_out, lp.w2);
  for (std::size_t i = 0; i < dz.size(); ++i)
    if (!(tr.hidden_pre.values()[i] > 0.0)) dz.values()[i] = 0.0;
  add_into(g.w1, matmul_tn(tr.mixed, dz));
  add_colsum(g.b1, dz);
  const Matrix dm = matmul_nt(dz, lp.w1);

  // mixed = X + A X
  Matrix dx = dm;
  add_into(dx, matmul_tn(tr.attention, dm));
  const Matrix da = matmul_nt(dm, tr.input);

  Matrix ds = da;
  if (config.softmax) {
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      auto a = tr.attention.row(r);
      auto dar = da.row(r);
      auto dsr = ds.row(r);
      const double inner = dot(dar, a);
      for (std::size_t j = 0; j < dsr.size(); ++j) dsr[j] = a[j] * (dar[j] - inner);
    }
  }

  if (config.mixing == Mixing::linear) {
    add_into(*g.mixing, ds);
  } else {
    const double c = 1.0 / std::sqrt(static_cast<double>(config.d));
    Matrix dq = matmul(ds, tr.keys);
    Matrix dk = matmul_tn(ds, tr.queries);
    for (double& v : dq.values()) v *= c;
    for (double& v : dk.values()) v *= c;
    add_into(*g.wq, matmul_tn(tr.input, dq));
    add_into(*g.wk, matmul_tn(tr.input, dk));
    add_into(dx, matmul_nt(dq, *lp.wq));
    add_into(dx, matmul_nt(dk, *lp.wk));
  }
  return dx;
}

}  // namespace detail

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean cross-entropy over all (sample, position) pairs, labels 1..C, and its
/// gradient with respect to every array. The BOS position carries no loss.
inline LossAndGrad loss_and_gradients(const ModelConfig& config, const ModelParams& params,
                                      std::span<const Sample> batch) {
  if (batch.empty()) throw InvalidInput("loss_and_gradients: empty batch");
  config.validate();
  check_shapes(config, params);
  LossAndGrad out{0.0, zero_params(config)};
  const double scale = 1.0 / (static_cast<double>(batch.size()) * config.L);
  const std::size_t skip = config.bos ? 1 : 0;
  for (const Sample& s : batch) {
    const ForwardTrace tr = forward(config, params, s.x);
    const Matrix& out_last = tr.layers.back().output;
    Matrix d_out(out_last.rows(), out_last.cols());
    for (std::size_t l = 0; l < static_cast<std::size_t>(config.L); ++l) {
      const int y = s.y[l];
      if (y < 1 || y > config.C)
        throw InvalidInput("label " + std::to_string(y) + " outside 1.." + std::to_string(config.C));
      auto z = tr.logits.row(l);
      const double lse = log_sum_exp(z);
      out.loss += (lse - z[static_cast<std::size_t>(y - 1)]) * scale;
      auto d = d_out.row(l + skip);
      for (std::size_t c = 0; c < z.size(); ++c) d[c] = std::exp(z[c] - lse) * scale;
      d[static_cast<std::size_t>(y - 1)] -= scale;
    }
    Matrix dx = std::move(d_out);
    for (std::size_t li = params.layers.size(); li-- > 0;)
      dx = detail::backward_layer(config, params.layers[li], tr.layers[li], dx, out.grads.layers[li]);
    if (config.bos) {
      auto row = dx.row(0);
      for (std::size_t j = 0; j < row.size(); ++j) (*out.grads.bos_embedding)[j] += row[j];
    }
    for (std::size_t l = 0; l < s.x.size(); ++l) {
      auto src = dx.row(l + skip);
      auto dst = out.grads.embeddings.row(static_cast<std::size_t>(s.x[l] - 1));
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
  }
  return out;
}

/// Mean cross-entropy only.
inline double mean_loss(const ModelConfig& config, const ModelParams& params,
                        std::span<const Sample> batch) {
  if (batch.empty()) throw InvalidInput("mean_loss: empty batch");
  double loss = 0.0;
  for (const Sample& s : batch) {
    const ForwardTrace tr = forward(config, params, s.x);
    for (std::size_t l = 0; l < static_cast<std::size_t>(config.L); ++l) {
      auto z = tr.logits.row(l);
      loss += log_sum_exp(z) - z[static_cast<std::size_t>(s.y[l] - 1)];
    }
  }
  return loss / (static_cast<double>(batch.size()) * config.L);
}

/// Worst relative disagreement between the analytic gradient and central
/// differences with step h, over every parameter. The denominator is floored
/// at `floor` so entries that are both near zero do not dominate.
inline double gradient_check(const ModelConfig& config, ModelParams params,
                             std::span<const Sample> batch, double h = 1e-5, double floor = 1e-6) {
  const LossAndGrad lg = loss_and_gradients(config, params, batch);
  auto ps = array_spans(params);
  const auto gs = array_spans(lg.grads);
  double worst = 0.0;
  for (std::size_t a = 0; a < ps.size(); ++a)
    for (std::size_t i = 0; i < ps[a].size(); ++i) {
      const double orig = ps[a][i];
      ps[a][i] = orig + h;
      const double up = mean_loss(config, params, batch);
      ps[a][i] = orig - h;
      const double down = mean_loss(config, params, batch);
      ps[a][i] = orig;
      const double fd = (up - down) / (2.0 * h), an = gs[a][i];
      worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor}));
    }
  return worst;
}

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  ModelParams m, v;
  long long step = 0;

  static AdamState zeros(const ModelConfig& config) { return {zero_params(config), zero_params(config), 0}; }
};

/// One bias-corrected Adam update in place.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                      const AdamOptions& o) {
  auto p = array_spans(params);
  auto g = array_spans(grads);
  auto m = array_spans(state.m);
  auto v = array_spans(state.v);
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw ConfigError("adam_step: parameter, gradient and state layouts differ");
  ++state.step;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step));
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a].size() != g[a].size()) throw ConfigError("adam_step: array size mismatch");
    for (std::size_t i = 0; i < p[a].size(); ++i) {
      m[a][i] = o.beta1 * m[a][i] + (1.0 - o.beta1) * g[a][i];
      v[a][i] = o.beta2 * v[a][i] + (1.0 - o.beta2) * g[a][i] * g[a][i];
      p[a][i] -= o.learning_rate * (m[a][i] / c1) / (std::sqrt(v[a][i] / c2) + o.eps);
    }
  }
}

struct TrainSpec {
  ModelConfig config;
  int epochs = 500;
  int batch_size = 32;
  int samples_per_epoch = 10000;
  int eval_samples = 3000;
  AdamOptions adam;
  std::uint64_t seed = 0;
  bool freeze_embeddings = false;
  double clip_norm = 0.0;  // 0 disables gradient clipping
  Scheme scheme = Scheme::partition;
  /// Stop once eval accuracy reaches this value (> 1 never stops early).
  double stop_accuracy = 2.0;

  void validate() const {
    config.validate();
    if (epochs < 1 || batch_size < 1 || samples_per_epoch < 1 || eval_samples < 1)
      throw ConfigError("training counts must be positive");
    if (!(adam.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(clip_norm >= 0.0)) throw ConfigError("clip_norm must be >= 0");
  }
};

struct TrainHistory {
  std::vector<double> loss;      // mean training loss per epoch
  std::vector<double> accuracy;  // token accuracy on the eval stream per epoch
  ModelParams final_params;
  ModelParams best_params;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  int best_epoch = -1;
  double final_sequence_accuracy = 0.0;
  double wall_seconds = 0.0;
};

inline double max_abs_param(const ModelParams& p) {
  double m = 0.0;
  for (auto s : array_spans(p))
    for (double x : s) m = std::max(m, std::abs(x));
  return m;
}

/// Streams: init, per-epoch training data, per-epoch batch order and a fixed
/// evaluation set, all derived from spec.seed.
inline TrainHistory train(const TrainSpec& spec,
                          const std::function<void(int, double, double)>& on_epoch = {},
                          std::optional<ModelParams> initial = std::nullopt) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ModelConfig& cfg = spec.config;
  ModelParams params = initial ? std::move(*initial) : init_params(cfg, spec.seed);
  check_shapes(cfg, params);
  AdamState state = AdamState::zeros(cfg);
  const std::vector<Sample> eval =
      make_dataset({cfg.T, cfg.L, spec.scheme, derive_seed(spec.seed, {hash_string("eval")})},
                   static_cast<std::size_t>(spec.eval_samples));
  TrainHistory h;
  h.best_params = params;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    const auto e = static_cast<std::uint64_t>(epoch);
    const std::vector<Sample> data =
        make_dataset({cfg.T, cfg.L, spec.scheme, derive_seed(spec.seed, {hash_string("train"), e})},
                     static_cast<std::size_t>(spec.samples_per_epoch));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 shuffle_rng(derive_seed(spec.seed, {hash_string("shuffle"), e}));
    for (std::size_t i = order.size() - 1; i > 0; --i)
      std::swap(order[i], order[std::uniform_int_distribution<std::size_t>(0, i)(shuffle_rng)]);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    std::vector<Sample> batch;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(spec.batch_size)) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(spec.batch_size));
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
      LossAndGrad lg = loss_and_gradients(cfg, params, batch);
      if (!std::isfinite(lg.loss)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", batch " << batches
           << " (max |param| = " << max_abs_param(params) << ")";
        throw NumericalFailure(os.str());
      }
      if (spec.freeze_embeddings) {
        lg.grads.embeddings.fill(0.0);
        if (lg.grads.bos_embedding) std::fill(lg.grads.bos_embedding->begin(), lg.grads.bos_embedding->end(), 0.0);
      }
      if (spec.clip_norm > 0.0) {
        double sq = 0.0;
        for (auto s : array_spans(lg.grads))
          for (double x : s) sq += x * x;
        const double n = std::sqrt(sq);
        if (n > spec.clip_norm)
          for (auto s : array_spans(lg.grads))
            for (double& x : s) x *= spec.clip_norm / n;
      }
      adam_step(params, lg.grads, state, spec.adam);
      epoch_loss += lg.loss;
      ++batches;
    }
    const double acc = accuracy(cfg, params, eval);
    h.loss.push_back(epoch_loss / static_cast<double>(batches));
    h.accuracy.push_back(acc);
    if (acc > h.best_accuracy || h.best_epoch < 0) {
      h.best_accuracy = acc;
      h.best_epoch = epoch;
      h.best_params = params;
    }
    if (on_epoch) on_epoch(epoch, h.loss.back(), acc);
    if (acc >= spec.stop_accuracy) break;
  }
  h.final_accuracy = h.accuracy.back();
  h.final_sequence_accuracy = sequence_accuracy(cfg, params, eval);
  h.final_params = std::move(params);
  h.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return h;
}

}  // namespace tinycount
