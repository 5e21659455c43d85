#pragma once

// One- and two-layer token-mixing models for the histogram task: embedding
// lookup, a single mixing head (constant matrix or dot-product scores, with or
// without a row softmax), a residual connection and a ReLU feed-forward block.
// The value matrix is the identity and there are no positional embeddings.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "tinycount/data.hpp"
#include "tinycount/error.hpp"
#include "tinycount/numerics.hpp"

namespace tinycount {

enum class Mixing { linear, dot };

struct ModelConfig {
  Mixing mixing = Mixing::dot;
  bool softmax = false;
  bool bos = false;
  int layers = 1;
  int T = 2;  // alphabet size
  int L = 2;  // sequence length
  int d = 1;  // embedding dimension
  int p = 1;  // hidden width
  int C = 2;  // output classes (counts 1..C)

  /// Rows seen by the mixing layer (L, or L + 1 with a BOS token).
  int rows() const { return L + (bos ? 1 : 0); }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("invalid model config: " + m); };
    if (T < 2) fail("T must be >= 2");
    if (L < 2) fail("L must be >= 2");
    if (d < 1) fail("d must be >= 1");
    if (p < 1) fail("p must be >= 1");
    if (C < 1 || C > L) fail("C must lie in [1, L]");
    if (layers != 1 && layers != 2) fail("layers must be 1 or 2");
    if (bos && mixing != Mixing::dot) fail("a BOS token requires dot-product mixing");
  }

  /// One of lin, lin+sftm, dot, dot+sftm, bos, bos+sftm.
  std::string architecture() const {
    std::string base = mixing == Mixing::linear ? "lin" : (bos ? "bos" : "dot");
    return softmax ? base + "+sftm" : base;
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline constexpr std::string_view kArchitectures[] = {"lin", "lin+sftm", "dot",
                                                      "dot+sftm", "bos", "bos+sftm"};

/// Fills mixing/softmax/bos of a config from an architecture name.
inline ModelConfig with_architecture(ModelConfig c, std::string_view arch) {
  std::string_view base = arch;
  c.softmax = false;
  if (auto pos = arch.find("+sftm"); pos != std::string_view::npos && pos + 5 == arch.size()) {
    c.softmax = true;
    base = arch.substr(0, pos);
  }
  if (base == "lin") {
    c.mixing = Mixing::linear;
    c.bos = false;
  } else if (base == "dot") {
    c.mixing = Mixing::dot;
    c.bos = false;
  } else if (base == "bos") {
    c.mixing = Mixing::dot;
    c.bos = true;
  } else {
    throw InvalidInput("unknown architecture '" + std::string(arch) + "'");
  }
  return c;
}

struct LayerParams {
  std::optional<Matrix> mixing;  // rows x rows, linear mixing only
  std::optional<Matrix> wq, wk;  // d x d, dot mixing only
  Matrix w1;                     // d x p
  Vector b1;                     // p
  Matrix w2;                     // p x C (last layer) or p x d (inner layer)
  Vector b2;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct ModelParams {
  Matrix embeddings;                   // T x d, row t-1 embeds token t
  std::optional<Vector> bos_embedding; // d
  std::vector<LayerParams> layers;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// All-zero parameters with the shapes implied by `config`.
inline ModelParams zero_params(const ModelConfig& config) {
  config.validate();
  const auto T = static_cast<std::size_t>(config.T), d = static_cast<std::size_t>(config.d),
             p = static_cast<std::size_t>(config.p), C = static_cast<std::size_t>(config.C),
             R = static_cast<std::size_t>(config.rows());
  ModelParams params;
  params.embeddings = Matrix(T, d);
  if (config.bos) params.bos_embedding = Vector(d, 0.0);
  for (int l = 0; l < config.layers; ++l) {
    const bool last = l + 1 == config.layers;
    LayerParams lp;
    if (config.mixing == Mixing::linear) {
      lp.mixing = Matrix(R, R);
    } else {
      lp.wq = Matrix(d, d);
      lp.wk = Matrix(d, d);
    }
    lp.w1 = Matrix(d, p);
    lp.b1 = Vector(p, 0.0);
    lp.w2 = Matrix(p, last ? C : d);
    lp.b2 = Vector(last ? C : d, 0.0);
    params.layers.push_back(std::move(lp));
  }
  return params;
}

/// Named view of one learnable array.
template <typename Span>
struct ArrayView {
  std::string name;
  std::size_t rows;
  std::size_t cols;
  Span values;
};

/// Visits every learnable array in a fixed order with a stable name.
template <typename Params, typename Fn>
  requires std::is_same_v<std::remove_const_t<Params>, ModelParams>
void for_each_array(Params& params, Fn&& fn) {
  using Span = std::conditional_t<std::is_const_v<Params>, std::span<const double>,
                                  std::span<double>>;
  auto mat = [&](const std::string& name, auto& m) {
    fn(ArrayView<Span>{name, m.rows(), m.cols(), Span(m.values())});
  };
  auto vec = [&](const std::string& name, auto& v) {
    fn(ArrayView<Span>{name, 1, v.size(), Span(v)});
  };
  mat("embeddings", params.embeddings);
  if (params.bos_embedding) vec("bos_embedding", *params.bos_embedding);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& lp = params.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    if (lp.mixing) mat(prefix + "mixing", *lp.mixing);
    if (lp.wq) mat(prefix + "wq", *lp.wq);
    if (lp.wk) mat(prefix + "wk", *lp.wk);
    mat(prefix + "w1", lp.w1);
    vec(prefix + "b1", lp.b1);
    mat(prefix + "w2", lp.w2);
    vec(prefix + "b2", lp.b2);
  }
}

/// Throws ConfigError unless every array has the shape `config` implies.
inline void check_shapes(const ModelConfig& config, const ModelParams& params) {
  const ModelParams expected = zero_params(config);
  if (params.layers.size() != expected.layers.size())
    throw ConfigError("parameter layer count does not match config");
  if (params.bos_embedding.has_value() != expected.bos_embedding.has_value())
    throw ConfigError("BOS embedding presence does not match config");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& a = params.layers[l];
    const auto& b = expected.layers[l];
    if (a.mixing.has_value() != b.mixing.has_value() || a.wq.has_value() != b.wq.has_value() ||
        a.wk.has_value() != b.wk.has_value())
      throw ConfigError("layer " + std::to_string(l) + " mixing parameters do not match config");
  }
  std::vector<std::pair<std::size_t, std::size_t>> want;
  for_each_array(expected, [&](const auto& v) { want.emplace_back(v.rows, v.cols); });
  std::size_t i = 0;
  for_each_array(params, [&](const auto& v) {
    if (v.rows != want[i].first || v.cols != want[i].second) {
      throw ConfigError("array '" + v.name + "' has shape " + std::to_string(v.rows) + "x" +
                        std::to_string(v.cols) + ", expected " + std::to_string(want[i].first) +
                        "x" + std::to_string(want[i].second));
    }
    ++i;
  });
}

struct LayerTrace {
  Matrix input;       // rows x d
  Matrix queries;     // X W_Q (dot only)
  Matrix keys;        // X W_K (dot only)
  Matrix scores;      // pre-activation mixing matrix
  Matrix attention;   // post-activation mixing matrix
  Matrix mixed;       // X + A X
  Matrix hidden_pre;  // mixed W1 + b1
  Matrix hidden;      // ReLU(hidden_pre)
  Matrix output;      // hidden W2 + b2
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Matrix logits;  // L x C; the BOS row is never included

  const Matrix& attention() const { return layers.front().attention; }
  const Matrix& mixed_tokens() const { return layers.front().mixed; }
  const Matrix& hidden() const { return layers.back().hidden; }
};

inline void check_tokens(const ModelConfig& config, std::span<const Token> seq) {
  if (seq.size() != static_cast<std::size_t>(config.L)) {
    throw InvalidInput("sequence length " + std::to_string(seq.size()) + " != L = " +
                       std::to_string(config.L));
  }
  for (Token t : seq) {
    if (t < 1 || t > config.T) {
      throw InvalidInput("token " + std::to_string(t) + " outside 1.." + std::to_string(config.T));
    }
  }
}

/// Embedded input rows, with the BOS embedding first when configured.
inline Matrix embed(const ModelConfig& config, const ModelParams& params,
                    std::span<const Token> seq) {
  const std::size_t d = static_cast<std::size_t>(config.d);
  Matrix x(static_cast<std::size_t>(config.rows()), d);
  std::size_t r = 0;
  if (config.bos) {
    std::copy(params.bos_embedding->begin(), params.bos_embedding->end(), x.row(0).begin());
    r = 1;
  }
  for (Token t : seq) {
    auto src = params.embeddings.row(static_cast<std::size_t>(t - 1));
    std::copy(src.begin(), src.end(), x.row(r++).begin());
  }
  return x;
}

/// Mixing + residual + feed-forward for one block, recorded into `trace`.
inline void forward_layer(const ModelConfig& config, const LayerParams& lp, Matrix input,
                          LayerTrace& trace) {
  trace.input = std::move(input);
  const Matrix& x = trace.input;
  if (config.mixing == Mixing::linear) {
    trace.scores = *lp.mixing;
  } else {
    trace.queries = matmul(x, *lp.wq);
    trace.keys = matmul(x, *lp.wk);
    trace.scores = matmul_nt(trace.queries, trace.keys);
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.d));
    for (double& v : trace.scores.values()) v *= scale;
  }
  trace.attention = config.softmax ? softmax_rows(trace.scores) : trace.scores;
  trace.mixed = matmul(trace.attention, x);
  for (std::size_t i = 0; i < x.size(); ++i) trace.mixed.values()[i] += x.values()[i];
  trace.hidden_pre = matmul(trace.mixed, lp.w1);
  trace.hidden = Matrix(trace.hidden_pre.rows(), trace.hidden_pre.cols());
  for (std::size_t r = 0; r < trace.hidden_pre.rows(); ++r) {
    auto zp = trace.hidden_pre.row(r);
    auto h = trace.hidden.row(r);
    for (std::size_t j = 0; j < zp.size(); ++j) {
      zp[j] += lp.b1[j];
      h[j] = zp[j] > 0.0 ? zp[j] : 0.0;
    }
  }
  trace.output = matmul(trace.hidden, lp.w2);
  for (std::size_t r = 0; r < trace.output.rows(); ++r) {
    auto o = trace.output.row(r);
    for (std::size_t j = 0; j < o.size(); ++j) o[j] += lp.b2[j];
  }
}

inline ForwardTrace forward(const ModelConfig& config, const ModelParams& params,
                            std::span<const Token> seq) {
  config.validate();
  check_shapes(config, params);
  check_tokens(config, seq);
  ForwardTrace trace;
  trace.layers.resize(params.layers.size());
  Matrix x = embed(config, params, seq);
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    forward_layer(config, params.layers[l], std::move(x), trace.layers[l]);
    x = trace.layers[l].output;
  }
  const std::size_t skip = config.bos ? 1 : 0;
  const Matrix& out = trace.layers.back().output;
  trace.logits = Matrix(static_cast<std::size_t>(config.L), out.cols());
  for (std::size_t r = 0; r < trace.logits.rows(); ++r) {
    auto src = out.row(r + skip);
    std::copy(src.begin(), src.end(), trace.logits.row(r).begin());
  }
  return trace;
}

/// Predicted counts (1..C) from a trace.
inline std::vector<int> predictions(const ForwardTrace& trace) {
  std::vector<int> out(trace.logits.rows());
  for (std::size_t r = 0; r < out.size(); ++r)
    out[r] = static_cast<int>(argmax_index(trace.logits.row(r))) + 1;
  return out;
}

inline std::vector<int> predict(const ModelConfig& config, const ModelParams& params,
                                std::span<const Token> seq) {
  return predictions(forward(config, params, seq));
}

/// Token-level accuracy: correct positions over all positions.
inline double accuracy(const ModelConfig& config, const ModelParams& params,
                       std::span<const Sample> dataset) {
  if (dataset.empty()) throw InvalidInput("accuracy: empty dataset");
  std::size_t correct = 0, total = 0;
  for (const Sample& s : dataset) {
    const auto pred = predict(config, params, s.x);
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == s.y[i];
    total += pred.size();
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

/// Fraction of sequences with every position correct.
inline double sequence_accuracy(const ModelConfig& config, const ModelParams& params,
                                std::span<const Sample> dataset) {
  if (dataset.empty()) throw InvalidInput("sequence_accuracy: empty dataset");
  std::size_t correct = 0;
  for (const Sample& s : dataset) correct += predict(config, params, s.x) == s.y;
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

/// Learnable parameter count. The mixing matrix contributes rows^2 for linear
/// mixing and 2 d^2 for dot-product mixing.
inline long long count_params(const ModelConfig& config) {
  config.validate();
  const long long T = config.T, d = config.d, p = config.p, C = config.C, R = config.rows();
  long long n = T * d + (config.bos ? d : 0);
  for (int l = 0; l < config.layers; ++l) {
    const long long out = l + 1 == config.layers ? C : d;
    n += config.mixing == Mixing::linear ? R * R : 2 * d * d;
    n += d * p + p + p * out + out;
  }
  return n;
}

}  // namespace tinycount
