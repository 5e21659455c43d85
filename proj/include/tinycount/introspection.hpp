#pragma once

// Mechanistic probes on a model: attention matrices, embedding overlaps,
// confusion matrices, synthetic feed-forward inputs, logit curves over
// two-token sequences and singular values of W1.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tinycount/data.hpp"
#include "tinycount/error.hpp"
#include "tinycount/model.hpp"
#include "tinycount/numerics.hpp"

namespace tinycount {

struct ProbeTable {
  std::string name;
  std::vector<std::string> row_labels;
  std::vector<std::string> columns;
  Matrix cells;  // row_labels.size() x columns.size()
};

struct ProbeReport {
  std::string kind;
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<ProbeTable> tables;

  const ProbeTable& table(std::string_view name) const {
    for (const auto& t : tables)
      if (t.name == name) return t;
    throw InvalidInput("probe report has no table '" + std::string(name) + "'");
  }
};

inline std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// One CSV per table: a label column followed by the table's columns.
inline void write_csv(std::ostream& os, const ProbeTable& t) {
  os << "label";
  for (const auto& c : t.columns) os << ',' << c;
  os << '\n';
  for (std::size_t r = 0; r < t.row_labels.size(); ++r) {
    os << t.row_labels[r];
    for (double v : t.cells.row(r)) os << ',' << format_double(v);
    os << '\n';
  }
}

/// Metadata header: kind, inputs and the shape and labels of every table.
inline nlohmann::json report_metadata(const ProbeReport& r) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : r.tables)
    tables.push_back({{"name", t.name},
                      {"rows", t.row_labels.size()},
                      {"columns", t.columns},
                      {"row_labels", t.row_labels}});
  return {{"kind", r.kind}, {"inputs", r.inputs}, {"tables", tables}};
}

inline void check_report(const ProbeReport& r) {
  for (const auto& t : r.tables) {
    if (t.cells.rows() != t.row_labels.size() || t.cells.cols() != t.columns.size())
      throw InvalidInput("probe table '" + t.name + "' is not labeled consistently");
    if (!all_finite(t.cells.values()))
      throw NumericalFailure("probe table '" + t.name + "' has non-finite cells");
  }
}

namespace detail {

inline std::vector<std::string> position_labels(const ModelConfig& config, std::span<const Token> seq) {
  std::vector<std::string> out;
  if (config.bos) out.push_back("0:BOS");
  for (std::size_t i = 0; i < seq.size(); ++i)
    out.push_back(std::to_string(i + (config.bos ? 1 : 0)) + ":t" + std::to_string(seq[i]));
  return out;
}

inline std::vector<std::string> class_labels(int C) {
  std::vector<std::string> out;
  for (int c = 1; c <= C; ++c) out.push_back("c" + std::to_string(c));
  return out;
}

}  // namespace detail

/// Post-activation mixing matrix of every layer, rows and columns labeled by
/// position and token; the BOS column index is recorded when present.
inline ProbeReport attention_trace(const ModelConfig& config, const ModelParams& params,
                                   std::span<const Token> seq) {
  const ForwardTrace tr = forward(config, params, seq);
  ProbeReport r{"attention", {{"sequence", std::vector<Token>(seq.begin(), seq.end())},
                              {"architecture", config.architecture()},
                              {"bos_column", config.bos ? nlohmann::json(0) : nlohmann::json(nullptr)}},
                {}};
  const auto labels = detail::position_labels(config, seq);
  for (std::size_t l = 0; l < tr.layers.size(); ++l)
    r.tables.push_back({"layer" + std::to_string(l), labels, labels, tr.layers[l].attention});
  check_report(r);
  return r;
}

/// Cosine and raw inner products of embeddings grouped as same token,
/// different tokens and BOS against tokens. Zero-norm embeddings are listed in
/// inputs.zero_norm and excluded from the cosine columns.
inline ProbeReport overlap_distribution(const ModelParams& params, int bins = 20) {
  const Matrix& e = params.embeddings;
  if (e.rows() < 2) throw InvalidInput("overlap_distribution needs at least 2 tokens");
  if (bins < 1) throw InvalidInput("overlap_distribution: bins must be >= 1");
  std::vector<double> norms(e.rows());
  std::vector<int> zero;
  for (std::size_t t = 0; t < e.rows(); ++t) {
    norms[t] = norm(e.row(t));
    if (!(norms[t] > 0.0)) zero.push_back(static_cast<int>(t + 1));
  }
  struct Group {
    std::vector<double> cos, raw;
  } same, diff, bos;
  for (std::size_t t = 0; t < e.rows(); ++t) {
    same.raw.push_back(dot(e.row(t), e.row(t)));
    if (norms[t] > 0.0) same.cos.push_back(1.0);
    for (std::size_t s = t + 1; s < e.rows(); ++s) {
      const double v = dot(e.row(t), e.row(s));
      diff.raw.push_back(v);
      if (norms[t] > 0.0 && norms[s] > 0.0) diff.cos.push_back(v / (norms[t] * norms[s]));
    }
  }
  if (params.bos_embedding) {
    const std::span<const double> b(*params.bos_embedding);
    const double nb = norm(b);
    for (std::size_t t = 0; t < e.rows(); ++t) {
      const double v = dot(b, e.row(t));
      bos.raw.push_back(v);
      if (nb > 0.0 && norms[t] > 0.0) bos.cos.push_back(v / (nb * norms[t]));
    }
  }

  auto mmm = [](const std::vector<double>& v, double& lo, double& hi, double& mean) {
    if (v.empty()) return;
    lo = *std::min_element(v.begin(), v.end());
    hi = *std::max_element(v.begin(), v.end());
    double s = 0;
    for (double x : v) s += x;
    mean = s / static_cast<double>(v.size());
  };
  ProbeTable summary{"summary", {}, {"count", "cos_count", "cos_min", "cos_max", "cos_mean",
                                     "dot_min", "dot_max", "dot_mean"}, Matrix()};
  std::vector<std::pair<std::string, const Group*>> groups = {{"same", &same}, {"different", &diff}};
  if (params.bos_embedding) groups.emplace_back("bos", &bos);
  summary.cells = Matrix(groups.size(), summary.columns.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    summary.row_labels.push_back(groups[g].first);
    const Group& G = *groups[g].second;
    double cmin = 0, cmax = 0, cmean = 0, dmin = 0, dmax = 0, dmean = 0;
    mmm(G.cos, cmin, cmax, cmean);
    mmm(G.raw, dmin, dmax, dmean);
    const double row[] = {static_cast<double>(G.raw.size()), static_cast<double>(G.cos.size()),
                          cmin, cmax, cmean, dmin, dmax, dmean};
    std::copy(std::begin(row), std::end(row), summary.cells.row(g).begin());
  }

  ProbeTable hist{"histogram", {}, {"cos_lo", "cos_hi"}, Matrix()};
  for (const auto& g : groups) hist.columns.push_back(g.first);
  hist.cells = Matrix(static_cast<std::size_t>(bins), hist.columns.size());
  const double width = 2.0 / bins;
  for (int b = 0; b < bins; ++b) {
    hist.row_labels.push_back("bin" + std::to_string(b));
    hist.cells(b, 0) = -1.0 + b * width;
    hist.cells(b, 1) = -1.0 + (b + 1) * width;
  }
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (double c : groups[g].second->cos) {
      const int b = std::clamp(static_cast<int>(std::floor((c + 1.0) / width)), 0, bins - 1);
      hist.cells(static_cast<std::size_t>(b), g + 2) += 1.0;
    }

  ProbeReport r{"overlap", {{"tokens", e.rows()}, {"bos", params.bos_embedding.has_value()},
                            {"zero_norm", zero}, {"bins", bins}},
                {std::move(summary), std::move(hist)}};
  check_report(r);
  return r;
}

/// Counts of (true count, predicted class) over every position of the dataset.
inline ProbeReport confusion_matrix(const ModelConfig& config, const ModelParams& params,
                                    std::span<const Sample> dataset) {
  if (dataset.empty()) throw InvalidInput("confusion_matrix: empty dataset");
  ProbeTable t{"confusion", {}, {}, Matrix(static_cast<std::size_t>(config.L), static_cast<std::size_t>(config.C))};
  for (int k = 1; k <= config.L; ++k) t.row_labels.push_back("true" + std::to_string(k));
  for (int c = 1; c <= config.C; ++c) t.columns.push_back("pred" + std::to_string(c));
  for (const Sample& s : dataset) {
    const auto pred = predict(config, params, s.x);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (s.y[i] < 1 || s.y[i] > config.L) throw InvalidInput("label outside 1..L");
      t.cells(static_cast<std::size_t>(s.y[i] - 1), static_cast<std::size_t>(pred[i] - 1)) += 1.0;
    }
  }
  ProbeReport r{"confusion", {{"architecture", config.architecture()}, {"samples", dataset.size()}},
                {std::move(t)}};
  check_report(r);
  return r;
}

/// A named input vector: a token's embedding, or the BOS embedding when
/// `token` is empty.
struct ProbeToken {
  std::optional<Token> token;

  std::string label() const { return token ? "t" + std::to_string(*token) : "BOS"; }
};

inline ProbeToken parse_probe_token(std::string_view s) {
  if (s == "bos" || s == "BOS") return {std::nullopt};
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InvalidInput("probe token must be an integer or 'bos', got '" + std::string(s) + "'");
  return {v};
}

namespace detail {

inline std::span<const double> probe_vector(const ModelConfig& config, const ModelParams& params,
                                            const ProbeToken& t) {
  if (!t.token) {
    if (!config.bos || !params.bos_embedding) throw InvalidInput("model has no BOS embedding");
    return *params.bos_embedding;
  }
  if (*t.token < 1 || *t.token > config.T)
    throw InvalidInput("probe token " + std::to_string(*t.token) + " outside 1.." + std::to_string(config.T));
  return params.embeddings.row(static_cast<std::size_t>(*t.token - 1));
}

}  // namespace detail

/// Hidden units of the feed-forward block on one mixed-token vector.
inline Vector feed_forward_hidden(const LayerParams& lp, std::span<const double> mixed) {
  Vector h(lp.b1);
  for (std::size_t i = 0; i < mixed.size(); ++i) {
    auto w = lp.w1.row(i);
    for (std::size_t j = 0; j < h.size(); ++j) h[j] += mixed[i] * w[j];
  }
  for (double& v : h) v = v > 0.0 ? v : 0.0;
  return h;
}

/// Logits of the feed-forward block alone on one mixed-token vector.
inline Vector feed_forward(const LayerParams& lp, std::span<const double> mixed) {
  const Vector h = feed_forward_hidden(lp, mixed);
  Vector out(lp.b2);
  for (std::size_t j = 0; j < h.size(); ++j) {
    auto w = lp.w2.row(j);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += h[j] * w[c];
  }
  return out;
}

/// Sweeps alpha over `grid` evenly spaced values on [0, 1] and feeds
/// alpha * first + (1 - alpha) * second + residual to the feed-forward block.
/// Columns: alpha, predicted class, sum of hidden units, then all logits.
inline ProbeReport ff_probe(const ModelConfig& config, const ModelParams& params, const ProbeToken& first,
                            const ProbeToken& second, const ProbeToken& residual, int grid = 201) {
  config.validate();
  check_shapes(config, params);
  if (config.layers != 1) throw ConfigError("ff_probe needs a single-layer model");
  if (grid < 2) throw InvalidInput("ff_probe: grid needs at least 2 points");
  const auto a = detail::probe_vector(config, params, first);
  const auto b = detail::probe_vector(config, params, second);
  const auto res = detail::probe_vector(config, params, residual);
  const LayerParams& lp = params.layers.front();
  ProbeTable t{"sweep", {}, {"alpha", "predicted", "gamma"}, Matrix()};
  for (const auto& c : detail::class_labels(config.C)) t.columns.push_back(c);
  t.cells = Matrix(static_cast<std::size_t>(grid), t.columns.size());
  Vector mixed(static_cast<std::size_t>(config.d));
  for (int g = 0; g < grid; ++g) {
    const double alpha = static_cast<double>(g) / (grid - 1);
    for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] = alpha * a[i] + (1.0 - alpha) * b[i] + res[i];
    const Vector logits = feed_forward(lp, mixed);
    const Vector h = feed_forward_hidden(lp, mixed);
    const double gamma = std::accumulate(h.begin(), h.end(), 0.0);
    auto row = t.cells.row(static_cast<std::size_t>(g));
    row[0] = alpha;
    row[1] = static_cast<double>(argmax_index(logits) + 1);
    row[2] = gamma;
    std::copy(logits.begin(), logits.end(), row.begin() + 3);
    t.row_labels.push_back(std::to_string(g));
  }
  ProbeReport r{"ff_probe",
                {{"first", first.label()}, {"second", second.label()}, {"residual", residual.label()},
                 {"grid", grid}, {"mixture", "alpha*first + (1-alpha)*second + residual"}},
                {std::move(t)}};
  check_report(r);
  return r;
}

/// For k = 1..L-1 the sequence [t]*k + [v]*(L-k); logits at position 0.
inline ProbeReport logit_curves(const ModelConfig& config, const ModelParams& params, Token t, Token v) {
  if (t == v) throw InvalidInput("logit_curves: t and v must differ");
  if (config.L < 2) throw InvalidInput("logit_curves needs L >= 2");
  ProbeTable tab{"logits", {}, {"k", "predicted"}, Matrix()};
  for (const auto& c : detail::class_labels(config.C)) tab.columns.push_back(c);
  tab.cells = Matrix(static_cast<std::size_t>(config.L - 1), tab.columns.size());
  for (int k = 1; k < config.L; ++k) {
    Sequence seq(static_cast<std::size_t>(config.L), v);
    std::fill(seq.begin(), seq.begin() + k, t);
    const ForwardTrace tr = forward(config, params, seq);
    auto z = tr.logits.row(0);
    auto row = tab.cells.row(static_cast<std::size_t>(k - 1));
    row[0] = k;
    row[1] = static_cast<double>(argmax_index(z) + 1);
    std::copy(z.begin(), z.end(), row.begin() + 2);
    tab.row_labels.push_back("k" + std::to_string(k));
  }
  ProbeReport r{"logit_curves", {{"t", t}, {"v", v}, {"architecture", config.architecture()}}, {std::move(tab)}};
  check_report(r);
  return r;
}

/// All min(rows, cols) singular values, descending, from the eigenvalues of
/// the smaller Gram matrix.
inline Vector svd_spectrum(const Matrix& w) {
  if (w.empty()) throw InvalidInput("svd_spectrum: empty matrix");
  const Matrix gram = w.rows() >= w.cols() ? matmul_tn(w, w) : matmul_nt(w, w);
  Vector ev = symmetric_eigenvalues(gram);
  for (double& x : ev) x = std::sqrt(std::max(0.0, x));
  std::sort(ev.begin(), ev.end(), std::greater<>());
  return ev;
}

/// Singular values of every layer's W1.
inline ProbeReport svd_report(const ModelParams& params) {
  ProbeReport r{"svd", {{"layers", params.layers.size()}}, {}};
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Vector s = svd_spectrum(params.layers[l].w1);
    ProbeTable t{"layer" + std::to_string(l) + ".w1", {}, {"sigma"}, Matrix(s.size(), 1)};
    for (std::size_t i = 0; i < s.size(); ++i) {
      t.row_labels.push_back("s" + std::to_string(i + 1));
      t.cells(i, 0) = s[i];
    }
    r.tables.push_back(std::move(t));
  }
  check_report(r);
  return r;
}

}  // namespace tinycount
