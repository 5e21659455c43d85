#pragma once

// Hand-built weights that solve the histogram task exactly. Every builder
// produces a scalar gamma per position (the sum of the ReLU units) whose value
// ranges for different counts are disjoint, followed by a piecewise-linear
// readout that maps gamma to one of L classes.

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tinycount/coherence.hpp"
#include "tinycount/data.hpp"
#include "tinycount/error.hpp"
#include "tinycount/model.hpp"
#include "tinycount/numerics.hpp"
#include "tinycount/params_io.hpp"

namespace tinycount {

// ---------------------------------------------------------------------------
// Scalar-to-class readout

enum class Direction { increasing, decreasing };

inline std::string_view direction_name(Direction d) {
  return d == Direction::increasing ? "increasing" : "decreasing";
}

struct Readout {
  Vector w;           // slope per class (index k-1)
  Vector b;           // intercept per class
  Vector boundaries;  // boundaries[k-1] separates counts k and k+1
  Direction direction = Direction::increasing;

  std::vector<double> logits(double gamma) const {
    std::vector<double> out(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) out[i] = gamma * w[i] + b[i];
    return out;
  }
  int classify(double gamma) const { return static_cast<int>(argmax_index(logits(gamma))) + 1; }
};

/// Lines with slopes -1 + j/(L+1) in order of increasing gamma, each pair of
/// neighbours meeting exactly at the given boundary.
inline Readout build_readout_from_boundaries(std::span<const double> boundaries, Direction dir) {
  const std::size_t L = boundaries.size() + 1;
  if (L < 2) throw InvalidSpec("readout needs at least two classes");
  if (!all_finite(boundaries)) throw InvalidSpec("readout boundaries must be finite");
  // Position j in ascending-gamma order holds class order[j]; asc[j] is the
  // boundary between order[j-1] and order[j].
  std::vector<std::size_t> order(L);
  Vector asc(L, 0.0);
  for (std::size_t j = 0; j < L; ++j) order[j] = dir == Direction::increasing ? j : L - 1 - j;
  for (std::size_t j = 1; j < L; ++j)
    asc[j] = dir == Direction::increasing ? boundaries[j - 1] : boundaries[L - 1 - j];
  for (std::size_t j = 2; j < L; ++j)
    if (!(asc[j] > asc[j - 1]))
      throw InvalidSpec("readout boundaries are not strictly monotone in the " +
                        std::string(direction_name(dir)) + " direction");
  Readout r;
  r.w.assign(L, 0.0);
  r.b.assign(L, 0.0);
  r.boundaries.assign(boundaries.begin(), boundaries.end());
  r.direction = dir;
  double prev_w = 0.0, prev_b = 0.0;
  for (std::size_t j = 0; j < L; ++j) {
    const double w = -1.0 + static_cast<double>(j + 1) / static_cast<double>(L + 1);
    const double b = j == 0 ? 0.0 : prev_b + (prev_w - w) * asc[j];
    r.w[order[j]] = w;
    r.b[order[j]] = b;
    prev_w = w;
    prev_b = b;
  }
  return r;
}

/// gamma_values[k-1] is the value attained at count k; boundaries are midpoints.
inline Readout build_readout(std::span<const double> gamma_values, Direction dir) {
  if (gamma_values.size() < 2) throw InvalidSpec("readout needs at least two gamma values");
  if (!all_finite(gamma_values)) throw InvalidSpec("gamma values must be finite");
  for (std::size_t i = 1; i < gamma_values.size(); ++i) {
    const bool ok = dir == Direction::increasing ? gamma_values[i] > gamma_values[i - 1]
                                                 : gamma_values[i] < gamma_values[i - 1];
    if (!ok)
      throw InvalidSpec("gamma values are not strictly " + std::string(direction_name(dir)));
  }
  Vector mid(gamma_values.size() - 1);
  for (std::size_t i = 0; i + 1 < gamma_values.size(); ++i)
    mid[i] = 0.5 * (gamma_values[i] + gamma_values[i + 1]);
  return build_readout_from_boundaries(mid, dir);
}

/// Midpoint boundaries between guaranteed value intervals per count. Throws if
/// neighbouring intervals touch or overlap.
inline Readout build_readout_from_intervals(std::span<const double> lower,
                                            std::span<const double> upper, Direction dir) {
  const std::size_t L = lower.size();
  if (upper.size() != L || L < 2) throw InvalidSpec("interval readout needs matching bounds");
  Vector mid(L - 1);
  for (std::size_t k = 0; k + 1 < L; ++k) {
    const double gap = dir == Direction::increasing ? lower[k + 1] - upper[k]
                                                    : lower[k] - upper[k + 1];
    if (!(gap > 0.0)) {
      std::ostringstream os;
      os << "value intervals for counts " << k + 1 << " and " << k + 2 << " overlap (gap " << gap
         << ")";
      throw InvalidSpec(os.str());
    }
    mid[k] = dir == Direction::increasing ? 0.5 * (upper[k] + lower[k + 1])
                                          : 0.5 * (upper[k + 1] + lower[k]);
  }
  return build_readout_from_boundaries(mid, dir);
}

// ---------------------------------------------------------------------------
// Softmax temperature

namespace detail {
// Zero-margin condition between count 1 (worst case) and count 2 (best case),
// in the log domain: (L-1) e^{-eps kappa} = 1 + (L-2) e^{-kappa}. Concave in
// kappa, zero at kappa = 0, and the margin is positive exactly where h < 0.
inline double temperature_h(int L, double eps, double kappa) {
  return std::log(L - 1.0) - eps * kappa - std::log1p((L - 2.0) * std::exp(-kappa));
}
}  // namespace detail

/// Smallest positive kappa at which the softmax separates count 1 from count 2.
inline double temperature_root(int L, double epsilon) {
  if (L <= 2) throw InvalidInput("solve_temperature needs L > 2");
  if (!(epsilon > 0.0 && epsilon <= 0.5))
    throw InvalidInput("solve_temperature needs 0 < epsilon <= 0.5 (got " + std::to_string(epsilon) + ")");
  const double peak = std::log((L - 2.0) * (1.0 - epsilon) / epsilon);
  if (!(peak > 0.0))
    throw NumericalFailure("margin function has no interior maximum (L = " + std::to_string(L) +
                           ", epsilon = " + std::to_string(epsilon) + ")");
  double lo = peak, hi = 2.0 * peak;
  int doublings = 0;
  while (detail::temperature_h(L, epsilon, hi) >= 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++doublings > 200 || !std::isfinite(hi))
      throw NumericalFailure("no sign change of the margin function up to kappa = " +
                             std::to_string(hi) + " (L = " + std::to_string(L) +
                             ", epsilon = " + std::to_string(epsilon) + ")");
  }
  while (hi - lo > 1e-12 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (detail::temperature_h(L, epsilon, mid) >= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

inline double solve_temperature(int L, double epsilon, double safety = 1.1) {
  if (!(safety >= 1.0)) throw InvalidInput("kappa safety factor must be >= 1");
  return safety * temperature_root(L, epsilon);
}

/// Worst-case BOS attention weight for count k: every other token at the
/// largest allowed overlap (lower) or at zero overlap (upper).
inline double softmax_gamma_lower(int L, int k, double kappa, double alpha, double epsilon) {
  return 1.0 / (1.0 + k * std::exp(kappa * alpha * alpha) +
                (L - k) * std::exp(kappa * (alpha * alpha - epsilon)));
}
inline double softmax_gamma_upper(int L, int k, double kappa, double alpha) {
  return 1.0 / (1.0 + k * std::exp(kappa * alpha * alpha) +
                (L - k) * std::exp(kappa * (alpha * alpha - 1.0)));
}

/// gamma_lower(1) - gamma_upper(2); positive once kappa exceeds the root.
inline double softmax_margin(int L, double kappa, double alpha, double epsilon) {
  return softmax_gamma_lower(L, 1, kappa, alpha, epsilon) - softmax_gamma_upper(L, 2, kappa, alpha);
}

// ---------------------------------------------------------------------------
// Specs and results

enum class ConstructionKind {
  rc_dot,
  rc_bos,
  rc_bos_sftm,
  ic_lin,
  ic_lin_sftm,
  ic_dot_sftm,
  lowcoh_lin,
  lowcoh_dot_p1,
  lowcoh_dot_pT,
  binary_bos_sftm,
  binary_dot_sftm,
  compact_d4,
};

inline constexpr ConstructionKind kAllConstructionKinds[] = {
    ConstructionKind::rc_dot,          ConstructionKind::rc_bos,
    ConstructionKind::rc_bos_sftm,     ConstructionKind::ic_lin,
    ConstructionKind::ic_lin_sftm,     ConstructionKind::ic_dot_sftm,
    ConstructionKind::lowcoh_lin,      ConstructionKind::lowcoh_dot_p1,
    ConstructionKind::lowcoh_dot_pT,   ConstructionKind::binary_bos_sftm,
    ConstructionKind::binary_dot_sftm, ConstructionKind::compact_d4,
};

inline std::string_view construction_name(ConstructionKind k) {
  switch (k) {
    case ConstructionKind::rc_dot: return "rc_dot";
    case ConstructionKind::rc_bos: return "rc_bos";
    case ConstructionKind::rc_bos_sftm: return "rc_bos_sftm";
    case ConstructionKind::ic_lin: return "ic_lin";
    case ConstructionKind::ic_lin_sftm: return "ic_lin_sftm";
    case ConstructionKind::ic_dot_sftm: return "ic_dot_sftm";
    case ConstructionKind::lowcoh_lin: return "lowcoh_lin";
    case ConstructionKind::lowcoh_dot_p1: return "lowcoh_dot_p1";
    case ConstructionKind::lowcoh_dot_pT: return "lowcoh_dot_pT";
    case ConstructionKind::binary_bos_sftm: return "binary_bos_sftm";
    case ConstructionKind::binary_dot_sftm: return "binary_dot_sftm";
    case ConstructionKind::compact_d4: return "compact_d4";
  }
  return "?";
}

inline ConstructionKind parse_construction_kind(std::string_view s) {
  for (auto k : kAllConstructionKinds)
    if (construction_name(k) == s) return k;
  throw InvalidInput("unknown construction kind '" + std::string(s) + "'");
}

inline bool uses_frame(ConstructionKind k) {
  return k == ConstructionKind::lowcoh_lin || k == ConstructionKind::lowcoh_dot_p1 ||
         k == ConstructionKind::lowcoh_dot_pT;
}

struct ConstructionSpec {
  ConstructionKind kind = ConstructionKind::rc_dot;
  int T = 4;
  int L = 3;
  int d = 0;  // 0 picks the smallest dimension the construction needs
  int p = 0;  // 0 picks the construction's hidden width
  double alpha = 1e-2;
  double kappa_safety = 1.1;
  std::optional<Frame> frame;     // lowcoh kinds
  std::optional<int> code_bits;   // binary kinds: override ceil(log2(T+1))
};

/// What a builder guarantees: per-count value intervals of gamma (the sum of
/// ReLU units) and the readout placed between them.
struct ConstructionInfo {
  ConstructionKind kind = ConstructionKind::rc_dot;
  int T = 0, L = 0;
  Direction direction = Direction::increasing;
  Vector gamma_lower;  // index k-1
  Vector gamma_upper;
  Vector boundaries;
  std::optional<double> kappa;
  std::optional<double> kappa_root;
  std::optional<double> epsilon;
  std::optional<double> alpha;
  std::optional<double> coherence;
  std::optional<double> threshold;
  std::vector<std::string> notes;
};

struct Construction {
  ModelConfig config;
  ModelParams params;
  ConstructionInfo info;
};

inline nlohmann::json info_to_json(const ConstructionInfo& i) {
  nlohmann::json j = {{"kind", construction_name(i.kind)},
                      {"T", i.T},
                      {"L", i.L},
                      {"direction", direction_name(i.direction)},
                      {"gamma_lower", i.gamma_lower},
                      {"gamma_upper", i.gamma_upper},
                      {"boundaries", i.boundaries},
                      {"notes", i.notes}};
  auto opt = [&](const char* key, const std::optional<double>& v) {
    if (v) j[key] = *v;
  };
  opt("kappa", i.kappa);
  opt("kappa_root", i.kappa_root);
  opt("epsilon", i.epsilon);
  opt("alpha", i.alpha);
  opt("coherence", i.coherence);
  opt("threshold", i.threshold);
  return j;
}

inline ConstructionInfo info_from_json(const nlohmann::json& j) {
  ConstructionInfo i;
  i.kind = parse_construction_kind(j.at("kind").get<std::string>());
  i.T = j.at("T").get<int>();
  i.L = j.at("L").get<int>();
  i.direction = j.at("direction").get<std::string>() == "decreasing" ? Direction::decreasing
                                                                      : Direction::increasing;
  i.gamma_lower = j.at("gamma_lower").get<Vector>();
  i.gamma_upper = j.at("gamma_upper").get<Vector>();
  i.boundaries = j.at("boundaries").get<Vector>();
  i.notes = j.value("notes", std::vector<std::string>{});
  auto opt = [&](const char* key, std::optional<double>& v) {
    if (j.contains(key)) v = j.at(key).get<double>();
  };
  opt("kappa", i.kappa);
  opt("kappa_root", i.kappa_root);
  opt("epsilon", i.epsilon);
  opt("alpha", i.alpha);
  opt("coherence", i.coherence);
  opt("threshold", i.threshold);
  return i;
}

// ---------------------------------------------------------------------------
// Builders

namespace detail {

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidSpec(what);
}

inline ModelConfig base_config(std::string_view arch, int T, int L, int d, int p) {
  ModelConfig c;
  c = with_architecture(c, arch);
  c.T = T;
  c.L = L;
  c.d = d;
  c.p = p;
  c.C = L;
  c.layers = 1;
  return c;
}

inline Construction start(ConstructionKind kind, std::string_view arch, int T, int L, int d, int p) {
  Construction c;
  c.config = base_config(arch, T, L, d, p);
  c.config.validate();
  c.params = zero_params(c.config);
  c.info.kind = kind;
  c.info.T = T;
  c.info.L = L;
  return c;
}

/// Dead units keep bias -1 and zero weights so they never fire.
inline void kill_extra_units(LayerParams& lp, std::size_t from) {
  for (std::size_t j = from; j < lp.b1.size(); ++j) lp.b1[j] = -1.0;
}

/// Active units [0, active) all feed the same readout.
inline void set_readout(Construction& c, const Readout& r, std::size_t active) {
  auto& lp = c.params.layers[0];
  for (std::size_t j = 0; j < active; ++j)
    std::copy(r.w.begin(), r.w.end(), lp.w2.row(j).begin());
  lp.b2 = r.b;
  c.info.boundaries = r.boundaries;
  c.info.direction = r.direction;
}

inline void set_qk(LayerParams& lp, int d, double q_scale) {
  const double s = std::pow(static_cast<double>(d), 0.25);
  lp.wq = Matrix::identity(static_cast<std::size_t>(d), q_scale * s);
  lp.wk = Matrix::identity(static_cast<std::size_t>(d), s);
}

inline Vector counts_1_to(int L) {
  Vector v(static_cast<std::size_t>(L));
  for (int k = 1; k <= L; ++k) v[static_cast<std::size_t>(k - 1)] = k;
  return v;
}

inline void exact_gamma(Construction& c, const Vector& g, Direction dir) {
  c.info.gamma_lower = g;
  c.info.gamma_upper = g;
  set_readout(c, build_readout(g, dir), 1);
}

inline int pick(int requested, int minimum, const char* what, std::string_view kind) {
  if (requested == 0) return minimum;
  require(requested >= minimum, std::string(kind) + " needs " + what + " >= " +
                                    std::to_string(minimum) + " (got " + std::to_string(requested) + ")");
  return requested;
}

}  // namespace detail

/// Relation-based counting with tagged embeddings e_t = u_t + sum_s u_s:
/// equal tokens score T + 3, different tokens T + 2, and the single hidden
/// unit reads the count off the shared direction.
inline Construction build_rc_dot(const ConstructionSpec& s) {
  using namespace detail;
  require(s.T > 2 && s.L >= 2, "rc_dot needs T > 2 and L >= 2");
  const int d = pick(s.d, s.T, "d", "rc_dot"), p = pick(s.p, 1, "p", "rc_dot");
  Construction c = start(ConstructionKind::rc_dot, "dot", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  for (int t = 0; t < s.T; ++t)
    for (int i = 0; i < s.T; ++i)
      c.params.embeddings(static_cast<std::size_t>(t), static_cast<std::size_t>(i)) = (i == t ? 2.0 : 1.0);
  set_qk(lp, d, 1.0);
  for (int i = 0; i < s.T; ++i) lp.w1(static_cast<std::size_t>(i), 0) = 1.0 / (s.T + 1);
  lp.b1[0] = -(1.0 + s.L * (s.T + 2.0));
  kill_extra_units(lp, 1);
  exact_gamma(c, counts_1_to(s.L), Direction::increasing);
  return c;
}

/// BOS relation-based counting without softmax. The BOS row projects to
/// T + k + 1 on e_BOS (the residual contributes the 1), hence b1 = -(T + 1).
inline Construction build_rc_bos(const ConstructionSpec& s) {
  using namespace detail;
  require(s.T > 2 && s.L >= 2, "rc_bos needs T > 2 and L >= 2");
  const int d = pick(s.d, s.T, "d", "rc_bos"), p = pick(s.p, 1, "p", "rc_bos");
  Construction c = start(ConstructionKind::rc_bos, "bos", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  for (int t = 0; t < s.T; ++t) {
    c.params.embeddings(static_cast<std::size_t>(t), static_cast<std::size_t>(t)) = 1.0;
    (*c.params.bos_embedding)[static_cast<std::size_t>(t)] = 1.0;
    lp.w1(static_cast<std::size_t>(t), 0) = 1.0;
  }
  set_qk(lp, d, 1.0);
  lp.b1[0] = -(s.T + 1.0);
  kill_extra_units(lp, 1);
  exact_gamma(c, counts_1_to(s.L), Direction::increasing);
  return c;
}

/// gamma for the softmax BOS construction: a (T - 1) + 1 with
/// a = e / ((k + 1) e + L - k), decreasing in k.
inline double rc_bos_sftm_gamma(int T, int L, int k) {
  const double e = std::exp(1.0);
  const double a = e / ((k + 1) * e + (L - k));
  return a * (T - 1) + 1.0;
}

inline Construction build_rc_bos_sftm(const ConstructionSpec& s) {
  using namespace detail;
  require(s.T > 2 && s.L >= 2, "rc_bos_sftm needs T > 2 and L >= 2");
  const int d = pick(s.d, s.T, "d", "rc_bos_sftm"), p = pick(s.p, 1, "p", "rc_bos_sftm");
  Construction c = start(ConstructionKind::rc_bos_sftm, "bos+sftm", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  for (int t = 0; t < s.T; ++t) {
    c.params.embeddings(static_cast<std::size_t>(t), static_cast<std::size_t>(t)) = 1.0;
    (*c.params.bos_embedding)[static_cast<std::size_t>(t)] = 1.0;
    lp.w1(static_cast<std::size_t>(t), 0) = 1.0;
  }
  set_qk(lp, d, 1.0);
  lp.b1[0] = -1.0;
  kill_extra_units(lp, 1);
  Vector g(static_cast<std::size_t>(s.L));
  for (int k = 1; k <= s.L; ++k) g[static_cast<std::size_t>(k - 1)] = rc_bos_sftm_gamma(s.T, s.L, k);
  exact_gamma(c, g, Direction::decreasing);
  return c;
}

namespace detail {
/// Inventory readout: hidden unit t detects token t; with a constant 1/L
/// mixing the active unit holds k / L.
inline Construction build_ic_lin_impl(const ConstructionSpec& s, bool softmax) {
  const auto kind = softmax ? ConstructionKind::ic_lin_sftm : ConstructionKind::ic_lin;
  const auto name = construction_name(kind);
  require(s.T > 2 && s.L > 2, std::string(name) + " needs T > 2 and L > 2");
  const int d = pick(s.d, s.T, "d", name), p = pick(s.p, s.T, "p", name);
  Construction c = start(kind, softmax ? "lin+sftm" : "lin", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  const auto L = static_cast<std::size_t>(s.L);
  // softmax of a constant row is uniform, so a zero pre-softmax matrix
  // realizes a = 1/L exactly.
  *lp.mixing = Matrix(L, L, softmax ? 0.0 : 1.0 / s.L);
  for (int t = 0; t < s.T; ++t) {
    c.params.embeddings(static_cast<std::size_t>(t), static_cast<std::size_t>(t)) = 1.0;
    lp.w1(static_cast<std::size_t>(t), static_cast<std::size_t>(t)) = 1.0;
    lp.b1[static_cast<std::size_t>(t)] = -1.0;
  }
  kill_extra_units(lp, static_cast<std::size_t>(s.T));
  Vector g = counts_1_to(s.L);
  for (double& v : g) v /= s.L;
  c.info.gamma_lower = g;
  c.info.gamma_upper = g;
  set_readout(c, build_readout(g, Direction::increasing), static_cast<std::size_t>(s.T));
  return c;
}
}  // namespace detail

inline Construction build_ic_lin(const ConstructionSpec& s) { return detail::build_ic_lin_impl(s, false); }
inline Construction build_ic_lin_sftm(const ConstructionSpec& s) { return detail::build_ic_lin_impl(s, true); }

/// Surviving hidden value of the dot+sftm inventory construction at count k.
inline double ic_dot_sftm_gamma(int L, int k) {
  const double e = std::exp(1.0);
  return k * e / (k * e + (L - k));
}

/// Inverse of ic_dot_sftm_gamma.
inline double ic_dot_sftm_count(int L, double gamma) {
  const double e = std::exp(1.0);
  return L * gamma / (-e * gamma + gamma + e);
}

inline Construction build_ic_dot_sftm(const ConstructionSpec& s) {
  using namespace detail;
  require(s.T > 2 && s.L > 2, "ic_dot_sftm needs T > 2 and L > 2");
  const int d = pick(s.d, s.T, "d", "ic_dot_sftm"), p = pick(s.p, s.T, "p", "ic_dot_sftm");
  Construction c = start(ConstructionKind::ic_dot_sftm, "dot+sftm", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  set_qk(lp, d, 1.0);
  for (int t = 0; t < s.T; ++t) {
    c.params.embeddings(static_cast<std::size_t>(t), static_cast<std::size_t>(t)) = 1.0;
    lp.w1(static_cast<std::size_t>(t), static_cast<std::size_t>(t)) = 1.0;
    lp.b1[static_cast<std::size_t>(t)] = -1.0;
  }
  kill_extra_units(lp, static_cast<std::size_t>(s.T));
  Vector g(static_cast<std::size_t>(s.L));
  for (int k = 1; k <= s.L; ++k) g[static_cast<std::size_t>(k - 1)] = ic_dot_sftm_gamma(s.L, k);
  c.info.gamma_lower = g;
  c.info.gamma_upper = g;
  set_readout(c, build_readout(g, Direction::increasing), static_cast<std::size_t>(s.T));
  return c;
}

namespace detail {

inline const Frame& require_frame(const ConstructionSpec& s) {
  const auto name = std::string(construction_name(s.kind));
  require(s.frame.has_value(), name + " needs a frame");
  require(s.frame->count() == s.T, name + ": frame has " + std::to_string(s.frame->count()) +
                                       " vectors but T = " + std::to_string(s.T));
  return *s.frame;
}

inline void gate(bool ok, std::string_view kind, double M, const std::string& bound_text, double bound) {
  if (!ok) {
    std::ostringstream os;
    os << kind << ": coherence M = " << M << " violates " << bound_text << " (bound " << bound << ")";
    throw InvalidSpec(os.str());
  }
}

inline void copy_frame(Matrix& emb, const Frame& f, std::size_t col0 = 0) {
  for (int t = 0; t < f.count(); ++t) {
    auto v = f.vector(t);
    for (std::size_t i = 0; i < v.size(); ++i) emb(static_cast<std::size_t>(t), col0 + i) = v[i];
  }
}

}  // namespace detail

/// Inventory construction on a frame with coherence M < 1/(2L - 3).
inline Construction build_lowcoh_lin(const ConstructionSpec& s) {
  using namespace detail;
  require(s.T > 2 && s.L >= 4, "lowcoh_lin needs T > 2 and L >= 4");
  const Frame& f = require_frame(s);
  const double M = f.coherence();
  const double b1 = 1.0 / (2 * s.L - 3), b2 = 1.0 / (s.L + 1);
  gate(M < b1, "lowcoh_lin", M, "M < 1/(2L-3)", b1);
  gate(M < b2, "lowcoh_lin", M, "M < 1/(L+1)", b2);
  const int d = pick(s.d, f.dim(), "d", "lowcoh_lin"), p = pick(s.p, s.T, "p", "lowcoh_lin");
  Construction c = start(ConstructionKind::lowcoh_lin, "lin", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  const auto L = static_cast<std::size_t>(s.L);
  *lp.mixing = Matrix(L, L, 1.0 / s.L);
  copy_frame(c.params.embeddings, f);
  for (int t = 0; t < s.T; ++t) {
    auto v = f.vector(t);
    for (std::size_t i = 0; i < v.size(); ++i) lp.w1(i, static_cast<std::size_t>(t)) = v[i];
    lp.b1[static_cast<std::size_t>(t)] = -1.0;
  }
  kill_extra_units(lp, static_cast<std::size_t>(s.T));
  Vector lo(L), hi(L);
  for (int k = 1; k <= s.L; ++k) {
    const double spread = M * (s.L - k);
    lo[static_cast<std::size_t>(k - 1)] = std::max(0.0, (k - spread) / s.L);
    hi[static_cast<std::size_t>(k - 1)] = (k + spread) / s.L;
  }
  c.info.gamma_lower = lo;
  c.info.gamma_upper = hi;
  c.info.coherence = M;
  set_readout(c, build_readout_from_intervals(lo, hi, Direction::increasing), static_cast<std::size_t>(s.T));
  return c;
}

/// Relation-based construction on a frame with an extra tag coordinate alpha
/// shared by all tokens; the hidden unit reads that coordinate scaled by 1/alpha.
inline Construction build_lowcoh_dot_p1(const ConstructionSpec& s) {
  using namespace detail;
  require(s.T > 2 && s.L > 2, "lowcoh_dot_p1 needs T > 2 and L > 2");
  const Frame& f = require_frame(s);
  const double M = f.coherence(), a = s.alpha, a2 = a * a;
  const double alpha_max = std::sqrt(1.0 / (2 * s.L - 2));
  require(a > 0.0 && a < alpha_max, "lowcoh_dot_p1: alpha must lie in (0, sqrt(1/(2L-2))) = (0, " +
                                        std::to_string(alpha_max) + ")");
  const double bound = (1.0 - a2 * (2 * s.L - 4)) / (2 * s.L - 3);
  gate(M < bound, "lowcoh_dot_p1", M, "M < 1/(2L-3) - alpha^2 (2L-4)/(2L-3)", bound);
  const int d = pick(s.d, f.dim() + 1, "d", "lowcoh_dot_p1"), p = pick(s.p, 1, "p", "lowcoh_dot_p1");
  Construction c = start(ConstructionKind::lowcoh_dot_p1, "dot", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  copy_frame(c.params.embeddings, f);
  const auto tag = static_cast<std::size_t>(d - 1);
  for (int t = 0; t < s.T; ++t) c.params.embeddings(static_cast<std::size_t>(t), tag) = a;
  set_qk(lp, d, 1.0);
  lp.w1(tag, 0) = 1.0 / a;
  lp.b1[0] = 0.0;
  kill_extra_units(lp, 1);
  const auto L = static_cast<std::size_t>(s.L);
  Vector lo(L), hi(L);
  for (int k = 1; k <= s.L; ++k) {
    const double base = k * (1.0 + a2) + 1.0, spread = (s.L - k) * (M + a2);
    lo[static_cast<std::size_t>(k - 1)] = std::max(0.0, base - spread);
    hi[static_cast<std::size_t>(k - 1)] = base + spread;
  }
  c.info.gamma_lower = lo;
  c.info.gamma_upper = hi;
  c.info.coherence = M;
  c.info.alpha = a;
  set_readout(c, build_readout_from_intervals(lo, hi, Direction::increasing), 1);
  return c;
}

/// Inventory construction with dot mixing; Q carries an extra 1/L so the
/// cross-token error enters squared.
inline Construction build_lowcoh_dot_pT(const ConstructionSpec& s) {
  using namespace detail;
  require(s.T > 2 && s.L > 2, "lowcoh_dot_pT needs T > 2 and L > 2");
  const Frame& f = require_frame(s);
  const double M = f.coherence();
  const double bound = std::sqrt(1.0 / (s.L - 1));
  gate(M < bound, "lowcoh_dot_pT", M, "M < sqrt(1/(L-1))", bound);
  gate(M < 0.5, "lowcoh_dot_pT", M, "M < 1/2", 0.5);
  const int d = pick(s.d, f.dim(), "d", "lowcoh_dot_pT"), p = pick(s.p, s.T, "p", "lowcoh_dot_pT");
  Construction c = start(ConstructionKind::lowcoh_dot_pT, "dot", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  copy_frame(c.params.embeddings, f);
  set_qk(lp, d, 1.0 / s.L);
  for (int t = 0; t < s.T; ++t) {
    auto v = f.vector(t);
    for (std::size_t i = 0; i < v.size(); ++i) lp.w1(i, static_cast<std::size_t>(t)) = v[i];
    lp.b1[static_cast<std::size_t>(t)] = -1.0;
  }
  kill_extra_units(lp, static_cast<std::size_t>(s.T));
  const auto L = static_cast<std::size_t>(s.L);
  Vector lo(L), hi(L);
  for (int k = 1; k <= s.L; ++k) {
    lo[static_cast<std::size_t>(k - 1)] = static_cast<double>(k) / s.L;
    hi[static_cast<std::size_t>(k - 1)] = (k + M * M * (s.L - k)) / s.L;
  }
  c.info.gamma_lower = lo;
  c.info.gamma_upper = hi;
  c.info.coherence = M;
  set_readout(c, build_readout_from_intervals(lo, hi, Direction::increasing), static_cast<std::size_t>(s.T));
  return c;
}

// ---------------------------------------------------------------------------
// Softmax constructions with few dimensions

/// Unit-norm binary codes of 1..T, least significant bit first.
inline Matrix binary_codes(int T, int bits) {
  if (bits < 1 || bits > 30 || (1LL << bits) - 1 < T)
    throw InvalidSpec(std::to_string(bits) + " bits cannot give " + std::to_string(T) +
                      " distinct nonzero codes (at most 2^bits - 1 = " +
                      std::to_string(bits < 1 || bits > 30 ? 0 : (1LL << bits) - 1) + ")");
  Matrix m(static_cast<std::size_t>(T), static_cast<std::size_t>(bits));
  for (int t = 1; t <= T; ++t) {
    const double n = std::sqrt(static_cast<double>(std::popcount(static_cast<unsigned>(t))));
    for (int i = 0; i < bits; ++i)
      if ((t >> i) & 1) m(static_cast<std::size_t>(t - 1), static_cast<std::size_t>(i)) = 1.0 / n;
  }
  return m;
}

/// v_t = [sqrt(t/T), sqrt((T-t)/T)] for t = 1..T.
inline Matrix compact_codes(int T) {
  Matrix m(static_cast<std::size_t>(T), 2);
  for (int t = 1; t <= T; ++t) {
    m(static_cast<std::size_t>(t - 1), 0) = std::sqrt(static_cast<double>(t) / T);
    m(static_cast<std::size_t>(t - 1), 1) = std::sqrt(static_cast<double>(T - t) / T);
  }
  return m;
}

inline double max_offdiagonal_overlap(const Matrix& codes) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < codes.rows(); ++i)
    for (std::size_t j = 0; j < codes.rows(); ++j)
      if (i != j) m = std::max(m, dot(codes.row(i), codes.row(j)));
  return m;
}

namespace detail {

/// Shared body of the BOS softmax constructions: e_t = [v_t, alpha, 0],
/// e_BOS = [0, 1/alpha, 1], Q = kappa K, and the hidden unit reads the last
/// coordinate, i.e. the attention weight on BOS.
inline Construction build_bos_softmax(const ConstructionSpec& s, ConstructionKind kind,
                                      const Matrix& codes, double epsilon) {
  const auto name = construction_name(kind);
  require(s.T > 2 && s.L > 2, std::string(name) + " needs T > 2 and L > 2");
  const double a = s.alpha;
  require(a > 0.0 && std::isfinite(a), std::string(name) + ": alpha must be positive");
  const double measured = max_offdiagonal_overlap(codes);
  if (!(measured <= 1.0 - epsilon + 1e-12)) {
    std::ostringstream os;
    os << name << ": measured max overlap " << measured << " exceeds 1 - epsilon = " << 1.0 - epsilon;
    throw InvalidSpec(os.str());
  }
  const double root = temperature_root(s.L, epsilon);
  const double kappa = s.kappa_safety * root;
  if (!(s.kappa_safety >= 1.0)) throw InvalidInput("kappa safety factor must be >= 1");

  const auto L = static_cast<std::size_t>(s.L);
  Vector lo(L), hi(L);
  for (int k = 1; k <= s.L; ++k) {
    lo[static_cast<std::size_t>(k - 1)] = softmax_gamma_lower(s.L, k, kappa, a, epsilon);
    hi[static_cast<std::size_t>(k - 1)] = softmax_gamma_upper(s.L, k, kappa, a);
  }
  // 64-bit safety: the scores themselves never overflow because the softmax
  // subtracts the row maximum, so what can fail is resolution. Require every
  // gamma to be a normal double and every gap between neighbouring counts to
  // be far above rounding of the attention weights.
  for (int k = 1; k < s.L; ++k) {
    const double g = lo[static_cast<std::size_t>(k - 1)] - hi[static_cast<std::size_t>(k)];
    const double scale = lo[static_cast<std::size_t>(k - 1)];
    if (!(hi[L - 1] > 1e3 * std::numeric_limits<double>::min()) || !(g > 1e-10 * scale)) {
      std::ostringstream os;
      os << name << ": kappa = " << kappa << " (L = " << s.L << ", epsilon = " << epsilon
         << ", alpha = " << a << ") leaves a count gap of " << g
         << " that 64-bit arithmetic cannot resolve reliably";
      throw NumericalFailure(os.str());
    }
  }

  const int dp = static_cast<int>(codes.cols());
  const int d = pick(s.d, dp + 2, "d", name), p = pick(s.p, 1, "p", name);
  Construction c = start(kind, "bos+sftm", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  const auto tag = static_cast<std::size_t>(dp), cnt = static_cast<std::size_t>(dp + 1);
  for (int t = 0; t < s.T; ++t) {
    for (int i = 0; i < dp; ++i)
      c.params.embeddings(static_cast<std::size_t>(t), static_cast<std::size_t>(i)) =
          codes(static_cast<std::size_t>(t), static_cast<std::size_t>(i));
    c.params.embeddings(static_cast<std::size_t>(t), tag) = a;
  }
  (*c.params.bos_embedding)[tag] = 1.0 / a;
  (*c.params.bos_embedding)[cnt] = 1.0;
  set_qk(lp, d, kappa);
  lp.w1(cnt, 0) = 1.0;
  lp.b1[0] = 0.0;
  kill_extra_units(lp, 1);
  c.info.gamma_lower = lo;
  c.info.gamma_upper = hi;
  c.info.kappa = kappa;
  c.info.kappa_root = root;
  c.info.epsilon = epsilon;
  c.info.alpha = a;
  c.info.coherence = measured;
  set_readout(c, build_readout_from_intervals(lo, hi, Direction::decreasing), 1);
  return c;
}

}  // namespace detail

inline int binary_code_bits(int T) { return static_cast<int>(std::bit_width(static_cast<unsigned>(T))); }

inline Construction build_binary_bos_sftm(const ConstructionSpec& s) {
  const int bits = s.code_bits.value_or(binary_code_bits(s.T));
  const Matrix codes = binary_codes(s.T, bits);
  const double eps = 1.0 - std::sqrt(1.0 - 1.0 / bits);
  detail::require(bits >= 2, "binary_bos_sftm needs at least 2 code bits");
  auto c = detail::build_bos_softmax(s, ConstructionKind::binary_bos_sftm, codes, eps);
  c.info.notes.push_back("code bits " + std::to_string(bits));
  return c;
}

inline Construction build_compact_d4(const ConstructionSpec& s) {
  detail::require(s.T >= 3 && s.T % 2 == 1, "compact_d4 needs an odd T >= 3");
  const Matrix codes = compact_codes(s.T);
  const double eps = 1.0 - max_offdiagonal_overlap(codes);
  return detail::build_bos_softmax(s, ConstructionKind::compact_d4, codes, eps);
}

// Inventory counting with binary codes and dot+sftm mixing. With unit codes
// v_t, queries scaled by kappa and W1 = [v_1 .. v_T], the resident unit of a
// token with count k sees 1 + z, where z is the attention-weighted mean of the
// overlaps with the resident token; a threshold c between the largest
// non-resident and the smallest resident pre-activation silences all other
// units. kappa is chosen to maximise the exact worst-case margin.

struct BinaryDotAnalysis {
  Vector z_min, z_max;          // per count k (index k-1)
  double resident_min = 0.0;    // smallest resident pre-activation
  double nonresident_max = 0.0; // largest pre-activation of any other unit
  double separation = 0.0;      // min_k z_min(k+1) - z_max(k)
  double gate = 0.0;            // resident_min - nonresident_max
  double margin() const { return std::min(separation, gate); }
};

/// Exact worst cases over all sequences. For fixed k the resident value is a
/// weighted mean of 1 (weight k e^kappa) and the distractor overlaps (weights
/// e^{kappa o}); a weighted mean is extremal when every distractor is the
/// same token, so a scan over single distractor tokens suffices. The same
/// argument bounds the non-resident units.
inline BinaryDotAnalysis analyze_binary_dot(const Matrix& codes, int L, double kappa) {
  const std::size_t T = codes.rows();
  const Matrix G = matmul_nt(codes, codes);
  BinaryDotAnalysis r;
  r.z_min.assign(static_cast<std::size_t>(L), std::numeric_limits<double>::infinity());
  r.z_max.assign(static_cast<std::size_t>(L), -std::numeric_limits<double>::infinity());
  r.nonresident_max = -std::numeric_limits<double>::infinity();
  for (int k = 1; k <= L; ++k) {
    const double n = L - k;
    auto& lo = r.z_min[static_cast<std::size_t>(k - 1)];
    auto& hi = r.z_max[static_cast<std::size_t>(k - 1)];
    for (std::size_t t = 0; t < T; ++t) {
      if (k == L) {
        lo = std::min(lo, 1.0);
        hi = std::max(hi, 1.0);
      }
      for (std::size_t s = 0; s < T && k < L; ++s) {
        if (s == t) continue;
        const double o = G(t, s), w = std::exp(kappa * (o - 1.0));
        const double z = (k + n * o * w) / (k + n * w);
        lo = std::min(lo, z);
        hi = std::max(hi, z);
      }
      for (std::size_t tp = 0; tp < T; ++tp) {
        if (tp == t) continue;
        if (k == L) {
          r.nonresident_max = std::max(r.nonresident_max, 2.0 * G(t, tp));
          continue;
        }
        for (std::size_t s = 0; s < T; ++s) {
          if (s == t) continue;
          const double w = std::exp(kappa * (G(t, s) - 1.0));
          const double v = G(t, tp) + (k * G(t, tp) + n * w * G(s, tp)) / (k + n * w);
          r.nonresident_max = std::max(r.nonresident_max, v);
        }
      }
    }
  }
  r.resident_min = 1.0 + *std::min_element(r.z_min.begin(), r.z_min.end());
  r.separation = std::numeric_limits<double>::infinity();
  for (int k = 1; k < L; ++k)
    r.separation = std::min(r.separation, r.z_min[static_cast<std::size_t>(k)] - r.z_max[static_cast<std::size_t>(k - 1)]);
  r.gate = r.resident_min - r.nonresident_max;
  return r;
}

/// kappa maximising the worst-case margin: log grid on [0.01, 100] followed
/// by golden-section refinement around the best grid point.
inline double best_binary_dot_kappa(const Matrix& codes, int L) {
  auto f = [&](double lk) { return analyze_binary_dot(codes, L, std::exp(lk)).margin(); };
  const double a = std::log(0.01), b = std::log(100.0);
  const int n = 120;
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= n; ++i) {
    const double v = f(a + (b - a) * i / n);
    if (v > best_v) {
      best_v = v;
      best = i;
    }
  }
  double lo = a + (b - a) * std::max(0, best - 1) / n, hi = a + (b - a) * std::min(n, best + 1) / n;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo), f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    }
  }
  const double grid_k = a + (b - a) * best / n;
  return std::exp(std::max(f1, f2) >= best_v ? (f1 >= f2 ? x1 : x2) : grid_k);
}

inline Construction build_binary_dot_sftm(const ConstructionSpec& s) {
  using namespace detail;
  require(s.T > 2 && s.L > 2, "binary_dot_sftm needs T > 2 and L > 2");
  const int bits = s.code_bits.value_or(binary_code_bits(s.T));
  const Matrix codes = binary_codes(s.T, bits);
  const double kappa = best_binary_dot_kappa(codes, s.L);
  const auto an = analyze_binary_dot(codes, s.L, kappa);
  if (!(an.margin() > 0.0)) {
    std::ostringstream os;
    os << "binary_dot_sftm: no inverse temperature separates all counts at T = " << s.T
       << ", L = " << s.L << " with " << bits << " code bits (best kappa " << kappa
       << ": count separation " << an.separation << ", resident/non-resident gap " << an.gate << ")";
    throw InvalidSpec(os.str());
  }
  const double threshold = 0.5 * (an.resident_min + an.nonresident_max);
  const int d = pick(s.d, bits, "d", "binary_dot_sftm"), p = pick(s.p, s.T, "p", "binary_dot_sftm");
  Construction c = start(ConstructionKind::binary_dot_sftm, "dot+sftm", s.T, s.L, d, p);
  auto& lp = c.params.layers[0];
  for (int t = 0; t < s.T; ++t)
    for (int i = 0; i < bits; ++i) {
      const double v = codes(static_cast<std::size_t>(t), static_cast<std::size_t>(i));
      c.params.embeddings(static_cast<std::size_t>(t), static_cast<std::size_t>(i)) = v;
      lp.w1(static_cast<std::size_t>(i), static_cast<std::size_t>(t)) = v;
    }
  for (int t = 0; t < s.T; ++t) lp.b1[static_cast<std::size_t>(t)] = -threshold;
  kill_extra_units(lp, static_cast<std::size_t>(s.T));
  set_qk(lp, d, kappa);
  const auto L = static_cast<std::size_t>(s.L);
  Vector lo(L), hi(L);
  for (std::size_t k = 0; k < L; ++k) {
    lo[k] = 1.0 + an.z_min[k] - threshold;
    hi[k] = 1.0 + an.z_max[k] - threshold;
  }
  c.info.gamma_lower = lo;
  c.info.gamma_upper = hi;
  c.info.kappa = kappa;
  c.info.threshold = threshold;
  c.info.coherence = max_offdiagonal_overlap(codes);
  c.info.epsilon = 1.0 - *c.info.coherence;
  c.info.notes.push_back("code bits " + std::to_string(bits));
  set_readout(c, build_readout_from_intervals(lo, hi, Direction::increasing), static_cast<std::size_t>(s.T));
  return c;
}

inline Construction build(const ConstructionSpec& s) {
  switch (s.kind) {
    case ConstructionKind::rc_dot: return build_rc_dot(s);
    case ConstructionKind::rc_bos: return build_rc_bos(s);
    case ConstructionKind::rc_bos_sftm: return build_rc_bos_sftm(s);
    case ConstructionKind::ic_lin: return build_ic_lin(s);
    case ConstructionKind::ic_lin_sftm: return build_ic_lin_sftm(s);
    case ConstructionKind::ic_dot_sftm: return build_ic_dot_sftm(s);
    case ConstructionKind::lowcoh_lin: return build_lowcoh_lin(s);
    case ConstructionKind::lowcoh_dot_p1: return build_lowcoh_dot_p1(s);
    case ConstructionKind::lowcoh_dot_pT: return build_lowcoh_dot_pT(s);
    case ConstructionKind::binary_bos_sftm: return build_binary_bos_sftm(s);
    case ConstructionKind::binary_dot_sftm: return build_binary_dot_sftm(s);
    case ConstructionKind::compact_d4: return build_compact_d4(s);
  }
  throw InvalidSpec("unknown construction kind");
}

// ---------------------------------------------------------------------------
// Verification

struct VerifyReport {
  double accuracy = 0.0;
  double sequence_accuracy = 0.0;
  std::size_t sequences = 0;
  bool exhaustive = false;
  Vector measured_lower;  // per count; NaN where the count never occurred
  Vector measured_upper;
  double measured_margin = std::numeric_limits<double>::quiet_NaN();
  bool within_predicted = true;
  std::vector<std::string> problems;

  bool perfect() const { return accuracy == 1.0; }
};

/// Sum of the ReLU units of the last layer per position (BOS row excluded).
inline Vector gamma_values(const ModelConfig& config, const ForwardTrace& trace) {
  const Matrix& h = trace.hidden();
  const std::size_t skip = config.bos ? 1 : 0;
  Vector g(static_cast<std::size_t>(config.L), 0.0);
  for (std::size_t r = 0; r < g.size(); ++r)
    for (double v : h.row(r + skip)) g[r] += v;
  return g;
}

inline VerifyReport verify(const ModelConfig& config, const ModelParams& params,
                           std::span<const Sample> dataset, const ConstructionInfo* info = nullptr,
                           bool exhaustive = false) {
  if (dataset.empty()) throw InvalidInput("verify: empty dataset");
  const auto L = static_cast<std::size_t>(config.L);
  VerifyReport r;
  r.exhaustive = exhaustive;
  r.sequences = dataset.size();
  r.measured_lower.assign(L, std::numeric_limits<double>::infinity());
  r.measured_upper.assign(L, -std::numeric_limits<double>::infinity());
  std::size_t correct = 0, seq_correct = 0;
  for (const Sample& s : dataset) {
    const ForwardTrace tr = forward(config, params, s.x);
    const auto pred = predictions(tr);
    const auto g = gamma_values(config, tr);
    bool all = true;
    for (std::size_t i = 0; i < L; ++i) {
      const bool ok = pred[i] == s.y[i];
      correct += ok;
      all = all && ok;
      const auto k = static_cast<std::size_t>(s.y[i] - 1);
      r.measured_lower[k] = std::min(r.measured_lower[k], g[i]);
      r.measured_upper[k] = std::max(r.measured_upper[k], g[i]);
    }
    seq_correct += all;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(L * dataset.size());
  r.sequence_accuracy = static_cast<double>(seq_correct) / static_cast<double>(dataset.size());
  for (std::size_t k = 0; k < L; ++k)
    if (!std::isfinite(r.measured_lower[k])) {
      r.measured_lower[k] = std::numeric_limits<double>::quiet_NaN();
      r.measured_upper[k] = std::numeric_limits<double>::quiet_NaN();
    }
  if (info) {
    const bool inc = info->direction == Direction::increasing;
    double margin = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> prev;
    for (std::size_t k = 0; k < L; ++k) {
      if (std::isnan(r.measured_lower[k])) continue;
      if (prev) {
        const double gap = inc ? r.measured_lower[k] - r.measured_upper[*prev]
                               : r.measured_lower[*prev] - r.measured_upper[k];
        margin = std::min(margin, gap);
      }
      prev = k;
      if (k < info->gamma_lower.size()) {
        const double tol = 1e-9 * (1.0 + std::abs(info->gamma_upper[k]));
        if (r.measured_lower[k] < info->gamma_lower[k] - tol ||
            r.measured_upper[k] > info->gamma_upper[k] + tol) {
          r.within_predicted = false;
          std::ostringstream os;
          os << "count " << k + 1 << ": measured gamma [" << r.measured_lower[k] << ", "
             << r.measured_upper[k] << "] outside predicted [" << info->gamma_lower[k] << ", "
             << info->gamma_upper[k] << "]";
          r.problems.push_back(os.str());
        }
      }
    }
    if (std::isfinite(margin)) r.measured_margin = margin;
  }
  if (r.accuracy < 1.0) {
    std::ostringstream os;
    os << "accuracy " << r.accuracy << " < 1";
    r.problems.push_back(os.str());
  }
  return r;
}

inline VerifyReport verify(const Construction& c, std::span<const Sample> dataset, bool exhaustive = false) {
  return verify(c.config, c.params, dataset, &c.info, exhaustive);
}

/// Exhaustive when T^L <= limit, otherwise `samples` partition-sampled sequences.
inline VerifyReport verify_auto(const ModelConfig& config, const ModelParams& params,
                                const ConstructionInfo* info, std::uint64_t seed,
                                std::size_t samples = 3000, double limit = 1e6) {
  const double total = std::pow(static_cast<double>(config.T), config.L);
  if (total <= limit) return verify(config, params, exhaustive_dataset(config.T, config.L), info, true);
  SamplerSpec spec{config.T, config.L, Scheme::partition, seed};
  return verify(config, params, make_dataset(spec, samples), info, false);
}

inline ModelFile to_model_file(const Construction& c) {
  return {c.config, c.params, {{"construction", info_to_json(c.info)}}};
}

}  // namespace tinycount
