#pragma once

// Frames of T unit vectors in R^d: mutual coherence, the Welch lower bound,
// closed-form minimum embedding dimensions for the low-coherence and binary
// constructions, and a gradient search for low-coherence frames.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tinycount/error.hpp"
#include "tinycount/numerics.hpp"
#include "tinycount/rng.hpp"

namespace tinycount {

inline constexpr double kUnitNormTolerance = 1e-10;

/// Largest |<v_i, v_j>| over distinct rows. Rows must be unit norm.
inline double mutual_coherence(const Matrix& vectors) {
  for (std::size_t i = 0; i < vectors.rows(); ++i) {
    const double n = norm(vectors.row(i));
    if (!(std::abs(n - 1.0) <= kUnitNormTolerance))
      throw InvalidFrame("frame vector " + std::to_string(i) + " has norm " + std::to_string(n));
  }
  double m = 0.0;
  for (std::size_t i = 0; i < vectors.rows(); ++i)
    for (std::size_t j = i + 1; j < vectors.rows(); ++j)
      m = std::max(m, std::abs(dot(vectors.row(i), vectors.row(j))));
  return m;
}

/// T unit vectors in R^d, stored one per row of a T x d matrix.
class Frame {
 public:
  Frame() = default;
  explicit Frame(Matrix vectors) : vectors_(std::move(vectors)) {
    if (vectors_.rows() < 1 || vectors_.cols() < 1) throw InvalidFrame("empty frame");
    coherence_ = mutual_coherence(vectors_);
  }

  int dim() const { return static_cast<int>(vectors_.cols()); }
  int count() const { return static_cast<int>(vectors_.rows()); }
  const Matrix& vectors() const { return vectors_; }
  std::span<const double> vector(int t) const { return vectors_.row(static_cast<std::size_t>(t)); }
  double coherence() const { return coherence_; }

  /// First `count` canonical basis vectors of R^dim.
  static Frame canonical(int count, int dim) {
    if (count < 1 || dim < count) throw InvalidInput("canonical frame needs 1 <= count <= dim");
    Matrix m(static_cast<std::size_t>(count), static_cast<std::size_t>(dim));
    for (int t = 0; t < count; ++t) m(static_cast<std::size_t>(t), static_cast<std::size_t>(t)) = 1.0;
    return Frame(std::move(m));
  }

 private:
  Matrix vectors_;
  double coherence_ = 0.0;
};

inline double mutual_coherence(const Frame& frame) { return mutual_coherence(frame.vectors()); }

/// sqrt((T - d) / (d (T - 1))); no set of T unit vectors in R^d does better.
inline double welch_bound(int T, int d) {
  if (d < 1 || T < 1) throw InvalidInput("welch_bound: T and d must be >= 1");
  if (d > T) throw InvalidInput("welch_bound: d > T");
  if (T == 1) return 0.0;
  return std::sqrt(static_cast<double>(T - d) / (static_cast<double>(d) * (T - 1)));
}

/// The Welch bound can only be met with equality when T <= d^2.
inline bool welch_attainable(int T, int d) { return T <= d * d; }

/// T unit vectors in R^(T-1) with pairwise overlap exactly -1/(T-1): the
/// centred canonical basis expressed in Helmert coordinates.
inline Frame simplex_frame(int T) {
  if (T < 2) throw InvalidInput("simplex_frame: T must be >= 2");
  const std::size_t n = static_cast<std::size_t>(T);
  Matrix m(n, n - 1);
  for (std::size_t k = 1; k < n; ++k) {
    const double s = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
    for (std::size_t i = 0; i < k; ++i) m(i, k - 1) = s;
    m(k, k - 1) = -static_cast<double>(k) * s;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double r = norm(m.row(i));
    for (double& v : m.row(i)) v /= r;
  }
  return Frame(std::move(m));
}

enum class DimensionKind { lin_pT, dot_p1, dot_pT, sftm_binary };

inline std::string_view dimension_kind_name(DimensionKind k) {
  switch (k) {
    case DimensionKind::lin_pT: return "lin_pT";
    case DimensionKind::dot_p1: return "dot_p1";
    case DimensionKind::dot_pT: return "dot_pT";
    case DimensionKind::sftm_binary: return "sftm_binary";
  }
  return "?";
}

inline DimensionKind parse_dimension_kind(std::string_view s) {
  for (auto k : {DimensionKind::lin_pT, DimensionKind::dot_p1, DimensionKind::dot_pT,
                 DimensionKind::sftm_binary})
    if (dimension_kind_name(k) == s) return k;
  throw InvalidInput("unknown min-dimension kind '" + std::string(s) + "'");
}

namespace detail {
inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }
}  // namespace detail

/// Smallest embedding dimension for which the corresponding construction is
/// guaranteed to exist, assuming a frame that meets the Welch bound.
inline int min_dimension(DimensionKind kind, int T, int L) {
  using detail::ceil_div;
  if (kind == DimensionKind::sftm_binary) {
    if (T <= 2 || L <= 2) throw InvalidInput("sftm_binary needs T > 2 and L > 2");
    return static_cast<int>(std::bit_width(static_cast<unsigned>(T))) + 2;
  }
  if (L < 5 || T < 2) throw InvalidInput("min_dimension needs L >= 5 and T >= 2");
  const std::int64_t t = T;
  if (kind == DimensionKind::dot_pT) return static_cast<int>(ceil_div(t * (L - 1), t - 1 + L - 1));
  const std::int64_t a = static_cast<std::int64_t>(2 * L - 3) * (2 * L - 3);
  const int lin = static_cast<int>(ceil_div(t * a, t - 1 + a));
  return kind == DimensionKind::lin_pT ? lin : lin + 1;
}

/// Values printed in the source text where they differ from the formula.
inline std::optional<int> stated_min_dimension(DimensionKind kind, int T, int L) {
  if (kind == DimensionKind::dot_pT && T == 32 && L == 10) return 7;
  if (kind == DimensionKind::sftm_binary && T == 32) return 7;
  if (kind == DimensionKind::sftm_binary && T == 31) return 6;
  return std::nullopt;
}

struct FrameSearchOptions {
  int T = 32;
  int d = 12;
  double target = 0.31;
  int budget = 4000;   // gradient steps per restart
  int restarts = 8;
  int threads = 1;
  std::uint64_t seed = 0;
  double step = 0.02;
  double beta0 = 20.0;
  int patience = 100;  // steps without improvement before sharpening
};

struct FrameSearchResult {
  Frame frame;
  bool converged = false;
  int restart = -1;     // restart that produced `frame`
  int iterations = 0;   // steps taken by that restart
};

namespace detail {

inline FrameSearchResult frame_search_restart(const FrameSearchOptions& o, int restart) {
  const std::size_t T = static_cast<std::size_t>(o.T), d = static_cast<std::size_t>(o.d);
  SplitMix64 rng(derive_seed(o.seed, {hash_string("frame-search"), static_cast<std::uint64_t>(restart)}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix v(T, d);
  for (double& x : v.values()) x = normal(rng);
  auto normalize = [&](Matrix& m) {
    for (std::size_t i = 0; i < T; ++i) {
      const double r = norm(m.row(i));
      for (double& x : m.row(i)) x /= r;
    }
  };
  normalize(v);

  auto max_overlap = [&](const Matrix& m) {
    double c = 0.0;
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = i + 1; j < T; ++j) c = std::max(c, std::abs(dot(m.row(i), m.row(j))));
    return c;
  };

  Matrix best = v;
  double best_c = max_overlap(v);
  double beta = o.beta0;
  int since_improve = 0, it = 0;
  Matrix gram(T, T), grad(T, d);
  for (; it < o.budget && best_c > o.target; ++it) {
    gram = matmul_nt(v, v);
    double mx = 0.0;
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = i + 1; j < T; ++j) mx = std::max(mx, gram(i, j) * gram(i, j));
    // Softmax weights of beta * g_ij^2 over pairs; gradient of the
    // log-sum-exp surrogate is sum_j w_ij * 2 g_ij v_j for vector i.
    double z = 0.0;
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = i + 1; j < T; ++j) {
        const double w = std::exp(beta * (gram(i, j) * gram(i, j) - mx));
        gram(j, i) = w;
        z += w;
      }
    grad.fill(0.0);
    for (std::size_t i = 0; i < T; ++i)
      for (std::size_t j = i + 1; j < T; ++j) {
        const double c = 2.0 * gram(j, i) / z * gram(i, j);
        auto gi = grad.row(i), gj = grad.row(j);
        auto vi = v.row(i), vj = v.row(j);
        for (std::size_t k = 0; k < d; ++k) {
          gi[k] += c * vj[k];
          gj[k] += c * vi[k];
        }
      }
    double gmax = 0.0;
    for (double g : grad.values()) gmax = std::max(gmax, std::abs(g));
    if (gmax == 0.0) break;
    const double scale = o.step / gmax;
    for (std::size_t i = 0; i < v.size(); ++i) v.values()[i] -= scale * grad.values()[i];
    normalize(v);
    const double c = max_overlap(v);
    if (c < best_c - 1e-12) {
      best_c = c;
      best = v;
      since_improve = 0;
    } else if (++since_improve >= o.patience) {
      beta *= 2.0;
      since_improve = 0;
    }
  }
  FrameSearchResult r{Frame(std::move(best)), best_c <= o.target, restart, it};
  return r;
}

}  // namespace detail

/// Restarts run in batches of `threads`; the answer is the lowest-numbered
/// restart that meets the target, else the best frame overall, so it does not
/// depend on the thread count.
inline FrameSearchResult search_low_coherence_frame(const FrameSearchOptions& o) {
  if (o.d < 1 || o.T < 1 || o.d > o.T) throw InvalidInput("frame search needs 1 <= d <= T");
  const double wb = welch_bound(o.T, o.d);
  if (o.target < wb)
    throw InvalidInput("target coherence " + std::to_string(o.target) + " is below the Welch bound " +
                       std::to_string(wb));
  if (o.budget < 0 || o.restarts < 1) throw InvalidInput("frame search needs budget >= 0 and restarts >= 1");
  if (o.d == o.T) return {Frame::canonical(o.T, o.d), true, 0, 0};

  const int threads = std::max(1, o.threads);
  std::optional<FrameSearchResult> best;
  for (int start = 0; start < o.restarts; start += threads) {
    const int n = std::min(threads, o.restarts - start);
    std::vector<FrameSearchResult> batch(static_cast<std::size_t>(n));
    if (n == 1) {
      batch[0] = detail::frame_search_restart(o, start);
    } else {
      std::vector<std::thread> pool;
      for (int i = 0; i < n; ++i)
        pool.emplace_back([&, i] { batch[static_cast<std::size_t>(i)] = detail::frame_search_restart(o, start + i); });
      for (auto& t : pool) t.join();
    }
    for (auto& r : batch) {
      if (r.converged) return r;
      if (!best || r.frame.coherence() < best->frame.coherence()) best = std::move(r);
    }
  }
  return *best;
}

inline nlohmann::json frame_to_json(const Frame& f) {
  return {{"dim", f.dim()},
          {"count", f.count()},
          {"values", std::vector<double>(f.vectors().values().begin(), f.vectors().values().end())},
          {"coherence", f.coherence()}};
}

/// Rebuilds a frame and recomputes its coherence; the stored value is ignored.
inline Frame frame_from_json(const nlohmann::json& j) {
  try {
    const auto dim = j.at("dim").get<std::size_t>();
    const auto count = j.at("count").get<std::size_t>();
    return Frame(Matrix(count, dim, j.at("values").get<std::vector<double>>()));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidFrame(std::string("malformed frame file: ") + e.what());
  } catch (const InvalidInput& e) {
    throw InvalidFrame(e.what());
  }
}

inline void save_frame(const std::string& path, const Frame& f) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open '" + path + "' for writing");
  os << frame_to_json(f).dump() << '\n';
}

inline Frame load_frame(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open '" + path + "'");
  try {
    return frame_from_json(nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidFrame("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace tinycount
