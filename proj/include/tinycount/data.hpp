#pragma once

// Histogram-task samples: label computation, the partition sampler that keeps
// the count distribution close to uniform, an i.i.d. sampler for ablations,
// exhaustive enumeration and JSON-lines export.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tinycount/error.hpp"
#include "tinycount/rng.hpp"

namespace tinycount {

using Token = int;  // 1..T
using Sequence = std::vector<Token>;

struct Sample {
  Sequence x;
  std::vector<int> y;  // y[l] = multiplicity of x[l] in x

  friend bool operator==(const Sample&, const Sample&) = default;
};

inline std::vector<int> histogram_labels(std::span<const Token> x) {
  if (x.empty()) throw InvalidInput("histogram_labels: empty sequence");
  std::vector<int> y(x.size(), 0);
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] = static_cast<int>(std::count(x.begin(), x.end(), x[i]));
  return y;
}

enum class Scheme { partition, uniform };

inline std::string_view scheme_name(Scheme s) {
  return s == Scheme::partition ? "partition" : "uniform";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "partition") return Scheme::partition;
  if (s == "uniform") return Scheme::uniform;
  throw InvalidInput("unknown sampling scheme '" + std::string(s) + "'");
}

struct SamplerSpec {
  int T = 32;
  int L = 10;
  Scheme scheme = Scheme::partition;
  std::uint64_t seed = 0;

  void validate() const {
    if (T < 1 || L < 1) throw InvalidSpec("sampler needs T >= 1 and L >= 1");
    if (scheme == Scheme::partition && L > T)
      throw InvalidSpec("partition sampler needs L <= T (got T = " + std::to_string(T) +
                        ", L = " + std::to_string(L) + ")");
  }
};

template <typename Rng>
int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// One draw. Partition scheme: positions K..k get a fresh token with k uniform
/// on 1..K, then the prefix 1..k-1 is filled the same way with that token
/// removed; the sequence is shuffled at the end.
template <typename Rng>
Sample sample_sequence(const SamplerSpec& spec, Rng& rng) {
  spec.validate();
  Sample s;
  s.x.assign(static_cast<std::size_t>(spec.L), 0);
  if (spec.scheme == Scheme::uniform) {
    for (Token& t : s.x) t = uniform_int(rng, 1, spec.T);
  } else {
    std::vector<Token> pool(static_cast<std::size_t>(spec.T));
    std::iota(pool.begin(), pool.end(), 1);
    int K = spec.L;
    while (K > 0) {
      const int k = uniform_int(rng, 1, K);
      const int idx = uniform_int(rng, 0, static_cast<int>(pool.size()) - 1);
      const Token t = pool[static_cast<std::size_t>(idx)];
      pool.erase(pool.begin() + idx);
      for (int i = k; i <= K; ++i) s.x[static_cast<std::size_t>(i - 1)] = t;
      K = k - 1;
    }
    for (std::size_t i = s.x.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(i)));
      std::swap(s.x[i], s.x[j]);
    }
  }
  s.y = histogram_labels(s.x);
  return s;
}

/// Sample `index` of the stream addressed by spec.seed; independent of how many
/// other samples are drawn or in which order.
inline Sample sample_at(const SamplerSpec& spec, std::uint64_t index) {
  SplitMix64 rng(derive_seed(spec.seed, {index}));
  return sample_sequence(spec, rng);
}

inline std::vector<Sample> make_dataset(const SamplerSpec& spec, std::size_t n) {
  if (n == 0) throw InvalidInput("make_dataset: n must be >= 1");
  spec.validate();
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_at(spec, i));
  return out;
}

/// Calls fn(sequence) for all T^L sequences in lexicographic order.
inline void for_each_sequence(int T, int L, const std::function<void(const Sequence&)>& fn) {
  if (T < 1 || L < 1) throw InvalidInput("for_each_sequence: T and L must be >= 1");
  Sequence x(static_cast<std::size_t>(L), 1);
  while (true) {
    fn(x);
    int i = L - 1;
    while (i >= 0 && x[static_cast<std::size_t>(i)] == T) x[static_cast<std::size_t>(i--)] = 1;
    if (i < 0) return;
    ++x[static_cast<std::size_t>(i)];
  }
}

inline std::vector<Sample> exhaustive_dataset(int T, int L) {
  double total = 1.0;
  for (int i = 0; i < L; ++i) total *= T;
  if (total > 5e6) throw InvalidInput("exhaustive_dataset: T^L too large");
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(total));
  for_each_sequence(T, L, [&](const Sequence& x) { out.push_back({x, histogram_labels(x)}); });
  return out;
}

inline nlohmann::json sample_to_json(const Sample& s) { return {{"x", s.x}, {"y", s.y}}; }

inline Sample sample_from_json(const nlohmann::json& j) {
  Sample s{j.at("x").get<Sequence>(), j.at("y").get<std::vector<int>>()};
  if (s.x.size() != s.y.size() || histogram_labels(s.x) != s.y)
    throw InvalidInput("sample labels do not match its tokens");
  return s;
}

inline void write_jsonl(std::ostream& os, std::span<const Sample> samples) {
  for (const Sample& s : samples) os << sample_to_json(s).dump() << '\n';
}

}  // namespace tinycount
