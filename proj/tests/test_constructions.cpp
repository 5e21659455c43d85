#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "tinycount/constructions.hpp"
#include "tinycount/rng.hpp"

using namespace tinycount;

namespace {

ConstructionSpec small_spec(ConstructionKind k) {
  ConstructionSpec s{k, 7, 4};
  if (uses_frame(k)) {
    s.T = 8;
    s.frame = simplex_frame(8);
  }
  return s;
}

}  // namespace

TEST(Constructions, AllKindsExhaustivelyCorrectAtSmallScale) {
  for (auto k : kAllConstructionKinds) {
    const ConstructionSpec s = small_spec(k);
    const Construction c = build(s);
    const auto all = exhaustive_dataset(s.T, s.L);
    const VerifyReport r = verify(c, all, true);
    EXPECT_EQ(r.accuracy, 1.0) << construction_name(k);
    EXPECT_EQ(r.sequence_accuracy, 1.0) << construction_name(k);
    EXPECT_TRUE(r.within_predicted) << construction_name(k) << ": "
                                    << (r.problems.empty() ? "" : r.problems.front());
    EXPECT_GT(r.measured_margin, 0.0) << construction_name(k);
  }
}

TEST(Constructions, FullScaleKindsOnSampledSequences) {
  const auto data = make_dataset({32, 10, Scheme::partition, 42}, 3000);
  for (auto k : kAllConstructionKinds) {
    ConstructionSpec s{k, 32, 10};
    if (uses_frame(k)) s.frame = Frame::canonical(32, 32);
    if (k == ConstructionKind::binary_dot_sftm) continue;  // infeasible here, see below
    if (k == ConstructionKind::compact_d4) s.T = 31;
    const Construction c = build(s);
    const auto& d = k == ConstructionKind::compact_d4 ? make_dataset({31, 10, Scheme::partition, 42}, 3000) : data;
    const VerifyReport r = verify(c, d);
    EXPECT_EQ(r.accuracy, 1.0) << construction_name(k);
    EXPECT_TRUE(r.within_predicted) << construction_name(k);
  }
}

TEST(BinaryDot, RefusesWhenNoTemperatureSeparates) {
  EXPECT_THROW(build({ConstructionKind::binary_dot_sftm, 32, 10}), InvalidSpec);
  EXPECT_THROW(build({ConstructionKind::binary_dot_sftm, 7, 5}), InvalidSpec);
}

TEST(BinaryDot, OnlyResidentUnitFires) {
  const Construction c = build({ConstructionKind::binary_dot_sftm, 7, 4});
  const Sequence x{3, 6, 6, 1};
  const ForwardTrace tr = forward(c.config, c.params, x);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t u = 0; u < 7; ++u)
      EXPECT_EQ(tr.hidden()(i, u) > 0.0, u + 1 == static_cast<std::size_t>(x[i])) << i << " " << u;
}

TEST(Constructions, WorkedExampleSequence) {
  // A B D D B B
  const Sequence x{1, 2, 4, 4, 2, 2};
  const std::vector<int> want{1, 3, 2, 2, 3, 3};
  for (auto k : {ConstructionKind::rc_dot, ConstructionKind::rc_bos, ConstructionKind::rc_bos_sftm,
                 ConstructionKind::ic_lin, ConstructionKind::ic_lin_sftm, ConstructionKind::ic_dot_sftm}) {
    const Construction c = build({k, 4, 6});
    EXPECT_EQ(predict(c.config, c.params, x), want) << construction_name(k);
  }
}

TEST(RcDot, HiddenValueEqualsCount) {
  // pre-activation (2 (T+3) + (T+2)) ... summed over T coordinates / (T+1) = 21
  const Construction c = build({ConstructionKind::rc_dot, 4, 3});
  EXPECT_DOUBLE_EQ(c.params.layers[0].b1[0], -19.0);
  const ForwardTrace tr = forward(c.config, c.params, Sequence{1, 1, 2});
  const Vector g = gamma_values(c.config, tr);
  EXPECT_NEAR(g[0], 2.0, 1e-12);
  EXPECT_NEAR(g[1], 2.0, 1e-12);
  EXPECT_NEAR(g[2], 1.0, 1e-12);
}

TEST(RcDot, ExhaustiveAtT5L3) {
  const Construction c = build({ConstructionKind::rc_dot, 5, 3});
  const auto all = exhaustive_dataset(5, 3);
  ASSERT_EQ(all.size(), 125u);
  EXPECT_EQ(verify(c, all, true).accuracy, 1.0);
}

TEST(RcBosSoftmax, GammaAtFullScale) {
  EXPECT_NEAR(rc_bos_sftm_gamma(32, 10, 1), 6.837035646765515, 1e-12);
  EXPECT_NEAR(rc_bos_sftm_gamma(4, 3, 2), 1.8907682274269642, 1e-12);
  for (int k = 1; k < 10; ++k) EXPECT_GT(rc_bos_sftm_gamma(32, 10, k), rc_bos_sftm_gamma(32, 10, k + 1));
}

TEST(Readout, MidpointBoundaries) {
  const Vector g{1, 2, 3};
  const Readout r = build_readout(g, Direction::increasing);
  EXPECT_EQ(r.boundaries, (Vector{1.5, 2.5}));
  EXPECT_EQ(r.classify(1.49), 1);
  EXPECT_EQ(r.classify(1.51), 2);
  EXPECT_EQ(r.classify(2.49), 2);
  EXPECT_EQ(r.classify(2.51), 3);
  EXPECT_EQ(r.classify(-50), 1);
  EXPECT_EQ(r.classify(50), 3);
}

TEST(Readout, SlopesInterceptsAndBoundaryIdentity) {
  const int L = 6;
  const Vector bounds{0.3, 1.0, 1.2, 4.0, 4.5};
  const Readout r = build_readout_from_boundaries(bounds, Direction::increasing);
  EXPECT_DOUBLE_EQ(r.w[0], -1.0 + 1.0 / (L + 1));
  EXPECT_DOUBLE_EQ(r.b[0], 0.0);
  for (int k = 1; k < L; ++k) {
    const auto i = static_cast<std::size_t>(k);
    EXPECT_NEAR(r.w[i] - r.w[i - 1], 1.0 / (L + 1), 1e-15);
    // neighbouring lines meet exactly at the boundary
    EXPECT_NEAR(r.w[i - 1] * bounds[i - 1] + r.b[i - 1], r.w[i] * bounds[i - 1] + r.b[i], 1e-12);
  }
}

TEST(Readout, DecreasingDirection) {
  const Vector g{5.0, 3.0, 2.5, 0.1};
  const Readout r = build_readout(g, Direction::decreasing);
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(r.classify(g[k]), static_cast<int>(k) + 1);
  EXPECT_THROW(build_readout(g, Direction::increasing), InvalidSpec);
}

TEST(Readout, NonlinearGammaSequence) {
  Vector g;
  for (int k = 1; k <= 3; ++k) g.push_back(1.0 + ic_dot_sftm_gamma(3, k));
  EXPECT_NEAR(g[1], 1.8446375965030364, 1e-12);
  const Readout r = build_readout(g, Direction::increasing);
  EXPECT_EQ(r.classify(1.8446375965030364), 2);
}

TEST(Readout, RandomMonotoneSequencesClassifyExactly) {
  SplitMix64 rng(12);
  std::uniform_real_distribution<double> step(0.01, 3.0), start(-5.0, 5.0);
  std::uniform_int_distribution<int> len(2, 12);
  for (int trial = 0; trial < 100; ++trial) {
    const int L = len(rng);
    Vector g{start(rng)};
    for (int k = 1; k < L; ++k) g.push_back(g.back() + step(rng));
    const Direction dir = trial % 2 ? Direction::decreasing : Direction::increasing;
    if (dir == Direction::decreasing) std::reverse(g.begin(), g.end());
    const Readout r = build_readout(g, dir);
    for (int k = 0; k < L; ++k) ASSERT_EQ(r.classify(g[static_cast<std::size_t>(k)]), k + 1);
  }
}

TEST(Readout, OverlappingIntervalsRejected) {
  EXPECT_THROW(build_readout_from_intervals(Vector{0, 1}, Vector{1.2, 2}, Direction::increasing), InvalidSpec);
  EXPECT_NO_THROW(build_readout_from_intervals(Vector{0, 1}, Vector{0.9, 2}, Direction::increasing));
}

TEST(Inventory, LinearHiddenValueIsCountOverL) {
  const Construction c = build({ConstructionKind::ic_lin, 3, 3});
  const Vector g = gamma_values(c.config, forward(c.config, c.params, Sequence{1, 1, 2}));
  EXPECT_NEAR(g[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(g[2], 1.0 / 3.0, 1e-15);
}

TEST(Inventory, AllSameTokenGivesL) {
  for (auto k : {ConstructionKind::ic_lin, ConstructionKind::ic_lin_sftm, ConstructionKind::ic_dot_sftm}) {
    const Construction c = build({k, 5, 7});
    EXPECT_EQ(predict(c.config, c.params, Sequence(7, 4)), std::vector<int>(7, 7)) << construction_name(k);
  }
}

TEST(Inventory, DotSoftmaxGammaAndInverse) {
  EXPECT_NEAR(ic_dot_sftm_gamma(3, 2), 0.8446375965030364, 1e-15);
  for (int L : {3, 10, 40})
    for (int k = 1; k <= L; ++k) EXPECT_NEAR(ic_dot_sftm_count(L, ic_dot_sftm_gamma(L, k)), k, 1e-9);
  const Construction c = build({ConstructionKind::ic_dot_sftm, 3, 3});
  const Vector g = gamma_values(c.config, forward(c.config, c.params, Sequence{1, 1, 2}));
  EXPECT_NEAR(g[0], 0.8446375965030364, 1e-12);
}

TEST(Temperature, ClosedFormRootIsLn64) {
  // L = 10, epsilon = 1/2: 9 s - s^2 - 8 = 0 with s = e^(kappa/2), so s = 8
  EXPECT_NEAR(temperature_root(10, 0.5), 4.1588830833596715, 1e-9);
}

TEST(Temperature, BinaryCodesUseMeasuredGap) {
  const Construction c = build({ConstructionKind::binary_bos_sftm, 32, 10});
  ASSERT_TRUE(c.info.epsilon && c.info.kappa_root);
  EXPECT_NEAR(*c.info.epsilon, 1.0 - std::sqrt(5.0 / 6.0), 1e-15);
  EXPECT_NEAR(*c.info.kappa_root, temperature_root(10, *c.info.epsilon), 1e-12);
  EXPECT_EQ(c.config.d, 8);
}

TEST(Temperature, RootGrowsAsEpsilonShrinks) {
  double prev = 0.0;
  for (double eps : {0.3, 0.2, 0.1, 0.05, 0.02, 0.01, 0.001}) {
    const double k = temperature_root(10, eps);
    EXPECT_GT(k, prev);
    EXPECT_NEAR(detail::temperature_h(10, eps, k), 0.0, 1e-9);
    prev = k;
  }
}

TEST(Temperature, SafetyFactorGivesPositiveMargin) {
  for (int L : {3, 5, 10, 20})
    for (double eps : {0.4, 0.087, 0.01}) {
      const double root = temperature_root(L, eps);
      EXPECT_NEAR(softmax_margin(L, root, 0.01, eps), 0.0, 1e-9);
      EXPECT_GT(softmax_margin(L, solve_temperature(L, eps), 0.01, eps), 0.0);
    }
  EXPECT_THROW(temperature_root(2, 0.1), InvalidInput);
  EXPECT_THROW(temperature_root(10, 0.7), InvalidInput);
  EXPECT_THROW(solve_temperature(10, 0.1, 0.5), InvalidInput);
}

TEST(Codes, BinaryOverlap) {
  EXPECT_NEAR(max_offdiagonal_overlap(binary_codes(7, 3)), 0.8164965809277261, 1e-15);
  EXPECT_EQ(binary_code_bits(32), 6);
  EXPECT_EQ(binary_code_bits(31), 5);
  EXPECT_THROW(binary_codes(8, 3), InvalidSpec);
}

TEST(Codes, CompactOverlap) {
  EXPECT_NEAR(max_offdiagonal_overlap(compact_codes(3)), 0.9428090415820635, 1e-15);
  const Construction c = build({ConstructionKind::compact_d4, 3, 3});
  EXPECT_NEAR(*c.info.epsilon, 0.05719095841793653, 1e-15);
  EXPECT_EQ(c.config.d, 4);
}

TEST(Codes, EqualTokenOverlapIsOnePlusAlphaSquared) {
  const Construction c = build({ConstructionKind::binary_bos_sftm, 7, 4});
  const double a = *c.info.alpha;
  for (std::size_t t = 0; t < 7; ++t)
    EXPECT_NEAR(dot(c.params.embeddings.row(t), c.params.embeddings.row(t)), 1.0 + a * a, 1e-14);
}

TEST(Gates, RejectInvalidSpecs) {
  ConstructionSpec s{ConstructionKind::lowcoh_lin, 4, 4};
  EXPECT_THROW(build(s), InvalidSpec);  // no frame
  s.frame = simplex_frame(4);           // coherence 1/3 > 1/5
  EXPECT_THROW(build(s), InvalidSpec);
  s.frame = simplex_frame(5);
  EXPECT_THROW(build(s), InvalidSpec);  // frame size differs from T
  EXPECT_THROW(build({ConstructionKind::compact_d4, 8, 4}), InvalidSpec);
  EXPECT_THROW(build({ConstructionKind::rc_dot, 8, 4, 5}), InvalidSpec);
  ConstructionSpec pt{ConstructionKind::lowcoh_dot_p1, 8, 4};
  pt.frame = simplex_frame(8);
  pt.alpha = 1.0;
  EXPECT_THROW(build(pt), InvalidSpec);
  ConstructionSpec bits{ConstructionKind::binary_bos_sftm, 8, 4};
  bits.code_bits = 3;
  EXPECT_THROW(build(bits), InvalidSpec);
  EXPECT_THROW(parse_construction_kind("nope"), InvalidInput);
}

TEST(Constructions, LargerDimensionsStillExact) {
  const Construction c = build({ConstructionKind::rc_bos, 5, 3, 9, 4});
  EXPECT_EQ(c.config.d, 9);
  EXPECT_EQ(c.config.p, 4);
  EXPECT_EQ(verify(c, exhaustive_dataset(5, 3), true).accuracy, 1.0);
}

TEST(Constructions, InfoJsonRoundTripAndModelFile) {
  const Construction c = build({ConstructionKind::binary_bos_sftm, 7, 4});
  const ConstructionInfo i = info_from_json(info_to_json(c.info));
  EXPECT_EQ(info_to_json(i), info_to_json(c.info));
  const ModelFile f = to_model_file(c);
  EXPECT_EQ(f.params, c.params);
  EXPECT_EQ(f.meta.at("construction").at("kind"), "binary_bos_sftm");
}
