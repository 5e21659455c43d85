#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "tinycount/coherence.hpp"
#include "tinycount/constructions.hpp"

using namespace tinycount;

TEST(Coherence, OrthonormalIsZero) {
  EXPECT_EQ(Frame::canonical(5, 8).coherence(), 0.0);
}

TEST(Coherence, IdenticalVectorsGiveOne) {
  Matrix m(3, 2);
  for (std::size_t i = 0; i < 3; ++i) m(i, 0) = 1.0;
  EXPECT_DOUBLE_EQ(mutual_coherence(m), 1.0);
}

TEST(Coherence, BinaryCodesAtThreeBits) {
  EXPECT_NEAR(mutual_coherence(binary_codes(7, 3)), std::sqrt(2.0 / 3.0), 1e-15);
}

TEST(Coherence, RejectsNonUnitRows) {
  EXPECT_THROW(mutual_coherence(Matrix(2, 2, std::vector<double>{1, 0, 0, 2})), InvalidFrame);
  EXPECT_THROW(Frame(Matrix(2, 2)), InvalidFrame);
}

TEST(Coherence, SimplexFrameMeetsWelchBound) {
  for (int T : {3, 5, 8, 16}) {
    const Frame f = simplex_frame(T);
    EXPECT_EQ(f.dim(), T - 1);
    EXPECT_NEAR(f.coherence(), 1.0 / (T - 1), 1e-14);
    EXPECT_NEAR(f.coherence(), welch_bound(T, T - 1), 1e-14);
  }
}

TEST(Welch, KnownValues) {
  EXPECT_EQ(welch_bound(32, 32), 0.0);
  EXPECT_NEAR(welch_bound(32, 12), 0.23186944788008415, 1e-15);
  EXPECT_TRUE(welch_attainable(32, 12));
  EXPECT_FALSE(welch_attainable(32, 5));
  EXPECT_THROW(welch_bound(4, 5), InvalidInput);
}

TEST(MinDimension, FullScaleValues) {
  EXPECT_EQ(min_dimension(DimensionKind::lin_pT, 32, 10), 29);
  EXPECT_EQ(min_dimension(DimensionKind::dot_p1, 32, 10), 30);
  EXPECT_EQ(min_dimension(DimensionKind::dot_pT, 32, 10), 8);
  EXPECT_EQ(min_dimension(DimensionKind::sftm_binary, 32, 10), 8);
  EXPECT_EQ(min_dimension(DimensionKind::sftm_binary, 31, 10), 7);
}

TEST(MinDimension, StatedValuesThatDiffer) {
  EXPECT_EQ(stated_min_dimension(DimensionKind::dot_pT, 32, 10), 7);
  EXPECT_EQ(stated_min_dimension(DimensionKind::sftm_binary, 32, 10), 7);
  EXPECT_EQ(stated_min_dimension(DimensionKind::sftm_binary, 31, 10), 6);
  EXPECT_FALSE(stated_min_dimension(DimensionKind::lin_pT, 32, 10).has_value());
}

TEST(MinDimension, WelchBoundAtMinimumSatisfiesGate) {
  // At the minimum d the Welch bound lies below the construction's gate and
  // one dimension less it does not.
  for (int T : {16, 32, 64})
    for (int L : {5, 10}) {
      const int d = min_dimension(DimensionKind::dot_pT, T, L);
      const double gate = std::sqrt(1.0 / (L - 1));
      EXPECT_LE(welch_bound(T, d), gate + 1e-12);
      EXPECT_GT(welch_bound(T, d - 1), gate);
      const int dl = min_dimension(DimensionKind::lin_pT, T, L);
      EXPECT_LE(welch_bound(T, dl), 1.0 / (2 * L - 3) + 1e-12);
      EXPECT_GT(welch_bound(T, dl - 1), 1.0 / (2 * L - 3));
    }
  EXPECT_THROW(min_dimension(DimensionKind::lin_pT, 32, 4), InvalidInput);
  EXPECT_THROW(parse_dimension_kind("x"), InvalidInput);
}

TEST(FrameSearch, FullDimensionIsCanonical) {
  const auto r = search_low_coherence_frame({.T = 6, .d = 6, .target = 0.0});
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.frame.coherence(), 0.0);
}

TEST(FrameSearch, NeverBeatsWelchAndIsDeterministic) {
  FrameSearchOptions o{.T = 12, .d = 5, .target = 0.45, .budget = 1500, .restarts = 2};
  const auto a = search_low_coherence_frame(o);
  EXPECT_GE(a.frame.coherence(), welch_bound(12, 5) - 1e-12);
  EXPECT_LE(a.frame.coherence(), 0.45 + 1e-12);
  EXPECT_TRUE(a.converged);
  o.threads = 2;
  const auto b = search_low_coherence_frame(o);
  EXPECT_EQ(a.frame.vectors(), b.frame.vectors());
}

TEST(FrameSearch, RejectsTargetBelowWelch) {
  EXPECT_THROW(search_low_coherence_frame({.T = 32, .d = 12, .target = 0.2}), InvalidInput);
  EXPECT_THROW(search_low_coherence_frame({.T = 4, .d = 5, .target = 0.5}), InvalidInput);
}

TEST(FrameIo, RoundTripRecomputesCoherence) {
  const Frame f = simplex_frame(7);
  const Frame g = frame_from_json(frame_to_json(f));
  EXPECT_EQ(g.vectors(), f.vectors());
  EXPECT_EQ(g.coherence(), f.coherence());
  auto j = frame_to_json(f);
  j["coherence"] = 0.0;
  EXPECT_EQ(frame_from_json(j).coherence(), f.coherence());
  j["count"] = 8;
  EXPECT_THROW(frame_from_json(j), InvalidFrame);

  const auto path = (std::filesystem::temp_directory_path() / "tinycount_frame_test.json").string();
  save_frame(path, f);
  EXPECT_EQ(load_frame(path).vectors(), f.vectors());
  std::filesystem::remove(path);
}
