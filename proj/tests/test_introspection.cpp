#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "tinycount/constructions.hpp"
#include "tinycount/introspection.hpp"
#include "tinycount/training.hpp"

using namespace tinycount;

TEST(AttentionProbe, RelationConstructionScores) {
  const Construction c = build({ConstructionKind::rc_dot, 5, 3});
  const ProbeReport r = attention_trace(c.config, c.params, Sequence{1, 1, 2});
  const ProbeTable& t = r.table("layer0");
  EXPECT_EQ(t.row_labels, (std::vector<std::string>{"0:t1", "1:t1", "2:t2"}));
  EXPECT_TRUE(r.inputs.at("bos_column").is_null());
  EXPECT_NEAR(t.cells(0, 1), 8.0, 1e-12);  // T + 3
  EXPECT_NEAR(t.cells(0, 2), 7.0, 1e-12);  // T + 2
}

TEST(AttentionProbe, ConstantLinearMixing) {
  const Construction c = build({ConstructionKind::ic_lin, 5, 4});
  const ProbeReport r = attention_trace(c.config, c.params, Sequence{1, 2, 2, 5});
  for (double v : r.table("layer0").cells.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(AttentionProbe, SoftmaxRowsSumToOneWithBosColumn) {
  const Construction c = build({ConstructionKind::rc_bos_sftm, 6, 4});
  const ProbeReport r = attention_trace(c.config, c.params, Sequence{3, 3, 1, 6});
  EXPECT_EQ(r.inputs.at("bos_column"), 0);
  const ProbeTable& t = r.table("layer0");
  ASSERT_EQ(t.cells.rows(), 5u);
  EXPECT_EQ(t.row_labels.front(), "0:BOS");
  for (std::size_t i = 0; i < 5; ++i) {
    double s = 0;
    for (double v : t.cells.row(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  const ModelConfig two = [] {
    ModelConfig m = with_architecture(ModelConfig{}, "dot");
    m.T = 4, m.L = 3, m.C = 3, m.d = 2, m.p = 2, m.layers = 2;
    return m;
  }();
  EXPECT_EQ(attention_trace(two, init_params(two, 0), Sequence{1, 2, 3}).tables.size(), 2u);
}

TEST(OverlapProbe, RelationConstructionValues) {
  const Construction c = build({ConstructionKind::rc_dot, 5, 3});
  const ProbeReport r = overlap_distribution(c.params);
  const ProbeTable& s = r.table("summary");
  ASSERT_EQ(s.row_labels, (std::vector<std::string>{"same", "different"}));
  // columns: count, cos_count, cos_min, cos_max, cos_mean, dot_min, dot_max, dot_mean
  EXPECT_EQ(s.cells(0, 0), 5.0);
  EXPECT_EQ(s.cells(1, 0), 10.0);
  EXPECT_NEAR(s.cells(0, 7), 8.0, 1e-12);
  EXPECT_NEAR(s.cells(1, 5), 7.0, 1e-12);
  EXPECT_NEAR(s.cells(1, 6), 7.0, 1e-12);
  EXPECT_NEAR(s.cells(1, 4), 0.875, 1e-12);
  double in_hist = 0;
  const ProbeTable& h = r.table("histogram");
  for (std::size_t b = 0; b < h.cells.rows(); ++b) in_hist += h.cells(b, 3);
  EXPECT_EQ(in_hist, 10.0);
}

TEST(OverlapProbe, BosGroupAndZeroNormTokens) {
  Construction c = build({ConstructionKind::rc_bos, 4, 3});
  c.params.embeddings.row(2)[2] = 0.0;
  const ProbeReport r = overlap_distribution(c.params, 4);
  EXPECT_EQ(r.inputs.at("zero_norm"), std::vector<int>{3});
  const ProbeTable& s = r.table("summary");
  EXPECT_EQ(s.row_labels.back(), "bos");
  EXPECT_EQ(s.cells(2, 0), 4.0);
  EXPECT_EQ(s.cells(2, 1), 3.0);
  EXPECT_NEAR(s.cells(2, 4), 0.5, 1e-12);  // cos(e_t, all-ones) in R^4
}

TEST(ConfusionProbe, ExactModelIsDiagonal) {
  const Construction c = build({ConstructionKind::rc_dot, 8, 5});
  const auto data = make_dataset({8, 5, Scheme::partition, 3}, 400);
  const ProbeReport r = confusion_matrix(c.config, c.params, data);
  const ProbeTable& t = r.table("confusion");
  std::vector<double> label_counts(5, 0.0);
  for (const auto& s : data)
    for (int y : s.y) label_counts[static_cast<std::size_t>(y - 1)] += 1;
  double total = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    double row = 0;
    for (std::size_t j = 0; j < 5; ++j) {
      row += t.cells(i, j);
      if (i != j) {
        EXPECT_EQ(t.cells(i, j), 0.0);
      }
    }
    EXPECT_EQ(row, label_counts[i]);
    total += row;
  }
  EXPECT_EQ(total, 2000.0);
  EXPECT_EQ(t.row_labels[0], "true1");
  EXPECT_EQ(t.columns[4], "pred5");
}

TEST(FfProbe, SoftmaxBosSweepStepsAtBoundaries) {
  // mixed = alpha e_BOS + (1 - alpha) e_t + e_t, so gamma = 1 + alpha (T - 1)
  const int T = 12, L = 6, grid = 401;
  const Construction c = build({ConstructionKind::rc_bos_sftm, T, L});
  const ProbeReport r = ff_probe(c.config, c.params, parse_probe_token("bos"), parse_probe_token("3"),
                                 parse_probe_token("3"), grid);
  const ProbeTable& t = r.table("sweep");
  ASSERT_EQ(t.cells.rows(), static_cast<std::size_t>(grid));
  int changes = 0;
  for (std::size_t g = 0; g < t.cells.rows(); ++g) {
    const double alpha = t.cells(g, 0), gamma = t.cells(g, 2);
    EXPECT_NEAR(gamma, 1.0 + alpha * (T - 1), 1e-12);
    // decreasing readout: count = 1 + number of boundaries above gamma
    int want = 1;
    for (double b : c.info.boundaries) want += gamma < b;
    EXPECT_EQ(static_cast<int>(t.cells(g, 1)), want) << "alpha " << alpha;
    if (g > 0 && t.cells(g, 1) != t.cells(g - 1, 1)) ++changes;
  }
  int reachable = 0;
  for (double b : c.info.boundaries) reachable += b > 1.0 && b < static_cast<double>(T);
  EXPECT_EQ(changes, reachable);
}

TEST(FfProbe, Errors) {
  const Construction c = build({ConstructionKind::rc_dot, 5, 3});
  EXPECT_THROW(ff_probe(c.config, c.params, parse_probe_token("bos"), {1}, {1}), InvalidInput);
  EXPECT_THROW(ff_probe(c.config, c.params, {9}, {1}, {1}), InvalidInput);
  EXPECT_THROW(parse_probe_token("x1"), InvalidInput);
  EXPECT_EQ(parse_probe_token("BOS").label(), "BOS");
  EXPECT_EQ(parse_probe_token("4").label(), "t4");
}

TEST(LogitCurves, ExactModelPredictsK) {
  const Construction c = build({ConstructionKind::rc_dot, 6, 5});
  const ProbeReport r = logit_curves(c.config, c.params, 2, 5);
  const ProbeTable& t = r.table("logits");
  ASSERT_EQ(t.cells.rows(), 4u);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(t.cells(k, 0), static_cast<double>(k + 1));
    EXPECT_EQ(t.cells(k, 1), static_cast<double>(k + 1));
  }
  EXPECT_THROW(logit_curves(c.config, c.params, 2, 2), InvalidInput);
}

TEST(Svd, IdentityRankOneAndFrobenius) {
  for (double s : svd_spectrum(Matrix::identity(4, 1.0))) EXPECT_NEAR(s, 1.0, 1e-12);

  Matrix r1(3, 5);
  const double u[] = {1, -2, 2}, v[] = {0.5, 0, 1, -1, 0.5};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j) r1(i, j) = u[i] * v[j];
  const Vector s1 = svd_spectrum(r1);
  ASSERT_EQ(s1.size(), 3u);
  EXPECT_NEAR(s1[0], 3.0 * std::sqrt(2.5), 1e-12);
  EXPECT_NEAR(s1[1], 0.0, 1e-6);

  SplitMix64 rng(4);
  std::normal_distribution<double> n(0, 1);
  Matrix w(7, 4);
  for (double& x : w.values()) x = n(rng);
  double fro = 0, sum = 0;
  for (double x : w.values()) fro += x * x;
  for (double s : svd_spectrum(w)) sum += s * s;
  EXPECT_NEAR(sum, fro, 1e-8);
}

TEST(Svd, ReportHasOneTablePerLayer) {
  ModelConfig c = with_architecture(ModelConfig{}, "lin");
  c.T = 4, c.L = 3, c.C = 3, c.d = 3, c.p = 5, c.layers = 2;
  const ProbeReport r = svd_report(init_params(c, 1));
  ASSERT_EQ(r.tables.size(), 2u);
  EXPECT_EQ(r.tables[1].name, "layer1.w1");
  EXPECT_EQ(r.tables[0].cells.rows(), 3u);
}

TEST(Csv, LabeledRowsAndShortestRoundTripNumbers) {
  const ProbeTable t{"x", {"a", "b"}, {"u", "v"}, Matrix(2, 2, std::vector<double>{0.1, 2, -3.5, 1e-20})};
  std::ostringstream os;
  write_csv(os, t);
  EXPECT_EQ(os.str(), "label,u,v\na,0.1,2\nb,-3.5,1e-20\n");
  ProbeReport r{"k", {}, {t}};
  EXPECT_EQ(report_metadata(r).at("tables").at(0).at("rows"), 2);
  r.tables[0].columns.pop_back();
  EXPECT_THROW(check_report(r), InvalidInput);
}
