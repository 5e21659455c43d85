#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "tinycount/harness.hpp"

using namespace tinycount;

namespace {

SweepGrid tiny_grid() {
  SweepGrid g;
  g.architectures = {"lin", "dot"};
  g.d_values = {2, 4};
  g.p_values = {2, 4};
  g.seeds = 2;
  g.T = 6;
  g.L = 4;
  g.seed = 11;
  return g;
}

Budget tiny_budget() {
  Budget b;
  b.name = "tiny";
  b.epochs = 2;
  b.samples_per_epoch = 100;
  b.eval_samples = 50;
  return b;
}

RunRecord fake(const std::string& arch, int d, int p, int rep, double acc) {
  RunRecord r;
  r.cell = Cell{arch, 32, 10, d, p, 1, false, rep, desk_budget().tag()};
  r.key = r.cell.key();
  r.final_accuracy = r.best_accuracy = acc;
  r.params = count_params(r.cell.config());
  return r;
}

struct TempDir {
  std::filesystem::path path;
  TempDir() : path(std::filesystem::temp_directory_path() / ("tinycount_harness_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST(Sweep, RunsEveryCellAndResumes) {
  TempDir tmp;
  const SweepOptions o{(tmp.path / "records.jsonl").string(), (tmp.path / "out").string(), 2};
  const auto first = run_sweep(tiny_grid(), tiny_budget(), o);
  ASSERT_EQ(first.size(), 16u);
  for (const auto& r : first) {
    EXPECT_FALSE(r.error) << *r.error;
    EXPECT_EQ(r.params, count_params(r.cell.config()));
    EXPECT_EQ(r.epochs_run, 2);
    EXPECT_TRUE(std::filesystem::exists(r.params_path));
    EXPECT_TRUE(std::filesystem::exists(r.history_path));
    EXPECT_EQ(r.seed, cell_seed(11, r.cell));
  }
  EXPECT_EQ(read_records(o.records_path).size(), 16u);
  EXPECT_TRUE(run_sweep(tiny_grid(), tiny_budget(), o).empty());
  EXPECT_EQ(read_records(o.records_path).size(), 16u);
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
  const auto one = run_sweep(tiny_grid(), tiny_budget(), {"", "", 1});
  const auto two = run_sweep(tiny_grid(), tiny_budget(), {"", "", 2});
  std::map<std::string, double> a;
  for (const auto& r : one) a[r.key] = r.final_accuracy;
  for (const auto& r : two) EXPECT_EQ(a.at(r.key), r.final_accuracy) << r.key;
}

TEST(Records, JsonRoundTripAndValidation) {
  RunRecord r = fake("bos+sftm", 8, 4, 3, 0.75);
  r.error = "boom";
  const RunRecord back = record_from_json(record_to_json(r));
  EXPECT_EQ(record_to_json(back), record_to_json(r));
  auto j = record_to_json(fake("lin", 4, 4, 0, 0.5));
  EXPECT_TRUE(j.at("error").is_null());
  j["final_accuracy"] = 1.5;
  EXPECT_THROW(record_from_json(j), InvalidInput);
  EXPECT_TRUE(read_records("/nonexistent/records.jsonl").empty());
}

TEST(Aggregate, SingleRecordCell) {
  const auto cells = aggregate({fake("dot", 4, 4, 0, 0.6)});
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_EQ(cells[0].runs, 1);
  EXPECT_EQ(cells[0].mean_acc, 0.6);
  EXPECT_EQ(cells[0].std_acc, 0.0);
  EXPECT_EQ(cells[0].flags(), "");
}

TEST(Aggregate, FlagsAndMean) {
  const auto cells = aggregate({fake("dot", 4, 4, 0, 1.0), fake("dot", 4, 4, 1, 0.98)});
  ASSERT_EQ(cells.size(), 1u);
  EXPECT_NEAR(cells[0].mean_acc, 0.99, 1e-15);
  EXPECT_NEAR(cells[0].std_acc, 0.01, 1e-15);
  EXPECT_TRUE(cells[0].any100);
  EXPECT_TRUE(cells[0].any99);
  EXPECT_EQ(cells[0].flags(), "any100;any99");
  const auto below = aggregate({fake("dot", 4, 4, 0, 0.99)});
  EXPECT_FALSE(below[0].any99);
}

TEST(Aggregate, ErrorsAreCountedNotAveraged) {
  RunRecord bad = fake("dot", 4, 4, 1, 0.0);
  bad.error = "non-finite loss";
  const auto cells = aggregate({fake("dot", 4, 4, 0, 0.7), bad});
  EXPECT_EQ(cells[0].runs, 1);
  EXPECT_EQ(cells[0].errors, 1);
  EXPECT_EQ(cells[0].mean_acc, 0.7);
  EXPECT_EQ(cells[0].flags(), "errors=1");
}

TEST(Aggregate, OrderIndependentAndByteIdenticalCsv) {
  std::vector<RunRecord> recs;
  std::mt19937 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (const char* a : {"lin", "dot", "bos"})
    for (int d : {2, 8})
      for (int rep = 0; rep < 5; ++rep) recs.push_back(fake(a, d, 4, rep, u(gen)));
  std::ostringstream base;
  write_cells_csv(base, aggregate(recs));
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(recs.begin(), recs.end(), gen);
    std::ostringstream os;
    write_cells_csv(os, aggregate(recs));
    ASSERT_EQ(os.str(), base.str());
  }
  EXPECT_EQ(base.str().substr(0, base.str().find('\n')), kCellCsvHeader);
}

TEST(Aggregate, MissingCellsFlagged) {
  SweepGrid g = tiny_grid();
  g.T = 32;
  g.L = 10;
  std::vector<RunRecord> recs = {fake("lin", 2, 2, 0, 0.4)};
  const auto cells = aggregate_grid(g, desk_budget(), recs);
  EXPECT_EQ(cells.size(), 8u);
  int missing = 0;
  for (const auto& c : cells) missing += c.missing;
  EXPECT_EQ(missing, 7);
  EXPECT_NE(cells_to_json(cells).dump().find("missing"), std::string::npos);
}

TEST(Hulls, UpperHullOnLogParams) {
  std::vector<CellStats> cells;
  auto add = [&](long long params, double acc, int d) {
    CellStats s;
    s.architecture = "dot";
    s.params = params;
    s.mean_acc = acc;
    s.d = d;
    cells.push_back(s);
  };
  add(10, 0.2, 1);
  add(100, 0.3, 2);  // below the chord from (10, 0.2) to (1000, 0.9)
  add(1000, 0.9, 3);
  add(10000, 0.95, 4);
  add(1000, 0.5, 5);  // dominated at equal size
  const auto h = parameter_hulls(cells).at("dot");
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(h[0].d, 1);
  EXPECT_EQ(h[1].d, 3);
  EXPECT_EQ(h[2].d, 4);
}

TEST(Diff, MatchesCellsAcrossTables) {
  const auto a = aggregate({fake("dot", 4, 4, 0, 0.8), fake("lin", 4, 4, 0, 0.5)});
  auto b_rec = fake("dot", 4, 4, 0, 0.6);
  b_rec.cell.layers = 2;
  const auto rows = difference_table(a, aggregate({b_rec}));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_NEAR(rows[0].diff, 0.2, 1e-15);
  std::ostringstream os;
  write_diff_csv(os, rows);
  EXPECT_EQ(os.str().substr(0, 32), "architecture,d,p,T,L,mean_a,mean");
}

TEST(Predicted, FeasibilityPattern) {
  EXPECT_TRUE(predicted_feasible("dot", 32, 10, 32, 1));
  EXPECT_TRUE(predicted_feasible("dot", 32, 10, 30, 1));
  EXPECT_FALSE(predicted_feasible("dot", 32, 10, 29, 1));
  EXPECT_TRUE(predicted_feasible("dot", 32, 10, 8, 32));
  EXPECT_FALSE(predicted_feasible("dot", 32, 10, 7, 32));
  EXPECT_TRUE(predicted_feasible("lin", 32, 10, 29, 32));
  EXPECT_FALSE(predicted_feasible("lin", 32, 10, 32, 31));
  EXPECT_TRUE(predicted_feasible("bos+sftm", 32, 10, 8, 1));
  EXPECT_FALSE(predicted_feasible("bos+sftm", 32, 10, 7, 1));
  EXPECT_TRUE(predicted_feasible("bos+sftm", 31, 10, 4, 1));
  EXPECT_FALSE(predicted_feasible("dot+sftm", 32, 10, 31, 32));
  EXPECT_TRUE(predicted_feasible("dot+sftm", 32, 10, 32, 32));
}

TEST(Config, GridAndBudgetJsonRoundTrip) {
  const SweepGrid g = tiny_grid();
  EXPECT_EQ(grid_to_json(grid_from_json(grid_to_json(g))), grid_to_json(g));
  const Budget b = full_budget();
  EXPECT_EQ(budget_to_json(budget_from_json(budget_to_json(b))), budget_to_json(b));
  nlohmann::json bad = grid_to_json(g);
  bad["seeds"] = 0;
  EXPECT_THROW(grid_from_json(bad), ConfigError);
  TrainSpec s;
  s.config = Cell{"bos", 6, 4, 3, 2, 1, false, 0, "x"}.config();
  s.epochs = 7;
  EXPECT_EQ(train_spec_to_json(train_spec_from_json(train_spec_to_json(s))), train_spec_to_json(s));
}
