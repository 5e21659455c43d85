#pragma once

// (d, p) sweeps with seed replicates, a resumable JSON-lines record stream,
// per-cell aggregation, CSV tables, parameter-efficiency hulls and
// difference tables between grids.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "tinycount/coherence.hpp"
#include "tinycount/constructions.hpp"
#include "tinycount/error.hpp"
#include "tinycount/introspection.hpp"
#include "tinycount/model.hpp"
#include "tinycount/params_io.hpp"
#include "tinycount/rng.hpp"
#include "tinycount/training.hpp"

namespace tinycount {

inline const std::vector<int> kDefaultAxis = {1, 2, 3, 4, 6, 8, 12, 16, 23, 32, 45, 64, 91, 128};

struct Budget {
  std::string name = "desk";
  int epochs = 200;
  int samples_per_epoch = 2000;
  int eval_samples = 1000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double stop_accuracy = 2.0;  // > 1 disables early stopping

  /// Part of every cell key, so runs at different budgets never mix.
  std::string tag() const {
    std::ostringstream os;
    os << name << ":e" << epochs << ":s" << samples_per_epoch << ":v" << eval_samples << ":b" << batch_size
       << ":lr" << format_double(learning_rate);
    if (stop_accuracy <= 1.0) os << ":stop" << format_double(stop_accuracy);
    return os.str();
  }
};

inline Budget desk_budget() { return {}; }
inline Budget full_budget() { return {"full", 500, 10000, 3000, 32, 1e-3, 2.0}; }

inline nlohmann::json budget_to_json(const Budget& b) {
  return {{"name", b.name},           {"epochs", b.epochs},
          {"samples_per_epoch", b.samples_per_epoch}, {"eval_samples", b.eval_samples},
          {"batch_size", b.batch_size}, {"learning_rate", b.learning_rate},
          {"stop_accuracy", b.stop_accuracy}};
}

inline Budget budget_from_json(const nlohmann::json& j) {
  Budget b;
  b.name = j.value("name", b.name);
  b.epochs = j.value("epochs", b.epochs);
  b.samples_per_epoch = j.value("samples_per_epoch", b.samples_per_epoch);
  b.eval_samples = j.value("eval_samples", b.eval_samples);
  b.batch_size = j.value("batch_size", b.batch_size);
  b.learning_rate = j.value("learning_rate", b.learning_rate);
  b.stop_accuracy = j.value("stop_accuracy", b.stop_accuracy);
  return b;
}

struct SweepGrid {
  std::vector<std::string> architectures = {"lin", "lin+sftm", "dot", "dot+sftm", "bos", "bos+sftm"};
  std::vector<int> d_values = kDefaultAxis;
  std::vector<int> p_values = kDefaultAxis;
  int seeds = 5;
  int T = 32;
  int L = 10;
  int layers = 1;
  bool frozen = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (architectures.empty() || d_values.empty() || p_values.empty())
      throw ConfigError("sweep grid axes must be non-empty");
    if (seeds < 1) throw ConfigError("sweep grid needs seeds >= 1");
    for (const auto& a : architectures) (void)with_architecture(ModelConfig{}, a);
    for (int d : d_values)
      if (d < 1) throw ConfigError("d values must be >= 1");
    for (int p : p_values)
      if (p < 1) throw ConfigError("p values must be >= 1");
    SamplerSpec{T, L, Scheme::partition, 0}.validate();
  }
};

inline nlohmann::json grid_to_json(const SweepGrid& g) {
  return {{"architectures", g.architectures}, {"d", g.d_values}, {"p", g.p_values}, {"seeds", g.seeds},
          {"T", g.T}, {"L", g.L}, {"layers", g.layers}, {"frozen", g.frozen}, {"seed", g.seed}};
}

inline SweepGrid grid_from_json(const nlohmann::json& j) {
  SweepGrid g;
  g.architectures = j.value("architectures", g.architectures);
  g.d_values = j.value("d", g.d_values);
  g.p_values = j.value("p", g.p_values);
  g.seeds = j.value("seeds", g.seeds);
  g.T = j.value("T", g.T);
  g.L = j.value("L", g.L);
  g.layers = j.value("layers", g.layers);
  g.frozen = j.value("frozen", g.frozen);
  g.seed = j.value("seed", g.seed);
  g.validate();
  return g;
}

inline nlohmann::json train_spec_to_json(const TrainSpec& s) {
  return {{"config", config_to_json(s.config)},
          {"epochs", s.epochs},
          {"batch_size", s.batch_size},
          {"samples_per_epoch", s.samples_per_epoch},
          {"eval_samples", s.eval_samples},
          {"learning_rate", s.adam.learning_rate},
          {"adam_beta1", s.adam.beta1},
          {"adam_beta2", s.adam.beta2},
          {"adam_eps", s.adam.eps},
          {"seed", s.seed},
          {"freeze_embeddings", s.freeze_embeddings},
          {"clip_norm", s.clip_norm},
          {"scheme", scheme_name(s.scheme)},
          {"stop_accuracy", s.stop_accuracy}};
}

/// Missing fields keep their defaults; "config" is required.
inline TrainSpec train_spec_from_json(const nlohmann::json& j) {
  TrainSpec s;
  try {
    s.config = config_from_json(j.at("config"));
    s.epochs = j.value("epochs", s.epochs);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.samples_per_epoch = j.value("samples_per_epoch", s.samples_per_epoch);
    s.eval_samples = j.value("eval_samples", s.eval_samples);
    s.adam.learning_rate = j.value("learning_rate", s.adam.learning_rate);
    s.adam.beta1 = j.value("adam_beta1", s.adam.beta1);
    s.adam.beta2 = j.value("adam_beta2", s.adam.beta2);
    s.adam.eps = j.value("adam_eps", s.adam.eps);
    s.seed = j.value("seed", s.seed);
    s.freeze_embeddings = j.value("freeze_embeddings", s.freeze_embeddings);
    s.clip_norm = j.value("clip_norm", s.clip_norm);
    s.scheme = parse_scheme(j.value("scheme", std::string(scheme_name(s.scheme))));
    s.stop_accuracy = j.value("stop_accuracy", s.stop_accuracy);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training spec: ") + e.what());
  }
  s.validate();
  return s;
}

/// One training run of a sweep.
struct Cell {
  std::string architecture;
  int T = 0, L = 0, d = 0, p = 0, layers = 1;
  bool frozen = false;
  int replicate = 0;
  std::string budget;

  ModelConfig config() const {
    ModelConfig c = with_architecture(ModelConfig{}, architecture);
    c.T = T;
    c.L = L;
    c.C = L;
    c.d = d;
    c.p = p;
    c.layers = layers;
    return c;
  }

  /// Identifies the aggregation cell: everything except the replicate.
  std::string group_key() const {
    std::ostringstream os;
    os << architecture << "|T" << T << "|L" << L << "|d" << d << "|p" << p << "|layers" << layers
       << "|frozen" << (frozen ? 1 : 0) << "|" << budget;
    return os.str();
  }
  std::string key() const { return group_key() + "|seed" + std::to_string(replicate); }
};

inline std::vector<Cell> expand_grid(const SweepGrid& g, const Budget& b) {
  g.validate();
  std::vector<Cell> cells;
  for (const auto& a : g.architectures)
    for (int d : g.d_values)
      for (int p : g.p_values)
        for (int s = 0; s < g.seeds; ++s) cells.push_back({a, g.T, g.L, d, p, g.layers, g.frozen, s, b.tag()});
  return cells;
}

/// Training seed of a cell: a function of the grid seed and the cell key only.
inline std::uint64_t cell_seed(std::uint64_t grid_seed, const Cell& c) {
  return derive_seed(grid_seed, {hash_string(c.key())});
}

struct RunRecord {
  std::string key;
  Cell cell;
  std::uint64_t seed = 0;
  double final_accuracy = 0.0;
  double best_accuracy = 0.0;
  int best_epoch = -1;
  int epochs_run = 0;
  double final_sequence_accuracy = 0.0;
  long long params = 0;
  std::string history_path;
  std::string params_path;
  double wall_seconds = 0.0;
  std::optional<std::string> error;
};

inline nlohmann::json record_to_json(const RunRecord& r) {
  const Cell& c = r.cell;
  nlohmann::json j = {{"key", r.key},
                      {"architecture", c.architecture},
                      {"T", c.T},
                      {"L", c.L},
                      {"d", c.d},
                      {"p", c.p},
                      {"layers", c.layers},
                      {"frozen", c.frozen},
                      {"replicate", c.replicate},
                      {"budget", c.budget},
                      {"seed", r.seed},
                      {"final_accuracy", r.final_accuracy},
                      {"best_accuracy", r.best_accuracy},
                      {"best_epoch", r.best_epoch},
                      {"epochs_run", r.epochs_run},
                      {"final_sequence_accuracy", r.final_sequence_accuracy},
                      {"params", r.params},
                      {"history_path", r.history_path},
                      {"params_path", r.params_path},
                      {"wall_seconds", r.wall_seconds},
                      {"init", "gaussian: embeddings 1/sqrt(d), weights 1/sqrt(fan_in), biases 0"},
                      {"optimizer", "adam beta1=0.9 beta2=0.999 eps=1e-8"}};
  j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    r.key = j.at("key").get<std::string>();
    r.cell = {j.at("architecture").get<std::string>(),
              j.at("T").get<int>(),
              j.at("L").get<int>(),
              j.at("d").get<int>(),
              j.at("p").get<int>(),
              j.at("layers").get<int>(),
              j.at("frozen").get<bool>(),
              j.at("replicate").get<int>(),
              j.at("budget").get<std::string>()};
    r.seed = j.at("seed").get<std::uint64_t>();
    r.final_accuracy = j.at("final_accuracy").get<double>();
    r.best_accuracy = j.at("best_accuracy").get<double>();
    r.best_epoch = j.value("best_epoch", -1);
    r.epochs_run = j.value("epochs_run", 0);
    r.final_sequence_accuracy = j.value("final_sequence_accuracy", 0.0);
    r.params = j.at("params").get<long long>();
    r.history_path = j.value("history_path", "");
    r.params_path = j.value("params_path", "");
    r.wall_seconds = j.value("wall_seconds", 0.0);
    if (j.contains("error") && !j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("malformed run record: ") + e.what());
  }
  if (r.best_accuracy < 0.0 || r.best_accuracy > 1.0 || r.final_accuracy < 0.0 || r.final_accuracy > 1.0)
    throw InvalidInput("run record accuracy outside [0, 1]");
  return r;
}

/// Reads a JSON-lines record file; a missing file is an empty stream.
inline std::vector<RunRecord> read_records(const std::string& path) {
  std::vector<RunRecord> out;
  std::ifstream is(path);
  if (!is) return out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw InvalidInput("'" + path + "' has a malformed line: " + e.what());
    }
  }
  return out;
}

inline std::string sanitize_key(std::string s) {
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '.' && ch != '-' && ch != '_') ch = '_';
  return s;
}

inline void write_history_csv(std::ostream& os, const TrainHistory& h) {
  os << "epoch,loss,accuracy\n";
  for (std::size_t e = 0; e < h.loss.size(); ++e)
    os << e << ',' << format_double(h.loss[e]) << ',' << format_double(h.accuracy[e]) << '\n';
}

/// Trains one cell. Training failures become records with an error tag.
/// When out_dir is non-empty, params.json and history.csv go to
/// out_dir/runs/<key>/.
inline RunRecord run_cell(const Cell& cell, const Budget& budget, std::uint64_t grid_seed,
                          const std::string& out_dir = "") {
  RunRecord r;
  r.key = cell.key();
  r.cell = cell;
  r.seed = cell_seed(grid_seed, cell);
  try {
    TrainSpec spec;
    spec.config = cell.config();
    spec.epochs = budget.epochs;
    spec.samples_per_epoch = budget.samples_per_epoch;
    spec.eval_samples = budget.eval_samples;
    spec.batch_size = budget.batch_size;
    spec.adam.learning_rate = budget.learning_rate;
    spec.stop_accuracy = budget.stop_accuracy;
    spec.freeze_embeddings = cell.frozen;
    spec.seed = r.seed;
    r.params = count_params(spec.config);
    const TrainHistory h = train(spec);
    r.final_accuracy = h.final_accuracy;
    r.best_accuracy = h.best_accuracy;
    r.best_epoch = h.best_epoch;
    r.epochs_run = static_cast<int>(h.loss.size());
    r.final_sequence_accuracy = h.final_sequence_accuracy;
    r.wall_seconds = h.wall_seconds;
    if (!out_dir.empty()) {
      const auto dir = std::filesystem::path(out_dir) / "runs" / sanitize_key(r.key);
      std::filesystem::create_directories(dir);
      r.params_path = (dir / "params.json").string();
      r.history_path = (dir / "history.csv").string();
      nlohmann::json meta = {{"seed", r.seed}, {"key", r.key}, {"best_accuracy", h.best_accuracy},
                             {"final_accuracy", h.final_accuracy}};
      save_model(r.params_path, {spec.config, h.final_params, meta});
      std::ofstream hs(r.history_path);
      write_history_csv(hs, h);
    }
  } catch (const std::exception& e) {
    r.error = e.what();
    r.final_accuracy = r.best_accuracy = 0.0;
  }
  return r;
}

struct SweepOptions {
  std::string records_path;  // JSON-lines stream, appended to and used for resuming
  std::string out_dir;       // per-run artifacts; empty to skip
  int threads = 1;
};

/// Runs every cell not already present in the record stream. Returns the
/// records produced by this call.
inline std::vector<RunRecord> run_sweep(const SweepGrid& grid, const Budget& budget, const SweepOptions& o,
                                        const std::function<void(const RunRecord&)>& on_record = {}) {
  const std::vector<Cell> all = expand_grid(grid, budget);
  std::set<std::string> done;
  if (!o.records_path.empty())
    for (const auto& r : read_records(o.records_path)) done.insert(r.key);
  std::vector<Cell> todo;
  for (const auto& c : all)
    if (!done.count(c.key())) todo.push_back(c);

  std::ofstream appender;
  if (!o.records_path.empty()) {
    const auto parent = std::filesystem::path(o.records_path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    appender.open(o.records_path, std::ios::app);
    if (!appender) throw InvalidInput("cannot open '" + o.records_path + "' for appending");
  }
  std::vector<std::optional<RunRecord>> results(todo.size());
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < todo.size();) {
      RunRecord r = run_cell(todo[i], budget, grid.seed, o.out_dir);
      std::lock_guard lock(mu);
      if (appender.is_open()) appender << record_to_json(r).dump() << '\n' << std::flush;
      if (on_record) on_record(r);
      results[i] = std::move(r);
    }
  };
  const int n = std::max(1, std::min<int>(o.threads, static_cast<int>(todo.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  std::vector<RunRecord> out;
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

struct CellStats {
  std::string architecture;
  int T = 0, L = 0, d = 0, p = 0, layers = 1;
  bool frozen = false;
  std::string budget;
  int runs = 0;    // successful runs
  int errors = 0;  // failed runs
  double mean_acc = 0.0, std_acc = 0.0, best_acc = 0.0;
  bool any100 = false, any99 = false;
  bool missing = false;
  long long params = 0;

  std::string flags() const {
    std::vector<std::string> f;
    if (missing) f.push_back("missing");
    if (any100) f.push_back("any100");
    if (any99) f.push_back("any99");
    if (errors > 0) f.push_back("errors=" + std::to_string(errors));
    std::string s;
    for (std::size_t i = 0; i < f.size(); ++i) s += (i ? ";" : "") + f[i];
    return s;
  }
};

namespace detail {

inline CellStats stats_from_cell(const Cell& c) {
  CellStats s;
  s.architecture = c.architecture;
  s.T = c.T;
  s.L = c.L;
  s.d = c.d;
  s.p = c.p;
  s.layers = c.layers;
  s.frozen = c.frozen;
  s.budget = c.budget;
  s.params = count_params(c.config());
  return s;
}

inline void finish_stats(CellStats& s, std::vector<double> acc) {
  s.runs = static_cast<int>(acc.size());
  if (acc.empty()) {
    s.missing = true;
    return;
  }
  // Summation in sorted order keeps the result independent of record order.
  std::sort(acc.begin(), acc.end());
  double sum = 0.0;
  for (double a : acc) sum += a;
  s.mean_acc = sum / static_cast<double>(acc.size());
  double sq = 0.0;
  for (double a : acc) sq += (a - s.mean_acc) * (a - s.mean_acc);
  s.std_acc = std::sqrt(sq / static_cast<double>(acc.size()));
  s.best_acc = acc.back();
  s.any100 = s.best_acc >= 1.0;
  s.any99 = s.best_acc > 0.99;
}

}  // namespace detail

/// Per-cell statistics of the per-run accuracy (`use_best` picks best-during-
/// training instead of final). Cells come out sorted by key; failed runs are
/// counted, not averaged.
inline std::vector<CellStats> aggregate(const std::vector<RunRecord>& records, bool use_best = false) {
  std::map<std::string, std::pair<CellStats, std::vector<double>>> groups;
  for (const auto& r : records) {
    auto [it, fresh] = groups.try_emplace(r.cell.group_key());
    if (fresh) it->second.first = detail::stats_from_cell(r.cell);
    if (r.error) {
      ++it->second.first.errors;
    } else {
      it->second.second.push_back(use_best ? r.best_accuracy : r.final_accuracy);
    }
  }
  std::vector<CellStats> out;
  for (auto& [key, g] : groups) {
    detail::finish_stats(g.first, std::move(g.second));
    out.push_back(std::move(g.first));
  }
  return out;
}

/// Statistics for every cell of the grid; cells without records are flagged
/// as missing.
inline std::vector<CellStats> aggregate_grid(const SweepGrid& grid, const Budget& budget,
                                             const std::vector<RunRecord>& records, bool use_best = false) {
  std::map<std::string, CellStats> have;
  for (auto& s : aggregate(records, use_best)) {
    Cell c{s.architecture, s.T, s.L, s.d, s.p, s.layers, s.frozen, 0, s.budget};
    have.emplace(c.group_key(), std::move(s));
  }
  std::vector<CellStats> out;
  std::set<std::string> seen;
  for (const auto& c : expand_grid(grid, budget)) {
    const auto key = c.group_key();
    if (!seen.insert(key).second) continue;
    if (auto it = have.find(key); it != have.end()) {
      out.push_back(it->second);
    } else {
      CellStats s = detail::stats_from_cell(c);
      s.missing = true;
      out.push_back(s);
    }
  }
  return out;
}

inline const char* kCellCsvHeader =
    "architecture,d,p,T,L,layers,frozen,mean_acc,std_acc,best_acc,params,flags";

inline void write_cells_csv(std::ostream& os, const std::vector<CellStats>& cells) {
  os << kCellCsvHeader << '\n';
  for (const auto& c : cells)
    os << c.architecture << ',' << c.d << ',' << c.p << ',' << c.T << ',' << c.L << ',' << c.layers << ','
       << (c.frozen ? 1 : 0) << ',' << format_double(c.mean_acc) << ',' << format_double(c.std_acc) << ','
       << format_double(c.best_acc) << ',' << c.params << ',' << c.flags() << '\n';
}

inline nlohmann::json cells_to_json(const std::vector<CellStats>& cells) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells)
    arr.push_back({{"architecture", c.architecture}, {"d", c.d}, {"p", c.p}, {"T", c.T}, {"L", c.L},
                   {"layers", c.layers}, {"frozen", c.frozen}, {"budget", c.budget}, {"runs", c.runs},
                   {"errors", c.errors}, {"mean_acc", c.mean_acc}, {"std_acc", c.std_acc},
                   {"best_acc", c.best_acc}, {"params", c.params}, {"flags", c.flags()}});
  return arr;
}

struct HullPoint {
  long long params = 0;
  double accuracy = 0.0;
  int d = 0, p = 0;
};

/// Upper convex hull of (log params, accuracy) per architecture, left to right.
inline std::map<std::string, std::vector<HullPoint>> parameter_hulls(const std::vector<CellStats>& cells) {
  std::map<std::string, std::vector<HullPoint>> pts;
  for (const auto& c : cells)
    if (!c.missing) pts[c.architecture].push_back({c.params, c.mean_acc, c.d, c.p});
  std::map<std::string, std::vector<HullPoint>> out;
  for (auto& [arch, v] : pts) {
    std::sort(v.begin(), v.end(), [](const HullPoint& a, const HullPoint& b) {
      return std::tie(a.params, a.accuracy, a.d, a.p) < std::tie(b.params, b.accuracy, b.d, b.p);
    });
    // At equal x only the highest point can be on the upper hull.
    std::vector<HullPoint> u;
    for (const auto& q : v) {
      if (!u.empty() && u.back().params == q.params) u.pop_back();
      u.push_back(q);
    }
    std::vector<HullPoint> hull;
    auto cross = [](const HullPoint& o, const HullPoint& a, const HullPoint& b) {
      const double ox = std::log(static_cast<double>(o.params));
      const double ax = std::log(static_cast<double>(a.params)) - ox, ay = a.accuracy - o.accuracy;
      const double bx = std::log(static_cast<double>(b.params)) - ox, by = b.accuracy - o.accuracy;
      return ax * by - ay * bx;
    };
    for (const auto& q : u) {
      while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), q) >= 0.0) hull.pop_back();
      hull.push_back(q);
    }
    out[arch] = std::move(hull);
  }
  return out;
}

struct DiffRow {
  std::string architecture;
  int T = 0, L = 0, d = 0, p = 0;
  double mean_a = 0.0, mean_b = 0.0, diff = 0.0;
};

/// mean(a) - mean(b) for cells present in both tables with the same
/// architecture, T, L, d and p (layer count, freezing and budget may differ).
inline std::vector<DiffRow> difference_table(const std::vector<CellStats>& a, const std::vector<CellStats>& b) {
  using K = std::tuple<std::string, int, int, int, int>;
  std::map<K, const CellStats*> bm;
  for (const auto& c : b)
    if (!c.missing) bm[{c.architecture, c.T, c.L, c.d, c.p}] = &c;
  std::vector<DiffRow> out;
  for (const auto& c : a) {
    if (c.missing) continue;
    auto it = bm.find({c.architecture, c.T, c.L, c.d, c.p});
    if (it == bm.end()) continue;
    out.push_back({c.architecture, c.T, c.L, c.d, c.p, c.mean_acc, it->second->mean_acc,
                   c.mean_acc - it->second->mean_acc});
  }
  std::sort(out.begin(), out.end(), [](const DiffRow& x, const DiffRow& y) {
    return std::tie(x.architecture, x.T, x.L, x.d, x.p) < std::tie(y.architecture, y.T, y.L, y.d, y.p);
  });
  return out;
}

inline void write_diff_csv(std::ostream& os, const std::vector<DiffRow>& rows) {
  os << "architecture,d,p,T,L,mean_a,mean_b,diff\n";
  for (const auto& r : rows)
    os << r.architecture << ',' << r.d << ',' << r.p << ',' << r.T << ',' << r.L << ',' << format_double(r.mean_a)
       << ',' << format_double(r.mean_b) << ',' << format_double(r.diff) << '\n';
}

namespace detail {
inline bool buildable(ConstructionKind kind, int T, int L, int d, int p) {
  try {
    build({kind, T, L, d, p});
    return true;
  } catch (const Error&) {
    return false;
  }
}
}  // namespace detail

/// Whether one of the explicit weight constructions exists at (d, p) for a
/// single-layer model of this architecture. The low-coherence kinds assume a
/// frame at the Welch bound; softmax kinds are checked by building them.
inline bool predicted_feasible(std::string_view arch, int T, int L, int d, int p) {
  const ModelConfig c = with_architecture(ModelConfig{}, arch);
  auto frame_dim = [&](DimensionKind k) { return L >= 5 ? std::min(T, min_dimension(k, T, L)) : T; };
  if (c.mixing == Mixing::linear) return p >= T && d >= frame_dim(DimensionKind::lin_pT);
  if (!c.softmax) {
    if (d >= frame_dim(DimensionKind::dot_p1)) return true;
    return p >= T && d >= frame_dim(DimensionKind::dot_pT);
  }
  if (c.bos)
    return d >= T || detail::buildable(ConstructionKind::binary_bos_sftm, T, L, d, p) ||
           (T % 2 == 1 && detail::buildable(ConstructionKind::compact_d4, T, L, d, p));
  return p >= T && (d >= T || detail::buildable(ConstructionKind::binary_dot_sftm, T, L, d, p));
}

}  // namespace tinycount
