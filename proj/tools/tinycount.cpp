// Command-line front end: constructions, verification, datasets, training,
// sweeps, frame search, probes and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tinycount/tinycount.hpp"

namespace fs = std::filesystem;
using namespace tinycount;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;
  bool full_scale = false;
};

fs::path out_path(const Globals& g, const std::string& name) {
  fs::create_directories(g.out_dir);
  return fs::path(g.out_dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open '" + path.string() + "' for writing");
  os << text;
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("cannot open '" + path + "'");
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

Sequence parse_sequence(const std::vector<int>& v) { return Sequence(v.begin(), v.end()); }

json verify_to_json(const VerifyReport& r) {
  auto nan_safe = [](const Vector& v) {
    json a = json::array();
    for (double x : v) a.push_back(std::isnan(x) ? json(nullptr) : json(x));
    return a;
  };
  json j = {{"accuracy", r.accuracy},
            {"sequence_accuracy", r.sequence_accuracy},
            {"sequences", r.sequences},
            {"exhaustive", r.exhaustive},
            {"measured_lower", nan_safe(r.measured_lower)},
            {"measured_upper", nan_safe(r.measured_upper)},
            {"within_predicted", r.within_predicted},
            {"problems", r.problems}};
  j["measured_margin"] = std::isnan(r.measured_margin) ? json(nullptr) : json(r.measured_margin);
  return j;
}

void print_min_dimensions(std::ostream& os, int T, int L) {
  os << "min-dimension,T,L,formula,stated,status\n";
  for (auto k : {DimensionKind::lin_pT, DimensionKind::dot_p1, DimensionKind::dot_pT, DimensionKind::sftm_binary}) {
    const int v = min_dimension(k, T, L);
    const auto stated = stated_min_dimension(k, T, L);
    os << dimension_kind_name(k) << ',' << T << ',' << L << ',' << v << ',';
    if (stated) {
      os << *stated << ',' << (*stated == v ? "agrees" : "known discrepancy: formula gives " + std::to_string(v) +
                                                             ", source text states " + std::to_string(*stated));
    } else {
      os << ",";
    }
    os << '\n';
  }
}

void write_report(const ProbeReport& r, const Globals& g) {
  for (const auto& t : r.tables) {
    std::ostringstream os;
    write_csv(os, t);
    const auto path = out_path(g, r.kind + "_" + sanitize_key(t.name) + ".csv");
    write_text(path, os.str());
    std::cout << "wrote " << path.string() << '\n';
  }
  const auto meta = out_path(g, r.kind + ".json");
  write_text(meta, report_metadata(r).dump(2) + "\n");
  std::cout << "wrote " << meta.string() << '\n';
}

Budget budget_for(const Globals& g, int epochs, int samples, int eval) {
  Budget b = g.full_scale ? full_budget() : desk_budget();
  if (epochs > 0) b.epochs = epochs;
  if (samples > 0) b.samples_per_epoch = samples;
  if (eval > 0) b.eval_samples = eval;
  if ((epochs > 0 || samples > 0 || eval > 0) && !g.full_scale) b.name = "custom";
  if ((epochs > 0 || samples > 0 || eval > 0) && g.full_scale) b.name = "full-custom";
  return b;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tinycount: counting with tiny transformers"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Root seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads")->capture_default_str();
  app.add_flag("--full-scale", g.full_scale, "Use the full training budget (500 epochs x 10000 samples)");
  app.fallthrough();

  // construct
  auto* construct = app.add_subcommand("construct", "Build an explicit weight construction");
  std::string kind_name;
  ConstructionSpec cs;
  std::string frame_path, construct_out;
  int code_bits = 0;
  construct->add_option("--kind", kind_name, "Construction kind")->required();
  construct->add_option("-T", cs.T, "Alphabet size")->required();
  construct->add_option("-L", cs.L, "Sequence length")->required();
  construct->add_option("-d", cs.d, "Embedding dimension (0 = minimal)");
  construct->add_option("-p", cs.p, "Hidden width (0 = construction default)");
  construct->add_option("--alpha", cs.alpha, "Binary constructions: alpha");
  construct->add_option("--kappa-safety", cs.kappa_safety, "Binary constructions: kappa safety factor");
  construct->add_option("--frame", frame_path, "Frame file for low-coherence kinds");
  construct->add_option("--code-bits", code_bits, "Binary constructions: code length override");
  construct->add_option("--out", construct_out, "Output file (default <out-dir>/<kind>.json)");

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "Measure accuracy of a parameter file");
  std::string verify_params;
  int verify_samples = 3000;
  bool verify_exhaustive = false;
  verify_cmd->add_option("--params", verify_params, "Parameter file")->required();
  verify_cmd->add_option("--samples", verify_samples, "Sampled sequences when not exhaustive");
  verify_cmd->add_flag("--exhaustive", verify_exhaustive, "Enumerate all T^L sequences");

  // dataset
  auto* dataset_cmd = app.add_subcommand("dataset", "Write histogram samples as JSON lines");
  SamplerSpec ds;
  std::size_t ds_n = 100;
  std::string ds_scheme = "partition", ds_out;
  dataset_cmd->add_option("-T", ds.T)->required();
  dataset_cmd->add_option("-L", ds.L)->required();
  dataset_cmd->add_option("-n", ds_n, "Number of samples");
  dataset_cmd->add_option("--scheme", ds_scheme, "partition or uniform");
  dataset_cmd->add_option("--out", ds_out, "Output file (default stdout)");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train one model");
  std::string train_config, train_arch = "dot", train_out;
  int tT = 32, tL = 10, td = 32, tp = 32, tlayers = 1, tepochs = 0, tsamples = 0, teval = 0;
  bool tfreeze = false;
  train_cmd->add_option("--config", train_config, "Training spec JSON (overrides the flags below)");
  train_cmd->add_option("--arch", train_arch, "lin, lin+sftm, dot, dot+sftm, bos, bos+sftm");
  train_cmd->add_option("-T", tT);
  train_cmd->add_option("-L", tL);
  train_cmd->add_option("-d", td);
  train_cmd->add_option("-p", tp);
  train_cmd->add_option("--layers", tlayers);
  train_cmd->add_option("--epochs", tepochs);
  train_cmd->add_option("--samples", tsamples, "Samples per epoch");
  train_cmd->add_option("--eval-samples", teval);
  train_cmd->add_flag("--freeze-embeddings", tfreeze);
  train_cmd->add_option("--out", train_out, "Run directory (default <out-dir>/train)");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Train a (d, p) grid with seed replicates");
  SweepGrid grid;
  std::string grid_path;
  int sepochs = 0, ssamples = 0, seval = 0;
  bool keep_artifacts = false;
  sweep_cmd->add_option("--grid", grid_path, "Grid JSON (overrides the flags below)");
  sweep_cmd->add_option("--arch", grid.architectures)->delimiter(',');
  sweep_cmd->add_option("--d", grid.d_values)->delimiter(',');
  sweep_cmd->add_option("--p", grid.p_values)->delimiter(',');
  sweep_cmd->add_option("--seeds", grid.seeds);
  sweep_cmd->add_option("-T", grid.T);
  sweep_cmd->add_option("-L", grid.L);
  sweep_cmd->add_option("--layers", grid.layers);
  sweep_cmd->add_flag("--frozen", grid.frozen);
  sweep_cmd->add_option("--epochs", sepochs);
  sweep_cmd->add_option("--samples", ssamples);
  sweep_cmd->add_option("--eval-samples", seval);
  sweep_cmd->add_flag("--keep-artifacts", keep_artifacts, "Write params.json and history.csv per run");

  // coherence
  auto* coh = app.add_subcommand("coherence", "Frames and mutual coherence");
  coh->require_subcommand(1);
  auto* coh_search = coh->add_subcommand("search", "Search a low-coherence frame");
  FrameSearchOptions fo;
  std::string coh_out;
  coh_search->add_option("-T", fo.T);
  coh_search->add_option("-d", fo.d);
  coh_search->add_option("--target", fo.target);
  coh_search->add_option("--budget", fo.budget, "Gradient steps per restart");
  coh_search->add_option("--restarts", fo.restarts);
  coh_search->add_option("--out", coh_out, "Frame file (default <out-dir>/frame_T<T>_d<d>.json)");
  auto* coh_eval = coh->add_subcommand("eval", "Coherence and Welch bound of a frame file");
  std::string eval_frame;
  coh_eval->add_option("--frame", eval_frame)->required();
  auto* coh_mindim = coh->add_subcommand("mindim", "Minimal dimensions of the low-coherence constructions");
  int mT = 32, mL = 10;
  coh_mindim->add_option("-T", mT);
  coh_mindim->add_option("-L", mL);

  // introspect
  auto* intro = app.add_subcommand("introspect", "Run a probe on a parameter file");
  std::string ip_params, ip_probe, ip_first = "bos", ip_second = "1", ip_residual = "2";
  std::vector<int> ip_seq;
  int ip_grid = 201, ip_t = 1, ip_v = 2, ip_samples = 3000, ip_bins = 20;
  intro->add_option("--params", ip_params)->required();
  intro->add_option("--probe", ip_probe, "attention, overlap, confusion, ff, logits, svd")->required();
  intro->add_option("--sequence", ip_seq, "attention: comma-separated tokens")->delimiter(',');
  intro->add_option("--first", ip_first, "ff: token swept with alpha ('bos' or id)");
  intro->add_option("--second", ip_second, "ff: token weighted by 1 - alpha");
  intro->add_option("--residual", ip_residual, "ff: token added with weight 1");
  intro->add_option("--grid", ip_grid, "ff: number of alpha values on [0, 1]");
  intro->add_option("--t", ip_t, "logits: counted token");
  intro->add_option("--v", ip_v, "logits: filler token");
  intro->add_option("--samples", ip_samples, "confusion: sampled sequences");
  intro->add_option("--bins", ip_bins, "overlap: histogram bins");

  // report
  auto* report = app.add_subcommand("report", "Aggregate run records; print known discrepancies");
  std::string rp_records, rp_diff;
  bool rp_best = false;
  int rT = 32, rL = 10;
  report->add_option("--records", rp_records, "JSON-lines run records");
  report->add_option("--diff-against", rp_diff, "Second record file; writes mean(records) - mean(other)");
  report->add_flag("--best", rp_best, "Aggregate best-during-training accuracy instead of final");
  report->add_option("-T", rT, "Alphabet size for the min-dimension table");
  report->add_option("-L", rL, "Sequence length for the min-dimension table");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*construct) {
      cs.kind = parse_construction_kind(kind_name);
      if (!frame_path.empty()) cs.frame = load_frame(frame_path);
      if (code_bits > 0) cs.code_bits = code_bits;
      const Construction c = build(cs);
      const fs::path path = construct_out.empty() ? out_path(g, kind_name + ".json") : fs::path(construct_out);
      write_text(path, dump_model(to_model_file(c)));
      std::cout << info_to_json(c.info).dump(2) << "\nwrote " << path.string() << " (d = " << c.config.d
                << ", p = " << c.config.p << ", params = " << count_params(c.config) << ")\n";
    } else if (*verify_cmd) {
      const ModelFile f = load_model(verify_params);
      std::optional<ConstructionInfo> info;
      if (f.meta.contains("construction")) info = info_from_json(f.meta.at("construction"));
      const ConstructionInfo* ip = info ? &*info : nullptr;
      const VerifyReport r =
          verify_exhaustive ? verify(f.config, f.params, exhaustive_dataset(f.config.T, f.config.L), ip, true)
                            : verify(f.config, f.params,
                                     make_dataset({f.config.T, f.config.L, Scheme::partition, g.seed},
                                                  static_cast<std::size_t>(verify_samples)),
                                     ip, false);
      std::cout << verify_to_json(r).dump(2) << '\n';
    } else if (*dataset_cmd) {
      ds.scheme = parse_scheme(ds_scheme);
      ds.seed = g.seed;
      const auto data = make_dataset(ds, ds_n);
      if (ds_out.empty()) {
        write_jsonl(std::cout, data);
      } else {
        std::ostringstream os;
        write_jsonl(os, data);
        write_text(ds_out, os.str());
      }
    } else if (*train_cmd) {
      TrainSpec spec;
      if (!train_config.empty()) {
        spec = train_spec_from_json(read_json(train_config));
      } else {
        ModelConfig c = with_architecture(ModelConfig{}, train_arch);
        c.T = tT;
        c.L = tL;
        c.C = tL;
        c.d = td;
        c.p = tp;
        c.layers = tlayers;
        spec.config = c;
        const Budget b = budget_for(g, tepochs, tsamples, teval);
        spec.epochs = b.epochs;
        spec.samples_per_epoch = b.samples_per_epoch;
        spec.eval_samples = b.eval_samples;
        spec.freeze_embeddings = tfreeze;
        spec.seed = g.seed;
      }
      const fs::path dir = train_out.empty() ? out_path(g, "train") : fs::path(train_out);
      fs::create_directories(dir);
      const TrainHistory h = train(spec, [](int epoch, double loss, double acc) {
        if (epoch % 10 == 0) std::fprintf(stderr, "epoch %d loss %.6f accuracy %.4f\n", epoch, loss, acc);
      });
      save_model((dir / "params.json").string(),
                 {spec.config, h.final_params,
                  {{"train_spec", train_spec_to_json(spec)}, {"best_accuracy", h.best_accuracy},
                   {"best_epoch", h.best_epoch}, {"final_accuracy", h.final_accuracy}}});
      std::ostringstream hist;
      write_history_csv(hist, h);
      write_text(dir / "history.csv", hist.str());
      RunRecord r;
      r.cell = {spec.config.architecture(), spec.config.T, spec.config.L, spec.config.d, spec.config.p,
                spec.config.layers, spec.freeze_embeddings, 0, "single:e" + std::to_string(spec.epochs)};
      r.key = r.cell.key();
      r.seed = spec.seed;
      r.final_accuracy = h.final_accuracy;
      r.best_accuracy = h.best_accuracy;
      r.best_epoch = h.best_epoch;
      r.epochs_run = static_cast<int>(h.loss.size());
      r.final_sequence_accuracy = h.final_sequence_accuracy;
      r.params = count_params(spec.config);
      r.history_path = (dir / "history.csv").string();
      r.params_path = (dir / "params.json").string();
      r.wall_seconds = h.wall_seconds;
      write_text(dir / "record.jsonl", record_to_json(r).dump() + "\n");
      std::cout << "final accuracy " << h.final_accuracy << ", best " << h.best_accuracy << " (epoch "
                << h.best_epoch << "), wrote " << dir.string() << '\n';
    } else if (*sweep_cmd) {
      if (!grid_path.empty()) grid = grid_from_json(read_json(grid_path));
      grid.seed = g.seed;
      const Budget b = budget_for(g, sepochs, ssamples, seval);
      SweepOptions o{out_path(g, "records.jsonl").string(), keep_artifacts ? g.out_dir : "", g.threads};
      std::size_t n = 0;
      const auto fresh = run_sweep(grid, b, o, [&](const RunRecord& r) {
        ++n;
        std::fprintf(stderr, "[%zu] %s final %.4f best %.4f%s\n", n, r.key.c_str(), r.final_accuracy,
                     r.best_accuracy, r.error ? (" error: " + *r.error).c_str() : "");
      });
      const auto cells = aggregate_grid(grid, b, read_records(o.records_path));
      std::ostringstream csv;
      write_cells_csv(csv, cells);
      write_text(out_path(g, "cells.csv"), csv.str());
      json hulls = json::object();
      for (const auto& [arch, pts] : parameter_hulls(cells)) {
        json a = json::array();
        for (const auto& q : pts) a.push_back({{"params", q.params}, {"accuracy", q.accuracy}, {"d", q.d}, {"p", q.p}});
        hulls[arch] = a;
      }
      write_text(out_path(g, "hulls.json"), hulls.dump(2) + "\n");
      write_text(out_path(g, "grid.json"),
                 json{{"grid", grid_to_json(grid)}, {"budget", budget_to_json(b)}}.dump(2) + "\n");
      std::cout << fresh.size() << " new runs; wrote " << g.out_dir << "/{records.jsonl,cells.csv,hulls.json}\n";
    } else if (*coh_search) {
      fo.threads = g.threads;
      fo.seed = g.seed;
      const auto r = search_low_coherence_frame(fo);
      const fs::path path = coh_out.empty()
                                ? out_path(g, "frame_T" + std::to_string(fo.T) + "_d" + std::to_string(fo.d) + ".json")
                                : fs::path(coh_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      save_frame(path.string(), r.frame);
      std::cout << "coherence " << format_double(r.frame.coherence()) << " (target " << fo.target << ", Welch bound "
                << format_double(welch_bound(fo.T, fo.d)) << "), converged " << (r.converged ? "yes" : "no")
                << ", restart " << r.restart << ", iterations " << r.iterations << "\nwrote " << path.string() << '\n';
    } else if (*coh_eval) {
      const Frame f = load_frame(eval_frame);
      std::cout << json{{"T", f.count()}, {"d", f.dim()}, {"coherence", f.coherence()},
                        {"welch_bound", welch_bound(f.count(), f.dim())}}
                       .dump(2)
                << '\n';
    } else if (*coh_mindim) {
      print_min_dimensions(std::cout, mT, mL);
    } else if (*intro) {
      const ModelFile f = load_model(ip_params);
      ProbeReport r;
      if (ip_probe == "attention") {
        Sequence seq = ip_seq.empty() ? sample_at({f.config.T, f.config.L, Scheme::partition, g.seed}, 0).x
                                      : parse_sequence(ip_seq);
        r = attention_trace(f.config, f.params, seq);
      } else if (ip_probe == "overlap") {
        r = overlap_distribution(f.params, ip_bins);
      } else if (ip_probe == "confusion") {
        r = confusion_matrix(f.config, f.params,
                             make_dataset({f.config.T, f.config.L, Scheme::partition, g.seed},
                                          static_cast<std::size_t>(ip_samples)));
      } else if (ip_probe == "ff") {
        r = ff_probe(f.config, f.params, parse_probe_token(ip_first), parse_probe_token(ip_second),
                     parse_probe_token(ip_residual), ip_grid);
      } else if (ip_probe == "logits") {
        r = logit_curves(f.config, f.params, ip_t, ip_v);
      } else if (ip_probe == "svd") {
        r = svd_report(f.params);
      } else {
        throw InvalidInput("unknown probe '" + ip_probe + "'");
      }
      write_report(r, g);
    } else if (*report) {
      print_min_dimensions(std::cout, rT, rL);
      if (!rp_records.empty()) {
        const auto cells = aggregate(read_records(rp_records), rp_best);
        std::ostringstream csv;
        write_cells_csv(csv, cells);
        write_text(out_path(g, "cells.csv"), csv.str());
        std::cout << '\n' << csv.str();
        if (!rp_diff.empty()) {
          const auto other = aggregate(read_records(rp_diff), rp_best);
          std::ostringstream d;
          write_diff_csv(d, difference_table(cells, other));
          write_text(out_path(g, "diff.csv"), d.str());
          std::cout << '\n' << d.str();
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
