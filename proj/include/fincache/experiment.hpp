#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fincache/baselines.hpp"
#include "fincache/central_solver.hpp"
#include "fincache/config.hpp"
#include "fincache/fairness.hpp"
#include "fincache/fin.hpp"
#include "fincache/overhead.hpp"

namespace fincache {

struct BuiltInstance {
  GameInstance game;
  std::string topo_label;
  std::vector<std::string> warnings;
};

inline BuiltInstance build_instance(const ExperimentConfig& c, uint64_t seed) {
  BuiltInstance b;
  Topology t;
  if (c.topo_type == "er") {
    double p = c.er_p >= 0 ? c.er_p : (c.nodes > 1 ? c.er_z / (c.nodes - 1) : 0.0);
    t = gen_er(c.nodes, std::min(1.0, p), seed);
    b.topo_label = "er" + std::to_string(c.nodes);
  } else if (c.topo_type == "ba") {
    t = gen_ba(c.nodes, c.ba_m, seed);
    b.topo_label = "ba" + std::to_string(c.nodes);
  } else {
    std::ifstream in(c.edge_list_path);
    std::stringstream ss;
    ss << in.rdbuf();
    t = load_edge_list(ss.str()).topology;
    b.topo_label = std::filesystem::path(c.edge_list_path).stem().string();
  }
  int n = t.node_count;
  std::vector<double> pop = weibull_popularity(c.objects, c.weibull_shape, c.weibull_scale);
  DemandMatrix dm = build_demand(t, pop, c.rate, c.perturb, seed);
  Catalog cat = Catalog::uniform(c.objects, c.size_mb);
  DistanceMatrix d = shortest_paths(t);
  int radius = c.radius;
  int diam = d.diameter();
  if (diam > 0 && radius > diam) {
    b.warnings.push_back("game.radius " + std::to_string(radius) + " exceeds diameter " +
                         std::to_string(diam) + "; clamped");
    radius = diam;
  }
  DiscountRule rule = c.discount == "unit" ? DiscountRule::kUnit : DiscountRule::kInverseHop;
  b.game = make_game(std::move(t), std::move(dm), std::move(cat),
                     std::vector<double>(n, c.capacity), std::vector<int>(n, radius), rule,
                     c.eps0);
  return b;
}

// Coverage-accounting metrics for a placement: retrieval rebuilt greedily
// with the satisfied-demand budget before measuring.
inline MetricsReport strategy_metrics(const GameInstance& g, const CachingStrategy& s) {
  CachingStrategy cov = s;
  fill_greedy_retrieval(g, cov, RetrievalMode::kCoverage);
  MetricsReport m;
  m.bhr = byte_hitrate(g, cov);
  m.fpr = footprint_reduction(g, cov);
  m.overlap = g.nodes() >= 2 ? content_overlap(g, cov) : 0.0;
  m.distance_hist = distance_histogram(g, cov);
  return m;
}

struct SeedOutputs {
  uint64_t seed = 0;
  std::vector<std::string> result_rows;  // results.csv lines (no header)
  std::string fin_trace_csv;
  std::string growth_csv;
  std::string fairness_json;
  bool solver_converged = true;
  std::vector<std::string> warnings;
};

inline SeedOutputs run_seed(const ExperimentConfig& c, uint64_t seed) {
  SeedOutputs out;
  out.seed = seed;
  BuiltInstance b = build_instance(c, seed);
  out.warnings = b.warnings;
  const GameInstance& g = b.game;
  double cache_mb = c.lru_cache_mb > 0 ? c.lru_cache_mb : c.capacity * c.size_mb;

  auto add_row = [&](const std::string& algo, const MetricsReport& m, double objective) {
    std::ostringstream row;
    row.precision(12);
    row << b.topo_label << "," << cache_mb << "," << algo << "," << seed << "," << m.bhr << ","
        << m.fpr << "," << m.overlap << "," << objective;
    out.result_rows.push_back(row.str());
  };

  if (c.run_central) {
    SolveReport rep = solve_central(g, c.central_tol, c.central_max_iter);
    if (!rep.converged) out.solver_converged = false;
    add_row("central", strategy_metrics(g, rep.strategy), rep.objective);
    PfResult pf = check_pf(g, rep.strategy, c.pf_trials, seed, &rep.participants);
    std::vector<double> u = utilities(g, rep.strategy);
    FairnessReport fr;
    fr.ef = check_ef(u, g.u0);
    fr.mf = check_mf({u}, g.u0, 0);
    fr.pf = pf;
    out.fairness_json = fr.to_json();
  }
  if (c.run_fin) {
    StepSchedule sched =
        c.schedule == "constant"      ? StepSchedule::kConstant
        : c.schedule == "diminishing" ? StepSchedule::kDiminishing
                                      : StepSchedule::kPolyak;
    FinResult fin = run_fin(g, sched, c.xi0, c.k_stop, c.fin_tol,
                            static_cast<int>(c.message_c));
    add_row("fin", strategy_metrics(g, fin.strategy), fin.primal_objective);
    out.fin_trace_csv = fin.trace.to_csv();
  }
  for (const auto& base : c.baselines) {
    if (base == "lru") {
      RequestStream stream = RequestStream::draw(g.demand, c.stream_events, seed);
      LruResult lru = run_lru(g.catalog, stream, g.nodes(), cache_mb);
      add_row("lru", lru.metrics, 0.0);
    } else {
      int radius = base == "ns4" ? 4 : 1;
      CachingStrategy ns = run_ns(g, radius);
      add_row(base, strategy_metrics(g, ns), 0.0);
    }
  }

  OverheadParams op{c.message_c, g.objects()};
  out.growth_csv = growth_law(op, g.topology, g.dist, c.r_max).to_csv();
  return out;
}

struct RunResult {
  int exit_code = 0;  // 0 ok, 1 validation error, 2 solver non-convergence
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  std::vector<std::string> files;
};

inline RunResult run_experiment(const ExperimentConfig& c, bool quiet = false) {
  RunResult rr;
  namespace fs = std::filesystem;
  fs::create_directories(c.out_dir);

  std::vector<SeedOutputs> outputs(c.seeds.size());
  std::vector<std::string> failures(c.seeds.size());
  {
    std::mutex mu;
    size_t next = 0;
    auto worker = [&] {
      for (;;) {
        size_t idx;
        {
          std::lock_guard<std::mutex> lock(mu);
          if (next >= c.seeds.size()) return;
          idx = next++;
        }
        try {
          outputs[idx] = run_seed(c, c.seeds[idx]);
        } catch (const std::exception& e) {
          failures[idx] = e.what();  // per-seed failure isolation
        }
      }
    };
    int nthreads = std::min<int>(c.threads, static_cast<int>(c.seeds.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }

  auto write_file = [&](const std::string& name, const std::string& content) {
    std::ofstream f(fs::path(c.out_dir) / name, std::ios::binary);
    f << content;
    rr.files.push_back(name);
  };

  std::ostringstream results;
  results << "topology,cache_mb,algorithm,seed,bhr,fpr,overlap,objective\n";
  bool any_nonconverged = false;
  for (size_t idx = 0; idx < c.seeds.size(); ++idx) {
    const SeedOutputs& so = outputs[idx];
    if (!failures[idx].empty()) {
      rr.warnings.push_back("seed " + std::to_string(c.seeds[idx]) + " failed: " + failures[idx]);
      continue;
    }
    for (const auto& row : so.result_rows) results << row << "\n";
    for (const auto& w : so.warnings) rr.warnings.push_back(w);
    std::string tag = std::to_string(c.seeds[idx]);
    if (!so.fin_trace_csv.empty()) write_file("fin_trace_" + tag + ".csv", so.fin_trace_csv);
    if (!so.growth_csv.empty()) write_file("growth_" + tag + ".csv", so.growth_csv);
    if (!so.fairness_json.empty()) write_file("fairness_" + tag + ".json", so.fairness_json);
    if (!so.solver_converged) any_nonconverged = true;
  }
  write_file("results.csv", results.str());

  std::ostringstream manifest;
  manifest << "{\"config_hash\":\"" << std::hex << config_hash(c.raw_text) << std::dec << "\","
           << "\"seeds\":[";
  for (size_t i = 0; i < c.seeds.size(); ++i) manifest << (i ? "," : "") << c.seeds[i];
  manifest << "],\"files\":[";
  for (size_t i = 0; i < rr.files.size(); ++i)
    manifest << (i ? "," : "") << "\"" << rr.files[i] << "\"";
  manifest << "]}";
  write_file("manifest.json", manifest.str());

  if (!quiet)
    for (const auto& w : rr.warnings) fprintf(stderr, "warning: %s\n", w.c_str());
  if (any_nonconverged) rr.exit_code = 2;
  return rr;
}

}  // namespace fincache
