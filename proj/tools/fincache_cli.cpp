// Config-driven experiment runner for the fair in-network caching library.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "CLI11.hpp"
#include "fincache/experiment.hpp"

using namespace fincache;

namespace {

struct CliState {
  std::string config_path;
  long long seed_override = -1;
  std::string out_dir;
  int threads = 0;
  bool quiet = false;
};

int load_cfg(const CliState& st, ExperimentConfig& cfg, bool need_config = true) {
  if (st.config_path.empty()) {
    if (!need_config) return 0;
    fprintf(stderr, "error: --config is required\n");
    return 1;
  }
  std::ifstream in(st.config_path);
  if (!in) {
    fprintf(stderr, "error: cannot open config %s\n", st.config_path.c_str());
    return 1;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  std::vector<std::string> errors, warnings;
  try {
    cfg = load_config(parse_config(ss.str()), errors, warnings);
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  for (const auto& e : errors) fprintf(stderr, "error: %s\n", e.c_str());
  if (!st.quiet)
    for (const auto& w : warnings) fprintf(stderr, "warning: %s\n", w.c_str());
  if (!errors.empty()) return 1;
  if (st.seed_override >= 0) cfg.seeds = {static_cast<uint64_t>(st.seed_override)};
  if (!st.out_dir.empty()) cfg.out_dir = st.out_dir;
  if (st.threads > 0) cfg.threads = st.threads;
  return 0;
}

void write_text(const std::string& dir, const std::string& name, const std::string& text) {
  std::filesystem::create_directories(dir);
  std::ofstream f(std::filesystem::path(dir) / name, std::ios::binary);
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fair collaborative in-network caching simulator"};
  app.require_subcommand(1);
  CliState st;
  app.add_option("--config", st.config_path, "experiment config file");
  app.add_option("--seed", st.seed_override, "override the seed list with a single seed");
  app.add_option("--out", st.out_dir, "output directory override");
  app.add_option("--threads", st.threads, "worker threads for seed fan-out");
  app.add_flag("--quiet", st.quiet, "suppress warnings and progress");

  auto* gen = app.add_subcommand("gen-topology", "generate a graph and print its edge list");
  std::string gen_type = "er";
  int gen_n = 100, gen_m = 2;
  double gen_p = -1, gen_z = -1;
  long long gen_seed = 1;
  gen->add_option("--type", gen_type, "er or ba");
  gen->add_option("--n", gen_n, "node count");
  gen->add_option("--p", gen_p, "ER edge probability");
  gen->add_option("--z", gen_z, "ER mean degree (alternative to --p)");
  gen->add_option("--m", gen_m, "BA attachment count");
  gen->add_option("--gen-seed", gen_seed, "generator seed");

  auto* sc = app.add_subcommand("solve-central", "run the central solver");
  auto* sf = app.add_subcommand("solve-fin", "run the distributed solver");
  auto* bl = app.add_subcommand("baseline", "run a baseline");
  std::string which_baseline = "lru";
  bl->add_option("--which", which_baseline, "lru, ns1 or ns4");
  auto* ov = app.add_subcommand("overhead", "emit the growth-law table");
  auto* fa = app.add_subcommand("fairness", "fairness checks on the central solution");
  auto* rn = app.add_subcommand("run", "full pipeline over all seeds");
  auto* va = app.add_subcommand("validate", "validate the config and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      Topology t;
      if (gen_type == "ba") {
        t = gen_ba(gen_n, gen_m, static_cast<uint64_t>(gen_seed));
      } else if (gen_type == "er") {
        double p = gen_p >= 0 ? gen_p : (gen_n > 1 ? gen_z / (gen_n - 1) : 0.0);
        if (p < 0 || p > 1) {
          fprintf(stderr, "error: --p or --z must give a probability in [0,1]\n");
          return 1;
        }
        t = gen_er(gen_n, p, static_cast<uint64_t>(gen_seed));
      } else {
        fprintf(stderr, "error: --type must be er or ba\n");
        return 1;
      }
      std::ostringstream out;
      out << "# nodes " << t.node_count << "\n";
      for (const auto& e : t.edges) out << e.first << " " << e.second << "\n";
      if (!st.out_dir.empty())
        write_text(st.out_dir, "topology.txt", out.str());
      else
        fputs(out.str().c_str(), stdout);
      return 0;
    }

    ExperimentConfig cfg;
    if (int rc = load_cfg(st, cfg); rc != 0) return rc;
    if (va->parsed()) {
      if (!st.quiet) printf("ok\n");
      return 0;
    }
    uint64_t seed = cfg.seeds.front();

    if (rn->parsed()) {
      RunResult rr = run_experiment(cfg, st.quiet);
      return rr.exit_code;
    }

    BuiltInstance b = build_instance(cfg, seed);
    const GameInstance& g = b.game;
    if (!st.quiet)
      for (const auto& w : b.warnings) fprintf(stderr, "warning: %s\n", w.c_str());

    if (sc->parsed()) {
      SolveReport rep = solve_central(g, cfg.central_tol, cfg.central_max_iter);
      if (!st.quiet)
        printf("objective %.9f iterations %d stationarity %.3g slackness %.3g\n", rep.objective,
               rep.iterations, rep.kkt.stationarity_residual, rep.kkt.slackness_residual);
      if (!st.out_dir.empty() || !cfg.out_dir.empty()) {
        std::string dir = st.out_dir.empty() ? cfg.out_dir : st.out_dir;
        write_text(dir, "central_strategy.csv", strategy_to_csv(g, rep.strategy));
      }
      return rep.converged ? 0 : 2;
    }
    if (sf->parsed()) {
      StepSchedule sched =
          cfg.schedule == "constant"      ? StepSchedule::kConstant
          : cfg.schedule == "diminishing" ? StepSchedule::kDiminishing
                                          : StepSchedule::kPolyak;
      FinResult fin = run_fin(g, sched, cfg.xi0, cfg.k_stop, cfg.fin_tol,
                              static_cast<int>(cfg.message_c));
      if (!st.quiet)
        printf("primal %.9f best_dual %.9f iterations %d messages %lld\n", fin.primal_objective,
               fin.dual.best_dual, fin.dual.iteration,
               static_cast<long long>(fin.total_messages));
      std::string dir = st.out_dir.empty() ? cfg.out_dir : st.out_dir;
      write_text(dir, "fin_trace.csv", fin.trace.to_csv());
      write_text(dir, "fin_strategy.csv", strategy_to_csv(g, fin.strategy));
      return 0;
    }
    if (bl->parsed()) {
      MetricsReport m;
      if (which_baseline == "lru") {
        double cache_mb = cfg.lru_cache_mb > 0 ? cfg.lru_cache_mb : cfg.capacity * cfg.size_mb;
        RequestStream stream = RequestStream::draw(g.demand, cfg.stream_events, seed);
        m = run_lru(g.catalog, stream, g.nodes(), cache_mb).metrics;
      } else if (which_baseline == "ns1" || which_baseline == "ns4") {
        m = strategy_metrics(g, run_ns(g, which_baseline == "ns4" ? 4 : 1));
      } else {
        fprintf(stderr, "error: --which must be lru, ns1 or ns4\n");
        return 1;
      }
      printf("bhr %.6f fpr %.6f overlap %.6f\n", m.bhr, m.fpr, m.overlap);
      return 0;
    }
    if (ov->parsed()) {
      OverheadParams op{cfg.message_c, g.objects()};
      std::string csv = growth_law(op, g.topology, g.dist, cfg.r_max).to_csv();
      if (!st.out_dir.empty())
        write_text(st.out_dir, "growth.csv", csv);
      else
        fputs(csv.c_str(), stdout);
      return 0;
    }
    if (fa->parsed()) {
      SolveReport rep = solve_central(g, cfg.central_tol, cfg.central_max_iter);
      std::vector<double> u = utilities(g, rep.strategy);
      FairnessReport fr;
      fr.ef = check_ef(u, g.u0);
      fr.mf = check_mf({u}, g.u0, 0);
      fr.pf = check_pf(g, rep.strategy, cfg.pf_trials, seed, &rep.participants);
      printf("%s\n", fr.to_json().c_str());
      return rep.converged ? 0 : 2;
    }
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
