// End-to-end acceptance checks. Each check prints exactly one PASS/FAIL line;
// the exit code is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fincache/baselines.hpp"
#include "fincache/central_solver.hpp"
#include "fincache/experiment.hpp"
#include "fincache/fairness.hpp"
#include "fincache/fin.hpp"
#include "fincache/oracle.hpp"
#include "fincache/overhead.hpp"

using namespace fincache;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail = "") {
  printf("criterion %2d: %s  %s%s%s\n", id, ok ? "PASS" : "FAIL", what.c_str(),
         detail.empty() ? "" : " — ", detail.c_str());
  fflush(stdout);
  if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

GameInstance random_game(int n, int K, uint64_t seed, double p, int radius = 2) {
  Topology t = gen_er(n, p, seed);
  auto pop = weibull_popularity(K, 0.7, 5.0);
  DemandMatrix dm = build_demand(t, pop, 10.0, 0.3, seed + 1);
  std::mt19937_64 rng(seed + 2);
  std::vector<double> caps(n);
  for (int i = 0; i < n; ++i) caps[i] = 1.0 + static_cast<double>(rng() % 2);
  return make_game(std::move(t), std::move(dm), Catalog::uniform(K, 1.0), std::move(caps),
                   std::vector<int>(n, radius));
}

// 1. The two-node worked example reproduces the motivating arithmetic:
// selfish greedy expectation 12, aggregate-maximal 16 with a one-sided split,
// and the bargaining solution a fair 7 + 7 = 14.
void criterion1() {
  auto t0 = Clock::now();
  GameInstance g = fig1_game(DiscountRule::kUnit);
  double greedy = expected_greedy_total(g, RetrievalMode::kCoverage);
  OracleResult agg = brute_force_total(g, 1.0, RetrievalMode::kCoverage);

  GameInstance gm = fig1_game(DiscountRule::kInverseHop);
  OracleResult nbs = brute_force_nbs(gm, 1.0, RetrievalMode::kCoverage);
  // evaluate the bargaining placement in the satisfied-demand arithmetic
  OracleResult fair = evaluate_placement(g, nbs.strategy, RetrievalMode::kCoverage);
  bool split_fair = std::abs(fair.utilities[0] - fair.utilities[1]) < 1e-9;

  std::ostringstream d;
  d << "greedy " << greedy << ", max " << agg.total_utility << ", nbs " << fair.total_utility
    << ", " << seconds_since(t0) << "s";
  bool ok = std::abs(greedy - 12.0) < 1e-9 && std::abs(agg.total_utility - 16.0) < 1e-9 &&
            std::abs(fair.total_utility - 14.0) < 1e-9 && split_fair && seconds_since(t0) < 1.0;
  report(1, ok, "worked example arithmetic (12 / 16 / 14, fair split)", d.str());
}

// 2. Distributed solver closes the gap to the central objective on random
// instances within 1e-2, all 20 instances inside a 2 minute budget.
void criterion2() {
  auto t0 = Clock::now();
  std::mt19937_64 rng(99);
  double worst = 0.0;
  int solved = 0;
  for (int trial = 0; trial < 20; ++trial) {
    int n = 4 + static_cast<int>(rng() % 7);   // up to 10 nodes
    int K = 6 + static_cast<int>(rng() % 15);  // up to 20 objects
    GameInstance g = random_game(n, K, 1000 + trial, 0.5);
    SolveReport central = solve_central(g);
    if (!central.converged) continue;
    FinResult fin = run_fin(g);
    worst = std::max(worst, std::abs(central.objective - fin.primal_objective));
    ++solved;
  }
  double el = seconds_since(t0);
  std::ostringstream d;
  d << solved << "/20 solved, worst gap " << worst << ", " << el << "s";
  report(2, solved >= 15 && worst <= 1e-2 && el < 120.0,
         "distributed vs central objective gap <= 1e-2", d.str());
}

// 3. Converged central solves certify their optimum with KKT residual <= 1e-5.
void criterion3() {
  double worst = 0.0;
  int converged = 0;
  for (uint64_t seed : {1u, 3u, 5u, 8u, 13u, 21u}) {
    GameInstance g = random_game(3 + static_cast<int>(seed % 4), 4 + static_cast<int>(seed % 5),
                                 seed, 0.7);
    SolveReport rep = solve_central(g, 1e-6);
    if (!rep.converged) continue;
    ++converged;
    worst = std::max(worst, rep.kkt.max_residual());
  }
  GameInstance fig = fig1_game();
  SolveReport figrep = solve_central(fig, 1e-6);
  if (figrep.converged) {
    ++converged;
    worst = std::max(worst, figrep.kkt.max_residual());
  }
  std::ostringstream d;
  d << converged << " converged solves, worst residual " << worst;
  report(3, converged >= 5 && worst <= 1e-5, "KKT residual <= 1e-5 at convergence", d.str());
}

// 4. On instances small enough for exhaustive search, the solver matches the
// 0.25-grid oracle up to the discretization slack.
void criterion4() {
  double worst = 0.0;
  int checked = 0;
  for (uint64_t seed = 40; seed < 52; ++seed) {
    int n = 1 + static_cast<int>(seed % 2);
    int K = 2 + static_cast<int>(seed % 2);
    GameInstance g = random_game(n, K, seed, 1.0);
    SolveReport rep = solve_central(g, 1e-6);
    if (!rep.converged) continue;
    OracleResult oracle = brute_force_nbs(g, 0.25);
    if (oracle.log_objective == -std::numeric_limits<double>::infinity()) continue;
    ++checked;
    // relaxation dominates the grid; the reverse gap is the discretization slack
    double below = oracle.log_objective - rep.objective;
    double above = rep.objective - oracle.log_objective;
    worst = std::max(worst, std::max(below, above));
  }
  std::ostringstream d;
  d << checked << " instances, worst deviation " << worst;
  report(4, checked >= 6 && worst <= 1e-3, "exhaustive-oracle equivalence on tiny instances",
         d.str());
}

// 5. Message accounting is exact: traced counts equal the closed-form
// per-iteration overhead, and the system total equals the per-node sum.
void criterion5() {
  bool ok = true;
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100 && ok; ++trial) {
    int n = 5 + static_cast<int>(rng() % 20);
    double p = 0.1 + 0.4 * (rng() % 100) / 100.0;
    int radius = 1 + static_cast<int>(rng() % 3);
    Topology t = gen_er(n, p, 5000 + trial);
    DistanceMatrix d = shortest_paths(t);
    auto nb = neighborhoods(t, d, std::vector<int>(n, radius));
    OverheadParams op{1.0, 5};
    double phi = system_overhead(op, nb);
    double sum = 0.0;
    for (const auto& x : nb) sum += node_overhead(op, x.members.size(), x.co_members.size());
    if (phi != sum) ok = false;
  }
  double worst_msg = 0.0;
  for (uint64_t seed : {11u, 22u}) {
    GameInstance g = random_game(7, 5, seed, 0.5);
    FinResult fin = run_fin(g, StepSchedule::kDiminishing, 1.0, 60);
    OverheadParams op{1.0, g.objects()};
    double per_iter = system_overhead(op, g.nbhd);
    double expect = per_iter * fin.dual.iteration;
    worst_msg = std::max(worst_msg, std::abs(expect - static_cast<double>(fin.total_messages)));
    for (const auto& r : fin.trace.rows)
      worst_msg = std::max(worst_msg, std::abs(per_iter - static_cast<double>(r.messages)));
  }
  std::ostringstream d;
  d << "per-node sum exact on 100 graphs, trace deviation " << worst_msg;
  report(5, ok && worst_msg == 0.0, "message counts equal the overhead formula exactly", d.str());
}

// 6. Growth-law analytics: tree approximation within 15% of BFS ring sizes on
// sparse ER up to r = 2, closed forms exact, Poisson moments within 1% of MC.
void criterion6() {
  bool rings_ok = true;
  double worst_rel = 0.0;
  for (double z : {3.0, 4.0, 6.0}) {
    Topology t = gen_er(2000, z / 1999.0, 321 + static_cast<uint64_t>(z));
    DistanceMatrix d = shortest_paths(t);
    DegreeStats s = degree_stats(t, d, 2);
    for (int r = 1; r <= 2; ++r) {
      double rel = std::abs(analytic_zr(s, r) - s.z_ring[r]) / s.z_ring[r];
      worst_rel = std::max(worst_rel, rel);
      if (rel > 0.15) rings_ok = false;
    }
  }
  OverheadParams p{1.0, 1};
  bool closed_ok = std::abs(er_overhead(p, 2.0, 10, 3).phi - 2.0 * 10 * (2 + 4 + 8)) < 1e-9 &&
                   std::abs(er_overhead(p, 1.0, 10, 3).phi - 2.0 * 10 * 3) < 1e-9;

  // Poisson moment vs Monte Carlo
  std::mt19937_64 rng(2024);
  std::poisson_distribution<long> pois(4.0);
  double m1 = 0.0, m2 = 0.0;
  const int N = 1000000;
  for (int t = 0; t < N; ++t) {
    double k = static_cast<double>(pois(rng));
    m1 += k;
    m2 += k * k;
  }
  m1 /= N;
  m2 /= N;
  bool mc_ok = std::abs(m1 - poisson_moment(4.0, 1)) / poisson_moment(4.0, 1) < 0.01 &&
               std::abs(m2 - poisson_moment(4.0, 2)) / poisson_moment(4.0, 2) < 0.01;
  std::ostringstream d;
  d << "worst ring deviation " << worst_rel << ", MC moments " << m1 << "/" << m2;
  report(6, rings_ok && closed_ok && mc_ok, "growth-law analytics vs BFS and Monte Carlo",
         d.str());
}

// 7. Dual trace sanity: the running best bound is non-increasing and the
// coupling subgradient stays in [-1, 1].
void criterion7() {
  bool ok = true;
  for (uint64_t seed : {2u, 6u, 10u}) {
    GameInstance g = random_game(6, 6, seed, 0.5);
    FinResult fin = run_fin(g, StepSchedule::kDiminishing, 1.0, 150);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : fin.trace.rows) {
      double next = std::min(best, r.dual);
      if (next > best + 1e-12) ok = false;
      best = next;
      if (std::abs(r.max_h) > 1.0 + 1e-9) ok = false;
    }
    if (std::abs(fin.dual.best_dual - best) > 1e-12) ok = false;
  }
  report(7, ok, "best dual bound monotone, |h| <= 1 throughout");
}

// 8. Fairness: the solver optimum passes the sampled proportional-fairness
// test, the bargaining argmax is scale invariant, and every participant is
// individually rational.
void criterion8() {
  GameInstance g = fig1_game();
  SolveReport rep = solve_central(g);
  PfResult pf = rep.converged ? check_pf(g, rep.strategy, 500, 17, &rep.participants) : PfResult{};
  bool pf_ok = rep.converged && pf.holds;

  OracleResult base = brute_force_nbs(g, 0.5);
  GameInstance scaled = fig1_game();
  for (int k = 0; k < 4; ++k) scaled.demand.at(0, k) *= 2.5;
  scaled.u0 = disagreement_point(scaled);
  OracleResult sc = brute_force_nbs(scaled, 0.5);
  bool scale_ok = true;
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 4; ++k)
      if (std::abs(sc.strategy.xv(i, k) - base.strategy.xv(i, k)) > 1e-9) scale_ok = false;

  bool rational = true;
  for (uint64_t seed : {4u, 9u}) {
    GameInstance rg = random_game(5, 5, seed, 0.6);
    SolveReport rr = solve_central(rg);
    for (int i = 0; i < rg.nodes(); ++i) {
      double u = utility(rg, rr.strategy, i);
      if (rr.participants[i] ? u <= rg.u0[i] : u < rg.u0[i] - 1e-9) rational = false;
    }
  }
  std::ostringstream d;
  d << "pf worst sum " << pf.worst_perturbation_sum;
  report(8, pf_ok && scale_ok && rational,
         "proportional fairness, scale invariance, individual rationality", d.str());
}

// 9. At experiment scale the collaborative solver beats the baselines on mean
// hitrate (FIN >= NS4 >= NS1 >= LRU) and footprint reduction (FIN >= NS4).
void criterion9() {
  auto t0 = Clock::now();
  struct Acc {
    double fin_bhr = 0, ns4_bhr = 0, ns1_bhr = 0, lru_bhr = 0, fin_fpr = 0, ns4_fpr = 0;
  };
  bool order_ok = true;
  std::ostringstream d;
  for (const std::string& topo : {std::string("ba"), std::string("er")}) {
    Acc acc;
    const int seeds = 10;
    for (int seed = 1; seed <= seeds; ++seed) {
      Topology t = topo == "ba" ? gen_ba(100, 2, seed) : gen_er(100, 4.0 / 99.0, seed);
      auto pop = weibull_popularity(500, 0.513, 40.0);
      DemandMatrix dm = build_demand(t, pop, 100.0, 0.2, seed);
      GameInstance g = make_game(std::move(t), std::move(dm), Catalog::uniform(500, 8.4),
                                 std::vector<double>(100, 4.0), std::vector<int>(100, 2));

      FinResult fin = run_fin(g, StepSchedule::kDiminishing, 1.0, 25);
      CachingStrategy fs_cov = fin.strategy;
      fill_greedy_retrieval(g, fs_cov, RetrievalMode::kCoverage);
      acc.fin_bhr += byte_hitrate(g, fs_cov);
      acc.fin_fpr += footprint_reduction(g, fs_cov);

      CachingStrategy ns4 = run_ns(g, 4);
      acc.ns4_bhr += byte_hitrate(g, ns4);
      acc.ns4_fpr += footprint_reduction(g, ns4);
      CachingStrategy ns1 = run_ns(g, 1);
      acc.ns1_bhr += byte_hitrate(g, ns1);

      RequestStream stream = RequestStream::draw(g.demand, 20000, seed);
      acc.lru_bhr += run_lru(g.catalog, stream, 100, 4.0 * 8.4).metrics.bhr;
    }
    acc.fin_bhr /= seeds;
    acc.ns4_bhr /= seeds;
    acc.ns1_bhr /= seeds;
    acc.lru_bhr /= seeds;
    acc.fin_fpr /= seeds;
    acc.ns4_fpr /= seeds;
    if (!(acc.fin_bhr >= acc.ns4_bhr && acc.ns4_bhr >= acc.ns1_bhr && acc.ns1_bhr >= acc.lru_bhr &&
          acc.fin_fpr >= acc.ns4_fpr))
      order_ok = false;
    d << topo << " bhr fin/ns4/ns1/lru " << acc.fin_bhr << "/" << acc.ns4_bhr << "/"
      << acc.ns1_bhr << "/" << acc.lru_bhr << " fpr fin/ns4 " << acc.fin_fpr << "/" << acc.ns4_fpr
      << "; ";
  }
  double el = seconds_since(t0);
  d << el << "s";
  report(9, order_ok && el < 600.0, "experiment-scale baseline ordering", d.str());
}

// 10. A full pipeline run is byte-for-byte reproducible for a fixed config.
void criterion10() {
  fs::path dir = fs::temp_directory_path() / "fincache_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  ExperimentConfig cfg;
  std::vector<std::string> errors, warnings;
  cfg = load_config(parse_config("[topology]\ntype = er\nn = 8\nz = 3\n"
                                 "[catalog]\nobjects = 5\nsize_mb = 2\n"
                                 "[game]\ncapacity = 2\nradius = 2\n"
                                 "[solver]\nk_stop = 60\n"
                                 "[baselines]\nlist = lru, ns1\nstream_events = 2000\n"
                                 "[fairness]\npf_trials = 50\n"
                                 "[run]\nseeds = 1, 2\nthreads = 2\n"),
                    errors, warnings);
  bool ok = errors.empty();
  cfg.out_dir = (dir / "a").string();
  RunResult r1 = run_experiment(cfg, true);
  cfg.out_dir = (dir / "b").string();
  RunResult r2 = run_experiment(cfg, true);
  ok = ok && r1.exit_code == 0 && r2.exit_code == 0;
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const auto& name : r1.files) {
    if (!fs::exists(dir / "b" / name) || slurp(dir / "a" / name) != slurp(dir / "b" / name))
      ok = false;
  }
  report(10, ok && !r1.files.empty(), "pipeline output byte-for-byte reproducible",
         std::to_string(r1.files.size()) + " files compared");
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  printf("%s (%d failure%s)\n", failures == 0 ? "ALL PASS" : "FAILURES", failures,
         failures == 1 ? "" : "s");
  return failures;
}
