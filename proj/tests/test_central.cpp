#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fincache/central_solver.hpp"
#include "fincache/oracle.hpp"

using namespace fincache;

namespace {

GameInstance random_game(int n, int K, uint64_t seed, double p = 0.6) {
  Topology t = gen_er(n, p, seed);
  auto pop = weibull_popularity(K, 0.7, 5.0);
  DemandMatrix dm = build_demand(t, pop, 10.0, 0.3, seed + 1);
  std::mt19937_64 rng(seed + 2);
  std::vector<double> caps(n);
  for (int i = 0; i < n; ++i) caps[i] = 1.0 + static_cast<double>(rng() % 2);
  return make_game(std::move(t), std::move(dm), Catalog::uniform(K, 1.0), std::move(caps),
                   std::vector<int>(n, 2));
}

}  // namespace

TEST_CASE("isolated nodes are pinned, not solved") {
  Topology t = Topology::from_edges(3, {{0, 1}});
  DemandMatrix dm = DemandMatrix::zeros(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) dm.at(i, k) = 3.0 - k;
  GameInstance g = make_game(std::move(t), std::move(dm), Catalog::uniform(3, 1.0), {1, 1, 1},
                             {1, 1, 1});
  SolveReport rep = solve_central(g);
  CHECK_FALSE(rep.participants[2]);
  // pinned node keeps its greedy local placement
  CHECK(rep.strategy.xv(2, 0) == doctest::Approx(1.0));
  CHECK(utility(g, rep.strategy, 2) == doctest::Approx(g.u0[2]));
}

TEST_CASE("worked example: relaxed optimum dominates the fair integer split") {
  GameInstance g = fig1_game();
  SolveReport rep = solve_central(g);
  CHECK(rep.converged);
  CHECK(rep.objective >= 2 * std::log(2.0) - 1e-9);
  CHECK(rep.kkt.max_residual() <= 1e-5);
  CHECK(validate(g, rep.strategy).empty());
}

TEST_CASE("relaxed solution dominates the grid oracle on small instances") {
  for (uint64_t seed : {3u, 7u, 21u}) {
    GameInstance g = random_game(2, 3, seed, 1.0);
    SolveReport rep = solve_central(g);
    CHECK(rep.converged);
    OracleResult oracle = brute_force_nbs(g, 0.25);
    if (oracle.log_objective > -std::numeric_limits<double>::infinity())
      CHECK(rep.objective >= oracle.log_objective - 1e-9);
  }
}

TEST_CASE("kkt_check behavior") {
  GameInstance g = fig1_game();
  SolveReport rep = solve_central(g, 1e-6);
  REQUIRE(rep.converged);
  CHECK(rep.kkt.stationarity_residual <= 1e-6);
  CHECK(rep.kkt.slackness_residual <= 1e-6);

  // zero multipliers at an interior-gradient point cannot be stationary
  CachingStrategy s0 = initial_strategy(g);
  KKTMultipliers zero;
  const int n = g.nodes(), K = g.objects();
  zero.alpha.assign(n, 0.0);
  zero.beta.assign(static_cast<size_t>(n) * K, 0.0);
  zero.gamma.assign(static_cast<size_t>(n) * K, 0.0);
  zero.mu.assign(static_cast<size_t>(n) * K, 0.0);
  zero.lambda.resize(n);
  zero.delta.resize(n);
  for (int i = 0; i < n; ++i) {
    zero.lambda[i].assign(g.sources(i).size() * static_cast<size_t>(K), 0.0);
    zero.delta[i].assign(g.sources(i).size() * static_cast<size_t>(K), 0.0);
  }
  auto part = participants(g);
  KKTReport kz = kkt_check(g, s0, zero, part);
  double worst_margin = 0.0;
  for (int i = 0; i < n; ++i) worst_margin = std::max(worst_margin, utility(g, s0, i) - g.u0[i]);
  CHECK(kz.stationarity_residual >= 1.0 / worst_margin - 1e-9);  // w_min = 1

  // inflating a coupling multiplier with slack shows up in slackness
  KKTMultipliers m = rep.kkt.m;
  int pi = -1, pa = -1, pk = -1;
  double gap = 0.0;
  for (int i = 0; i < n && pi < 0; ++i) {
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size() && pi < 0; ++a)
      for (int k = 0; k < K; ++k) {
        double d = rep.strategy.xv(src[a], k) - rep.strategy.yv(i, static_cast<int>(a), k);
        if (d > 0.1) {
          pi = i;
          pa = static_cast<int>(a);
          pk = k;
          gap = d;
          break;
        }
      }
  }
  if (pi >= 0) {
    m.lambda[pi][static_cast<size_t>(pa) * K + pk] += 0.1;
    KKTReport kp = kkt_check(g, rep.strategy, m, rep.participants);
    CHECK(kp.slackness_residual >= 0.1 * gap - 1e-9);
  }
}

TEST_CASE("gradient matches finite differences") {
  GameInstance g = random_game(4, 4, 5);
  auto part = participants(g);
  CachingStrategy s0 = initial_strategy(g, 0.1);
  detail::StrategyVec f = detail::StrategyVec::from(s0);
  double base = detail::central_objective(g, f, part, 0.0);
  REQUIRE(std::isfinite(base));
  detail::StrategyVec grad = f;
  detail::central_gradient(g, f, part, grad);
  std::mt19937 rng(1);
  const double h = 1e-6;
  for (int probe = 0; probe < 10; ++probe) {
    size_t t = rng() % f.v.size();
    detail::StrategyVec fp = f;
    fp.v[t] += h;
    double fd = (detail::central_objective(g, fp, part, 0.0) - base) / h;
    if (std::abs(fd) < 1e-12 && std::abs(grad.v[t]) < 1e-12) continue;
    CHECK(fd == doctest::Approx(grad.v[t]).epsilon(1e-4));
  }
}

TEST_CASE("objective is concave along segments") {
  GameInstance g = random_game(5, 4, 9);
  auto part = participants(g);
  detail::StrategyVec a = detail::StrategyVec::from(initial_strategy(g, 0.0));
  detail::StrategyVec b = detail::StrategyVec::from(initial_strategy(g, 0.3));
  detail::StrategyVec mid = a;
  for (size_t t = 0; t < a.v.size(); ++t) mid.v[t] = 0.5 * (a.v[t] + b.v[t]);
  double fa = detail::central_objective(g, a, part, 0.0);
  double fb = detail::central_objective(g, b, part, 0.0);
  double fm = detail::central_objective(g, mid, part, 0.0);
  if (std::isfinite(fa) && std::isfinite(fb)) CHECK(fm >= 0.5 * (fa + fb) - 1e-9);
}

TEST_CASE("oracle equivalence on exhaustive tiny instances") {
  for (uint64_t seed : {11u, 12u, 13u, 14u}) {
    GameInstance g = random_game(2, 3, seed, 1.0);
    SolveReport rep = solve_central(g, 1e-6);
    REQUIRE(rep.converged);
    OracleResult oracle = brute_force_nbs(g, 0.25);
    if (oracle.log_objective == -std::numeric_limits<double>::infinity()) continue;
    // relaxed optimum dominates any grid point, and on these instances the
    // grid is fine enough that the discretization gap is negligible
    CHECK(rep.objective >= oracle.log_objective - 1e-9);
    CHECK(rep.objective <= oracle.log_objective + 1e-3);
  }
}

TEST_CASE("individual rationality at the optimum") {
  for (uint64_t seed : {2u, 4u, 6u}) {
    GameInstance g = random_game(5, 5, seed);
    SolveReport rep = solve_central(g);
    for (int i = 0; i < g.nodes(); ++i) {
      double u = utility(g, rep.strategy, i);
      if (rep.participants[i])
        CHECK(u > g.u0[i]);
      else
        CHECK(u >= g.u0[i] - 1e-9);
    }
    CHECK(validate(g, rep.strategy).empty());
  }
}

TEST_CASE("objective history is monotone non-decreasing") {
  GameInstance g = random_game(5, 4, 31);
  SolveReport rep = solve_central(g);
  for (size_t t = 1; t < rep.objective_history.size(); ++t)
    CHECK(rep.objective_history[t] >= rep.objective_history[t - 1] - 1e-12);
}
