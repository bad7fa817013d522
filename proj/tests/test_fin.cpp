#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "fincache/central_solver.hpp"
#include "fincache/fin.hpp"
#include "fincache/overhead.hpp"

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

TEST_CASE("step_size") {
  CHECK(step_size(StepSchedule::kDiminishing, 1.0, 4) == doctest::Approx(0.25));
  CHECK(step_size(StepSchedule::kConstant, 0.7, 99) == doctest::Approx(0.7));
  // sum xi_k^2 for the diminishing rule stays below pi^2/6 * xi0^2
  double acc = 0.0;
  for (int k = 1; k <= 100000; ++k) {
    double xi = step_size(StepSchedule::kDiminishing, 2.0, k);
    acc += xi * xi;
  }
  CHECK(acc < 4.0 * M_PI * M_PI / 6.0);
}

TEST_CASE("dual_update") {
  GameInstance g = fig1_game();
  DualState d = DualState::zeros(g, StepSchedule::kConstant, 1.0);
  std::vector<std::vector<double>> h(2);
  for (int i = 0; i < 2; ++i) h[i].assign(d.lambda[i].size(), 0.0);

  d.lambda[0][0] = 0.5;
  h[0][0] = -1.0;  // projection at zero
  h[0][1] = 0.02;
  dual_update(d, h, 1.0);
  CHECK(d.lambda[0][0] == 0.0);
  CHECK(d.lambda[0][1] == doctest::Approx(0.02));

  // h = 0 is a fixed point
  DualState fix = d;
  std::vector<std::vector<double>> zero_h(2);
  for (int i = 0; i < 2; ++i) zero_h[i].assign(d.lambda[i].size(), 0.0);
  dual_update(fix, zero_h, 5.0);
  CHECK(fix.lambda[0] == d.lambda[0]);
  CHECK(fix.lambda[1] == d.lambda[1]);
}

TEST_CASE("local_subproblem at lambda = 0 recovers greedy retrieval") {
  GameInstance g = fig1_game();
  const int K = g.objects();
  std::vector<double> lambda(g.sources(0).size() * K, 0.0);
  std::vector<double> income(K, 0.0);
  std::vector<double> x(K, 0.0), y(g.sources(0).size() * K, 0.0);
  local_subproblem(g, 0, lambda, income, x, y, 2000, 1e-12);
  // free retrieval: fill the cache and pull everything the neighbor could hold
  double cap = 0.0;
  for (double v : x) cap += v;
  CHECK(cap == doctest::Approx(2.0).epsilon(1e-6));
  // all retrieval rows should be pushed to their budget (discounted but free)
  for (int k = 0; k < K; ++k) CHECK(y[k] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("large lambda kills a retrieval triple") {
  GameInstance g = fig1_game();
  const int K = g.objects();
  std::vector<double> lambda(g.sources(0).size() * K, 0.0);
  lambda[2] = 100.0;  // object C from the only source
  std::vector<double> income(K, 0.0);
  std::vector<double> x(K, 0.0), y(g.sources(0).size() * K, 0.0);
  local_subproblem(g, 0, lambda, income, x, y, 2000, 1e-12);
  CHECK(y[2] <= 1e-6);
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("worked example: duality gap within tolerance") {
  GameInstance g = fig1_game();
  FinResult fin = run_fin(g);
  SolveReport central = solve_central(g);
  REQUIRE(central.converged);
  CHECK(std::abs(central.objective - fin.primal_objective) <= 1e-2);
  CHECK(fin.dual.best_dual >= fin.primal_objective - 1e-9);
  CHECK(validate(g, fin.strategy).empty());
}

TEST_CASE("message counting on the triangle") {
  // K3, radius 1, |O| = 4, c = 1: per iteration every node exchanges with its
  // 2 neighbors in both roles: 3 nodes * 2 neighbors * 2 directions * 4 = 48
  Topology t = Topology::from_edges(3, {{0, 1}, {0, 2}, {1, 2}});
  DemandMatrix dm = DemandMatrix::zeros(3, 4);
  const double row[4] = {3, 2, 2, 1};
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 4; ++k) dm.at(i, k) = row[k];
  GameInstance g = make_game(std::move(t), std::move(dm), Catalog::uniform(4, 1.0), {2, 2, 2},
                             {1, 1, 1});
  FinResult fin = run_fin(g, StepSchedule::kDiminishing, 1.0, 60);
  CHECK(fin.total_messages == 48ll * fin.dual.iteration);
  for (const auto& r : fin.trace.rows) CHECK(r.messages == 48);

  GameInstance fig = fig1_game();
  FinResult ff = run_fin(fig, StepSchedule::kDiminishing, 1.0, 60);
  CHECK(ff.total_messages == 16ll * ff.dual.iteration);
}

TEST_CASE("per-iteration messages equal the overhead formula") {
  for (uint64_t seed : {1u, 2u, 3u}) {
    GameInstance g = random_game(6, 5, seed);
    FinResult fin = run_fin(g, StepSchedule::kDiminishing, 1.0, 55);
    OverheadParams p{1.0, g.objects()};
    double phi = system_overhead(p, g.nbhd);
    REQUIRE(!fin.trace.rows.empty());
    CHECK(static_cast<double>(fin.trace.rows[0].messages) == doctest::Approx(phi));
  }
}

TEST_CASE("best dual bound is monotone and dominates the primal") {
  GameInstance g = random_game(5, 5, 17);
  FinResult fin = run_fin(g, StepSchedule::kDiminishing, 1.0, 120);
  double prev = std::numeric_limits<double>::infinity();
  double best_primal = -std::numeric_limits<double>::infinity();
  for (const auto& r : fin.trace.rows) {
    best_primal = std::max(best_primal, r.primal);
    CHECK(r.dual >= best_primal - 1e-6);  // weak duality per iterate
    double best_now = std::min(prev, r.dual);
    CHECK(best_now <= prev + 1e-12);  // running bound non-increasing
    prev = best_now;
    CHECK(std::abs(r.max_h) <= 1.0 + 1e-9);
  }
  CHECK(fin.dual.best_dual == doctest::Approx(prev));
}

TEST_CASE("dual function is concave in the max form (subgradient validity)") {
  GameInstance g = fig1_game();
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<> u(0.0, 1.5);
  for (int trial = 0; trial < 5; ++trial) {
    DualState d1 = DualState::zeros(g, StepSchedule::kConstant, 1.0);
    DualState d2 = d1;
    for (int i = 0; i < 2; ++i)
      for (size_t t = 0; t < d1.lambda[i].size(); ++t) {
        d1.lambda[i][t] = u(rng);
        d2.lambda[i][t] = u(rng);
      }
    std::vector<std::vector<double>> h;
    double v1 = dual_value(g, d1, &h);
    double v2 = dual_value(g, d2);
    // min-form d is concave: d(l2) <= d(l1) + h^T (l2 - l1); the reported
    // value is -d, so flip
    double lin = 0.0;
    for (int i = 0; i < 2; ++i)
      for (size_t t = 0; t < h[i].size(); ++t)
        lin += h[i][t] * (d2.lambda[i][t] - d1.lambda[i][t]);
    CHECK(-v2 <= -v1 + lin + 1e-6);
  }
}

TEST_CASE("random instances close the gap against the central solver") {
  for (uint64_t seed : {5u, 9u, 13u}) {
    GameInstance g = random_game(6, 6, seed);
    SolveReport central = solve_central(g);
    if (!central.converged) continue;
    FinResult fin = run_fin(g);
    CHECK(std::abs(central.objective - fin.primal_objective) <= 1e-2);
  }
}

TEST_CASE("deterministic across runs") {
  GameInstance g = random_game(5, 5, 23);
  FinResult a = run_fin(g, StepSchedule::kDiminishing, 1.0, 80);
  FinResult b = run_fin(g, StepSchedule::kDiminishing, 1.0, 80);
  CHECK(a.trace.to_csv() == b.trace.to_csv());
  CHECK(a.strategy.x == b.strategy.x);
  CHECK(a.total_messages == b.total_messages);
}
