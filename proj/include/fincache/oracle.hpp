#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fincache/game.hpp"

namespace fincache {

struct OracleResult {
  CachingStrategy strategy;
  double nash_product = -std::numeric_limits<double>::infinity();
  double log_objective = -std::numeric_limits<double>::infinity();
  double total_utility = 0.0;
  std::vector<double> utilities;
};

namespace detail {

// Enumerate one node's placement row on the grid (entries in {0, g, .., 1},
// row sum <= capacity), invoking fn for each completed row.
inline void enumerate_rows(int objects, double grid, double capacity, std::vector<double>& row,
                           int k, double used, const std::function<void()>& fn) {
  if (k == objects) {
    fn();
    return;
  }
  int steps = static_cast<int>(std::round(1.0 / grid));
  for (int t = 0; t <= steps; ++t) {
    double v = t * grid;
    if (used + v > capacity + 1e-9) break;
    row[k] = v;
    enumerate_rows(objects, grid, capacity, row, k + 1, used + v, fn);
  }
  row[k] = 0.0;
}

}  // namespace detail

// Evaluates utilities for a placement x with exact greedy retrieval.
inline OracleResult evaluate_placement(const GameInstance& g, const CachingStrategy& x_only,
                                       RetrievalMode mode) {
  OracleResult r;
  r.strategy = x_only;
  fill_greedy_retrieval(g, r.strategy, mode);
  r.utilities = utilities(g, r.strategy);
  r.total_utility = 0.0;
  r.nash_product = 1.0;
  r.log_objective = 0.0;
  for (int i = 0; i < g.nodes(); ++i) {
    r.total_utility += r.utilities[i];
    double margin = r.utilities[i] - g.u0[i];
    r.nash_product *= margin;
    if (margin > 0)
      r.log_objective += std::log(margin);
    else
      r.log_objective = -std::numeric_limits<double>::infinity();
  }
  if (g.nodes() > 1) {
    for (int i = 0; i < g.nodes(); ++i)
      if (r.utilities[i] - g.u0[i] < 0) r.nash_product = -std::numeric_limits<double>::infinity();
  }
  return r;
}

// Exhaustive grid search for the Nash-product maximizer. Per placement, y is
// optimized exactly by the greedy fill. Ties on the product are broken toward
// the larger total local utility, then first-found.
inline OracleResult brute_force_nbs(const GameInstance& g, double grid,
                                    RetrievalMode mode = RetrievalMode::kModel) {
  if (g.nodes() > 3 || g.objects() > 4)
    throw std::invalid_argument("brute_force_nbs: instance too large (|V| <= 3, |O| <= 4)");
  if (grid != 1.0 && grid != 0.5 && grid != 0.25)
    throw std::invalid_argument("brute_force_nbs: grid must be 1, 0.5 or 0.25");
  OracleResult best;
  double best_local = -1.0;
  CachingStrategy s = CachingStrategy::zeros(g);
  std::vector<std::vector<double>> rows(g.nodes(), std::vector<double>(g.objects(), 0.0));

  std::function<void(int)> rec = [&](int node) {
    if (node == g.nodes()) {
      for (int i = 0; i < g.nodes(); ++i)
        for (int k = 0; k < g.objects(); ++k) s.xv(i, k) = rows[i][k];
      OracleResult cand = evaluate_placement(g, s, mode);
      double local = 0.0;
      for (int i = 0; i < g.nodes(); ++i) local += local_utility(g, cand.strategy, i);
      if (cand.nash_product > best.nash_product + 1e-12 ||
          (std::abs(cand.nash_product - best.nash_product) <= 1e-12 && local > best_local + 1e-12)) {
        best = std::move(cand);
        best_local = local;
      }
      return;
    }
    detail::enumerate_rows(g.objects(), grid, g.capacities[node], rows[node], 0, 0.0,
                           [&] { rec(node + 1); });
  };
  rec(0);
  return best;
}

// Exhaustive grid search for the aggregate-utility maximizer.
inline OracleResult brute_force_total(const GameInstance& g, double grid,
                                      RetrievalMode mode = RetrievalMode::kModel) {
  if (g.nodes() > 3 || g.objects() > 4)
    throw std::invalid_argument("brute_force_total: instance too large");
  OracleResult best;
  best.total_utility = -std::numeric_limits<double>::infinity();
  CachingStrategy s = CachingStrategy::zeros(g);
  std::vector<std::vector<double>> rows(g.nodes(), std::vector<double>(g.objects(), 0.0));
  std::function<void(int)> rec = [&](int node) {
    if (node == g.nodes()) {
      for (int i = 0; i < g.nodes(); ++i)
        for (int k = 0; k < g.objects(); ++k) s.xv(i, k) = rows[i][k];
      OracleResult cand = evaluate_placement(g, s, mode);
      if (cand.total_utility > best.total_utility + 1e-12) best = std::move(cand);
      return;
    }
    detail::enumerate_rows(g.objects(), grid, g.capacities[node], rows[node], 0, 0.0,
                           [&] { rec(node + 1); });
  };
  rec(0);
  return best;
}

// Expected total utility of the randomized greedy strategy: each node caches
// a uniformly random top-C_i set among weight ties, then retrieves greedily.
// Capacities must be integral.
inline double expected_greedy_total(const GameInstance& g, RetrievalMode mode) {
  std::vector<std::vector<std::vector<int>>> choices(g.nodes());  // per node: candidate sets
  for (int i = 0; i < g.nodes(); ++i) {
    int cap = static_cast<int>(std::round(g.capacities[i]));
    std::vector<int> order(g.objects());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return g.demand.at(i, a) > g.demand.at(i, b); });
    cap = std::min(cap, g.objects());
    if (cap == 0) {
      choices[i].push_back({});
      continue;
    }
    // ties straddling the capacity boundary: enumerate subsets of the tied group
    double boundary_w = g.demand.at(i, order[cap - 1]);
    std::vector<int> sure, tied;
    for (int r = 0; r < g.objects(); ++r) {
      double w = g.demand.at(i, order[r]);
      if (w > boundary_w)
        sure.push_back(order[r]);
      else if (w == boundary_w)
        tied.push_back(order[r]);
    }
    int need = cap - static_cast<int>(sure.size());
    std::vector<int> pick(need, 0);
    std::function<void(int, int)> comb = [&](int start, int depth) {
      if (depth == need) {
        std::vector<int> set = sure;
        for (int t = 0; t < need; ++t) set.push_back(pick[t]);
        choices[i].push_back(set);
        return;
      }
      for (int t = start; t < static_cast<int>(tied.size()); ++t) {
        pick[depth] = tied[t];
        comb(t + 1, depth + 1);
      }
    };
    comb(0, 0);
  }
  double total = 0.0;
  long combos = 0;
  CachingStrategy s = CachingStrategy::zeros(g);
  std::function<void(int)> rec = [&](int node) {
    if (node == g.nodes()) {
      OracleResult r = evaluate_placement(g, s, mode);
      total += r.total_utility;
      ++combos;
      return;
    }
    for (const auto& set : choices[node]) {
      for (int k = 0; k < g.objects(); ++k) s.xv(node, k) = 0.0;
      for (int k : set) s.xv(node, k) = 1.0;
      rec(node + 1);
    }
  };
  rec(0);
  return total / combos;
}

// Rounds a relaxed placement down to the grid while keeping feasibility, for
// relaxation-gap bounds in tests.
inline CachingStrategy round_to_grid(const GameInstance& g, const CachingStrategy& s, double grid) {
  CachingStrategy out = CachingStrategy::zeros(g);
  for (int i = 0; i < g.nodes(); ++i)
    for (int k = 0; k < g.objects(); ++k)
      out.xv(i, k) = std::floor(s.xv(i, k) / grid) * grid;
  fill_greedy_retrieval(g, out, RetrievalMode::kModel);
  return out;
}

}  // namespace fincache
