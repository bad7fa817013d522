#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fincache/game.hpp"

namespace fincache {

// Euclidean projection onto { 0 <= v_i <= cap, sum v_i <= budget }.
// The shifted sum s(t) = sum_i clamp(v_i - t, 0, cap) is piecewise linear and
// non-increasing with breakpoints at v_i and v_i - cap, so the exact shift
// comes from a breakpoint search plus one linear solve.
inline void project_capped_simplex(std::vector<double>& v, double cap, double budget) {
  double sum = 0.0;
  for (double t : v) sum += std::clamp(t, 0.0, cap);
  if (sum <= budget) {
    for (double& t : v) t = std::clamp(t, 0.0, cap);
    return;
  }
  static thread_local std::vector<double> bp;
  bp.clear();
  bp.push_back(0.0);
  for (double t : v) {
    bp.push_back(t);
    bp.push_back(t - cap);
  }
  std::sort(bp.begin(), bp.end());
  auto sval = [&](double t) {
    double s = 0.0;
    for (double x : v) s += std::clamp(x - t, 0.0, cap);
    return s;
  };
  // first breakpoint where the shifted sum drops to the budget or below
  size_t lo = 0, hi = bp.size() - 1;
  while (lo < hi) {
    size_t mid = (lo + hi) / 2;
    if (sval(bp[mid]) <= budget)
      hi = mid;
    else
      lo = mid + 1;
  }
  double t_hi = bp[hi];
  double t_lo = hi > 0 ? bp[hi - 1] : 0.0;
  double s_hi = sval(t_hi), s_lo = sval(t_lo);
  double t = s_lo > s_hi ? t_lo + (s_lo - budget) * (t_hi - t_lo) / (s_lo - s_hi) : t_hi;
  t = std::max(t, 0.0);
  for (double& x : v) x = std::clamp(x - t, 0.0, cap);
}

// Projection onto { (x, y_1..y_m) : y_t <= x for all t } by pooling the
// violating coordinates with x.
inline void project_coupling(double& x, std::vector<double*>& ys) {
  static thread_local std::vector<double> vals;
  vals.clear();
  vals.reserve(ys.size());
  for (double* p : ys) vals.push_back(*p);
  std::sort(vals.begin(), vals.end(), std::greater<>());
  if (vals.empty() || vals[0] <= x) return;  // already feasible
  // pool the |A| largest y's with x: mu = (x + sum_A y) / (|A| + 1), where A
  // is the smallest prefix with the next value <= mu
  double acc = x;
  int cnt = 1;
  double mu = x;
  for (size_t t = 0; t < vals.size(); ++t) {
    acc += vals[t];
    ++cnt;
    mu = acc / cnt;
    if (t + 1 == vals.size() || vals[t + 1] <= mu) break;
  }
  x = mu;
  for (double* p : ys)
    if (*p > mu) *p = mu;
}

namespace detail {

// Flat strategy view used by the solvers: x then all y blocks.
struct StrategyVec {
  std::vector<double> v;
  int nodes = 0, objects = 0;
  std::vector<size_t> y_off;  // offset of node i's y block

  static StrategyVec from(const CachingStrategy& s) {
    StrategyVec f;
    f.nodes = s.nodes;
    f.objects = s.objects;
    f.v = s.x;
    f.y_off.resize(s.nodes);
    for (int i = 0; i < s.nodes; ++i) {
      f.y_off[i] = f.v.size();
      f.v.insert(f.v.end(), s.y[i].begin(), s.y[i].end());
    }
    return f;
  }

  CachingStrategy to(const GameInstance& g) const {
    CachingStrategy s = CachingStrategy::zeros(g);
    std::copy(v.begin(), v.begin() + static_cast<long>(s.x.size()), s.x.begin());
    for (int i = 0; i < nodes; ++i)
      std::copy(v.begin() + static_cast<long>(y_off[i]),
                v.begin() + static_cast<long>(y_off[i] + s.y[i].size()), s.y[i].begin());
    return s;
  }

  double xv(int i, int k) const { return v[static_cast<size_t>(i) * objects + k]; }
  double& xref(int i, int k) { return v[static_cast<size_t>(i) * objects + k]; }
  double yv(int i, int a, int k) const {
    return v[y_off[i] + static_cast<size_t>(a) * objects + k];
  }
  double& yref(int i, int a, int k) {
    return v[y_off[i] + static_cast<size_t>(a) * objects + k];
  }
};

}  // namespace detail

// Fast feasibility repair (not an exact projection): project x rows onto the
// capped simplex, clamp y to [0, min(1, x_jk)], then scale rows violating the
// per-object retrieval budget.
inline void repair_feasible(const GameInstance& g, detail::StrategyVec& f) {
  std::vector<double> row(g.objects());
  for (int i = 0; i < g.nodes(); ++i) {
    for (int k = 0; k < g.objects(); ++k) row[k] = f.xv(i, k);
    project_capped_simplex(row, 1.0, g.capacities[i]);
    for (int k = 0; k < g.objects(); ++k) f.xref(i, k) = row[k];
  }
  for (int i = 0; i < g.nodes(); ++i) {
    const auto& src = g.sources(i);
    for (int k = 0; k < g.objects(); ++k) {
      double sum = 0.0;
      for (size_t a = 0; a < src.size(); ++a) {
        double cap = std::min(1.0, f.xv(src[a], k));
        double& yr = f.yref(i, static_cast<int>(a), k);
        yr = std::clamp(yr, 0.0, cap);
        sum += yr;
      }
      if (sum > 1.0) {
        double scale = 1.0 / sum;
        for (size_t a = 0; a < src.size(); ++a) f.yref(i, static_cast<int>(a), k) *= scale;
      }
    }
  }
}

// Exact Euclidean projection onto the feasible polyhedron (5)-(9) via
// Dykstra's alternating projections over three block families:
//   B1: per-node x row, capped simplex
//   B2: per (i,k) retrieval simplex
//   B3: per (j,k) coupling { y_{i,j,k} <= x_{j,k} }
inline void project_feasible_exact(const GameInstance& g, detail::StrategyVec& f,
                                   double tol = 1e-11, int max_cycles = 2000) {
  const int n = g.nodes(), K = g.objects();
  // Dykstra corrections per block
  std::vector<std::vector<double>> c1(n), c2;
  std::vector<std::vector<double>> c3;
  for (int i = 0; i < n; ++i) c1[i].assign(K, 0.0);
  c2.resize(n);
  for (int i = 0; i < n; ++i) c2[i].assign(g.sources(i).size() * static_cast<size_t>(K), 0.0);
  // B3 blocks: for each (j,k): x_{j,k} and all y_{i,a->j,k}
  struct Coupling {
    int j, k;
    std::vector<std::pair<int, int>> ys;  // (i, src index a)
  };
  std::vector<Coupling> couplings;
  for (int j = 0; j < n; ++j) {
    std::vector<std::pair<int, int>> ys;
    for (int i : g.nbhd[j].co_members) {
      const auto& src = g.sources(i);
      for (size_t a = 0; a < src.size(); ++a)
        if (src[a] == j) ys.emplace_back(i, static_cast<int>(a));
    }
    if (ys.empty()) continue;
    for (int k = 0; k < K; ++k) couplings.push_back({j, k, ys});
  }
  c3.assign(couplings.size(), {});
  for (size_t b = 0; b < couplings.size(); ++b) c3[b].assign(couplings[b].ys.size() + 1, 0.0);

  std::vector<double> row, before, yvals, y_before;
  std::vector<double*> ptrs;
  for (int cycle = 0; cycle < max_cycles; ++cycle) {
    double max_change = 0.0;
    // B1
    for (int i = 0; i < n; ++i) {
      row.resize(K);
      for (int k = 0; k < K; ++k) row[k] = f.xv(i, k) + c1[i][k];
      before = row;
      project_capped_simplex(row, 1.0, g.capacities[i]);
      for (int k = 0; k < K; ++k) {
        c1[i][k] = before[k] - row[k];
        max_change = std::max(max_change, std::abs(f.xv(i, k) - row[k]));
        f.xref(i, k) = row[k];
      }
    }
    // B2
    for (int i = 0; i < n; ++i) {
      const int m = static_cast<int>(g.sources(i).size());
      if (m == 0) continue;
      for (int k = 0; k < K; ++k) {
        row.resize(m);
        for (int a = 0; a < m; ++a) row[a] = f.yv(i, a, k) + c2[i][static_cast<size_t>(a) * K + k];
        before = row;
        project_capped_simplex(row, 1.0, 1.0);
        for (int a = 0; a < m; ++a) {
          c2[i][static_cast<size_t>(a) * K + k] = before[a] - row[a];
          max_change = std::max(max_change, std::abs(f.yv(i, a, k) - row[a]));
          f.yref(i, a, k) = row[a];
        }
      }
    }
    // B3
    for (size_t b = 0; b < couplings.size(); ++b) {
      auto& cp = couplings[b];
      double x = f.xv(cp.j, cp.k) + c3[b][0];
      yvals.resize(cp.ys.size());
      for (size_t t = 0; t < cp.ys.size(); ++t)
        yvals[t] = f.yv(cp.ys[t].first, cp.ys[t].second, cp.k) + c3[b][t + 1];
      double x_before = x;
      y_before = yvals;
      ptrs.resize(yvals.size());
      for (size_t t = 0; t < yvals.size(); ++t) ptrs[t] = &yvals[t];
      project_coupling(x, ptrs);
      c3[b][0] = x_before - x;
      max_change = std::max(max_change, std::abs(f.xv(cp.j, cp.k) - x));
      f.xref(cp.j, cp.k) = x;
      for (size_t t = 0; t < cp.ys.size(); ++t) {
        c3[b][t + 1] = y_before[t] - yvals[t];
        max_change =
            std::max(max_change, std::abs(f.yv(cp.ys[t].first, cp.ys[t].second, cp.k) - yvals[t]));
        f.yref(cp.ys[t].first, cp.ys[t].second, cp.k) = yvals[t];
      }
    }
    if (max_change < tol) break;
  }
  // final clean-up so the iterate is feasible to machine precision
  repair_feasible(g, f);
}

}  // namespace fincache
