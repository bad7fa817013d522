#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fincache/game.hpp"
#include "fincache/projection.hpp"

namespace fincache {

struct EfResult {
  bool holds = false;
  double max_spread = 0.0;
};

struct MfResult {
  bool holds_over_candidates = false;
  int bottleneck_node = -1;  // node attaining the min surplus of the winner
  int best_candidate = -1;
};

struct PfResult {
  bool holds = false;
  double worst_perturbation_sum = -std::numeric_limits<double>::infinity();
  int trials = 0;
};

struct FairnessReport {
  EfResult ef;
  MfResult mf;
  PfResult pf;

  std::string to_json() const {
    std::ostringstream out;
    out.precision(12);
    out << "{\"ef\":{\"holds\":" << (ef.holds ? "true" : "false")
        << ",\"max_spread\":" << ef.max_spread << "},"
        << "\"mf\":{\"holds_over_candidates\":" << (mf.holds_over_candidates ? "true" : "false")
        << ",\"bottleneck_node\":" << mf.bottleneck_node << "},"
        << "\"pf\":{\"holds\":" << (pf.holds ? "true" : "false")
        << ",\"worst_perturbation_sum\":" << pf.worst_perturbation_sum
        << ",\"trials\":" << pf.trials << "}}";
    return out.str();
  }
};

// Egalitarian fairness: all surpluses u_i - u^w_i equal within tol. u^w
// defaults to the disagreement point.
inline EfResult check_ef(const std::vector<double>& u, const std::vector<double>& u_w,
                         double tol = 1e-9) {
  if (u.size() != u_w.size()) throw std::invalid_argument("check_ef: length mismatch");
  EfResult r;
  if (u.empty()) return r;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (size_t i = 0; i < u.size(); ++i) {
    double s = u[i] - u_w[i];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  r.max_spread = hi - lo;
  r.holds = r.max_spread <= tol;
  return r;
}

// Max-min fairness over a finite candidate set: candidate index `target`
// holds iff it attains the maximal min surplus. A restricted check, not a
// search over the full strategy space.
inline MfResult check_mf(const std::vector<std::vector<double>>& candidate_utilities,
                         const std::vector<double>& u_w, int target = 0, double tol = 1e-9) {
  if (candidate_utilities.empty()) throw std::invalid_argument("check_mf: no candidates");
  MfResult r;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> mins(candidate_utilities.size());
  std::vector<int> argmins(candidate_utilities.size(), -1);
  for (size_t c = 0; c < candidate_utilities.size(); ++c) {
    const auto& u = candidate_utilities[c];
    if (u.size() != u_w.size()) throw std::invalid_argument("check_mf: length mismatch");
    double mn = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (size_t i = 0; i < u.size(); ++i)
      if (u[i] - u_w[i] < mn) {
        mn = u[i] - u_w[i];
        arg = static_cast<int>(i);
      }
    mins[c] = mn;
    argmins[c] = arg;
    if (mn > best) {
      best = mn;
      r.best_candidate = static_cast<int>(c);
    }
  }
  r.holds_over_candidates = mins[target] >= best - tol;
  r.bottleneck_node = argmins[target];
  return r;
}

// Proportional fairness sampler (Def. 7 necessary condition): random
// feasible perturbations s != s_star, sum_i (u_i - u*_i)/(u*_i - u0_i) must
// stay negative. Exhaustive verification on a universal quantifier is not
// possible by sampling; this reports the worst sum over `trials`.
inline PfResult check_pf(const GameInstance& g, const CachingStrategy& s_star, int trials,
                         uint64_t seed, const std::vector<bool>* mask = nullptr) {
  PfResult r;
  std::vector<double> u_star = utilities(g, s_star);
  std::vector<bool> part = mask ? *mask : participants(g);
  for (int i = 0; i < g.nodes(); ++i)
    if (part[i] && u_star[i] - g.u0[i] <= 0) throw NegotiationBreakdown(i);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<> unit(0.0, 1.0);
  std::uniform_real_distribution<> radius(0.05, 1.0);
  detail::StrategyVec base = detail::StrategyVec::from(s_star);
  int done = 0;
  for (int t = 0; t < trials; ++t) {
    detail::StrategyVec v = base;
    double rad = radius(rng);
    for (double& e : v.v) e += rad * (2.0 * unit(rng) - 1.0);
    project_feasible_exact(g, v);
    double dist = 0.0;
    for (size_t q = 0; q < v.v.size(); ++q) dist = std::max(dist, std::abs(v.v[q] - base.v[q]));
    if (dist < 1e-12) continue;  // s == s_star excluded by definition
    CachingStrategy s = v.to(g);
    double sum = 0.0;
    for (int i = 0; i < g.nodes(); ++i) {
      if (!part[i]) continue;
      sum += (utility(g, s, i) - u_star[i]) / (u_star[i] - g.u0[i]);
    }
    r.worst_perturbation_sum = std::max(r.worst_perturbation_sum, sum);
    ++done;
  }
  r.trials = done;
  r.holds = done > 0 && r.worst_perturbation_sum < 0.0;
  return r;
}

}  // namespace fincache
