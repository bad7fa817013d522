#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "fincache/game.hpp"
#include "fincache/projection.hpp"

namespace fincache {

enum class StepSchedule { kConstant, kDiminishing, kPolyak };

// xi_k for the parametric schedules: xi0 (constant) or xi0/k. The Polyak
// rule xi_k = xi0 * (d(lambda_k) - best_primal) / ||h_k||^2 needs the
// current bounds, so run_fin computes it inline.
inline double step_size(StepSchedule schedule, double xi0, int k) {
  return schedule == StepSchedule::kConstant ? xi0 : xi0 / k;
}

// Dual variables lambda_{i,j,k} for the relaxed coupling constraint (7),
// owned by the retriever i. Layout mirrors CachingStrategy::y.
struct DualState {
  std::vector<std::vector<double>> lambda;  // lambda[i]: |N_i| x objects
  int iteration = 0;
  // Reported in the maximization convention: the dual value upper-bounds the
  // Eq-(4) objective, so the running best is the smallest bound seen (the
  // running max of d(lambda) in the minimization form).
  double best_dual = std::numeric_limits<double>::infinity();
  StepSchedule schedule = StepSchedule::kDiminishing;
  double xi0 = 1.0;

  static DualState zeros(const GameInstance& g, StepSchedule sched, double xi0_) {
    DualState d;
    d.lambda.resize(g.nodes());
    for (int i = 0; i < g.nodes(); ++i)
      d.lambda[i].assign(g.sources(i).size() * static_cast<size_t>(g.objects()), 0.0);
    d.schedule = sched;
    d.xi0 = xi0_;
    return d;
  }
};

struct FinTraceRow {
  int iter = 0;
  double dual = 0.0;
  double primal = 0.0;  // objective of the repaired iterate, -inf if infeasible margin
  double gap = 0.0;     // best primal - best dual (log scale)
  double max_h = 0.0;
  std::int64_t messages = 0;
};

struct FinTrace {
  std::vector<FinTraceRow> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(12);
    out << "iter,dual,primal,gap,max_h,messages\n";
    for (const auto& r : rows)
      out << r.iter << "," << r.dual << "," << r.primal << "," << r.gap << "," << r.max_h << ","
          << r.messages << "\n";
    return out.str();
  }
};

struct FinResult {
  CachingStrategy strategy;  // best repaired primal iterate
  double primal_objective = -std::numeric_limits<double>::infinity();
  FinTrace trace;
  DualState dual;
  std::int64_t total_messages = 0;
  bool converged = false;
  std::vector<bool> participants;
};

namespace detail {

// Node-local Lagrangian value for given (x_i, y_i) rows:
//   L_i = -ln(U_i - u0_i) + sum_jk lambda_{i,j,k} y_{i,j,k} - sum_k income_{i,k} x_{i,k}
// income_{i,k} = sum over retrievers j with i in N_j of lambda_{j,i,k}.
inline double local_lagrangian(const GameInstance& g, int i, const std::vector<double>& x,
                               const std::vector<double>& y, const std::vector<double>& lambda,
                               const std::vector<double>& income) {
  const int K = g.objects();
  const auto& src = g.sources(i);
  double u = 0.0, lin = 0.0;
  for (int k = 0; k < K; ++k) {
    u += g.demand.at(i, k) * x[k];
    lin -= income[k] * x[k];
  }
  for (size_t a = 0; a < src.size(); ++a) {
    double disc = g.discount(g.dist.at(i, src[a]));
    for (int k = 0; k < K; ++k) {
      double yv = y[a * K + k];
      u += g.demand.at(i, k) * disc * yv;
      lin += lambda[a * K + k] * yv;
    }
  }
  double margin = u - g.u0[i];
  if (margin <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(margin) + lin;
}

// Short projected-ascent pass over the full strategy, used to finish the
// repaired primal iterate: the subgradient loop lands in a small
// neighborhood of the optimum and a few exact line-search steps close the
// remaining recovery gap. Returns the attained sum of log margins.
inline double polish_primal(const GameInstance& g, const std::vector<bool>& part, StrategyVec& f,
                            int iters = 40) {
  const int n = g.nodes(), K = g.objects();
  auto margins = [&](const StrategyVec& s, std::vector<double>& m) {
    bool ok = true;
    for (int i = 0; i < n; ++i) {
      m[i] = 1.0;
      if (!part[i]) continue;
      double u = 0.0;
      for (int k = 0; k < K; ++k) u += g.demand.at(i, k) * s.xv(i, k);
      const auto& src = g.sources(i);
      for (size_t a = 0; a < src.size(); ++a) {
        double disc = g.discount(g.dist.at(i, src[a]));
        for (int k = 0; k < K; ++k)
          u += g.demand.at(i, k) * disc * s.yv(i, static_cast<int>(a), k);
      }
      m[i] = u - g.u0[i];
      if (m[i] <= 0.0) ok = false;
    }
    return ok;
  };
  auto objective = [&](const std::vector<double>& m) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      if (part[i]) acc += std::log(m[i]);
    return acc;
  };
  std::vector<double> m(n), mt(n);
  if (!margins(f, m)) return -std::numeric_limits<double>::infinity();
  double step = 4.0;
  StrategyVec trial = f;
  for (int it = 0; it < iters; ++it) {
    trial.v = f.v;
    for (int i = 0; i < n; ++i) {
      if (!part[i]) continue;
      double gm = step / m[i];
      for (int k = 0; k < K; ++k) trial.xref(i, k) += gm * g.demand.at(i, k);
      const auto& src = g.sources(i);
      for (size_t a = 0; a < src.size(); ++a) {
        double disc = g.discount(g.dist.at(i, src[a]));
        for (int k = 0; k < K; ++k)
          trial.yref(i, static_cast<int>(a), k) += gm * g.demand.at(i, k) * disc;
      }
    }
    project_feasible_exact(g, trial);
    if (!margins(trial, mt)) {
      step *= 0.5;
      continue;
    }
    // exact concave 1-D maximization along [f, trial]: the restriction is a
    // sum of logs of affine margins, so bisect on its derivative
    double lo = 0.0, hi = 1.0;
    auto dphi = [&](double t) {
      double dv = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!part[i]) continue;
        double dm = mt[i] - m[i];
        dv += dm / (m[i] + t * dm);
      }
      return dv;
    };
    double tstar = 1.0;
    if (dphi(1.0) < 0.0) {
      for (int b = 0; b < 60; ++b) {
        double mid = 0.5 * (lo + hi);
        (dphi(mid) > 0.0 ? lo : hi) = mid;
      }
      tstar = 0.5 * (lo + hi);
    }
    if (tstar <= 1e-14) break;
    for (size_t q = 0; q < f.v.size(); ++q) f.v[q] += tstar * (trial.v[q] - f.v[q]);
    bool okm = margins(f, m);
    if (!okm) return -std::numeric_limits<double>::infinity();
    step = std::min(tstar > 0.9 ? step * 2.0 : step, 64.0);
  }
  return objective(m);
}

}  // namespace detail

// Minimizes L_i over the node-local constraints (5)(6)(8)(9) exactly; the
// coupling (7) is priced by lambda. The margin is dualized with a scalar mu:
// for fixed mu the linearized problem splits into a greedy capacity LP over
// x and independent winner-take-all rows over y, and the 1-D dual
// D(mu) = 1 + ln mu + q(mu) + mu*u0 is concave with monotone derivative
// 1/mu - margin(v(mu)), so bisection on mu recovers the exact minimizer.
// (x, y) receive the solution; returns the attained L_i value.
inline double local_subproblem(const GameInstance& g, int i, const std::vector<double>& lambda,
                               const std::vector<double>& income, std::vector<double>& x,
                               std::vector<double>& y, int max_iter = 300, double tol = 1e-10) {
  (void)tol;
  const int K = g.objects();
  const auto& src = g.sources(i);
  const int msz = static_cast<int>(src.size());

  std::vector<double> wy(static_cast<size_t>(msz) * K);
  for (int a = 0; a < msz; ++a) {
    double disc = g.discount(g.dist.at(i, src[a]));
    for (int k = 0; k < K; ++k) wy[static_cast<size_t>(a) * K + k] = g.demand.at(i, k) * disc;
  }
  std::vector<int> order(K);
  std::vector<double> rc(K);
  // linearized minimizer at a given mu; returns its margin
  auto build = [&](double mu, std::vector<double>& bx, std::vector<double>& by) {
    for (int k = 0; k < K; ++k) rc[k] = -income[k] - mu * g.demand.at(i, k);
    for (int k = 0; k < K; ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return rc[a] != rc[b] ? rc[a] < rc[b] : a < b; });
    std::fill(bx.begin(), bx.end(), 0.0);
    double cap = g.capacities[i];
    for (int k : order) {
      if (rc[k] >= 0.0 || cap <= 0.0) break;
      bx[k] = std::min(1.0, cap);
      cap -= bx[k];
    }
    std::fill(by.begin(), by.end(), 0.0);
    for (int k = 0; k < K; ++k) {
      int best = -1;
      double bestr = 0.0;
      for (int a = 0; a < msz; ++a) {
        double r = lambda[static_cast<size_t>(a) * K + k] - mu * wy[static_cast<size_t>(a) * K + k];
        if (r < bestr) {
          bestr = r;
          best = a;
        }
      }
      if (best >= 0) by[static_cast<size_t>(best) * K + k] = 1.0;
    }
    double s = -g.u0[i];
    for (int k = 0; k < K; ++k) s += g.demand.at(i, k) * bx[k];
    for (size_t t = 0; t < by.size(); ++t) s += wy[t] * by[t];
    return s;
  };

  std::vector<double> x_lo(K), x_hi(K), y_lo(y.size()), y_hi(y.size());
  double mu_lo = 1e-12, mu_hi = 1.0;
  double s_hi = build(mu_hi, x_hi, y_hi);
  while (1.0 / mu_hi > s_hi && mu_hi < 1e15) {
    mu_hi *= 8.0;
    s_hi = build(mu_hi, x_hi, y_hi);
  }
  if (s_hi <= 0.0) {
    // no placement with positive margin: hand back the greedy fallback
    CachingStrategy tmp = CachingStrategy::zeros(g);
    fill_greedy_local(g, tmp, i);
    for (int k = 0; k < K; ++k) x[k] = tmp.xv(i, k);
    std::fill(y.begin(), y.end(), 0.0);
    if (msz > 0) {
      int kbest = 0;
      for (int k = 1; k < K; ++k)
        if (g.demand.at(i, k) > g.demand.at(i, kbest)) kbest = k;
      y[kbest] = 1.0;  // nearest source is index 0
    }
    return detail::local_lagrangian(g, i, x, y, lambda, income);
  }
  int bis = std::min(std::max(max_iter, 100), 200);
  for (int it = 0; it < bis; ++it) {
    double mid = std::sqrt(mu_lo * mu_hi);
    double s_mid = build(mid, x_lo, y_lo);
    if (1.0 / mid > s_mid)
      mu_lo = mid;
    else
      mu_hi = mid;
  }
  double s_lo = build(mu_lo, x_lo, y_lo);
  s_hi = build(mu_hi, x_hi, y_hi);
  // at a kink of the linearized LP the two bracket vertices straddle the
  // stationary margin 1/mu; the blend hitting it exactly is the minimizer
  double target = 2.0 / (mu_lo + mu_hi);
  double theta = 1.0;
  if (s_hi > s_lo) theta = std::clamp((target - s_lo) / (s_hi - s_lo), 0.0, 1.0);
  for (int k = 0; k < K; ++k) x[k] = (1.0 - theta) * x_lo[k] + theta * x_hi[k];
  for (size_t t = 0; t < y.size(); ++t) y[t] = (1.0 - theta) * y_lo[t] + theta * y_hi[t];
  return detail::local_lagrangian(g, i, x, y, lambda, income);
}

// Projected subgradient step: lambda' = max(0, lambda + xi * h).
inline void dual_update(DualState& d, const std::vector<std::vector<double>>& h, double xi) {
  for (size_t i = 0; i < d.lambda.size(); ++i)
    for (size_t t = 0; t < d.lambda[i].size(); ++t)
      d.lambda[i][t] = std::max(0.0, d.lambda[i][t] + xi * h[i][t]);
}

// Algorithm-1 loop: synchronous subproblem solves, subgradient
// h_{i,j,k} = y*_{i,j,k} - x*_{j,k}, projected dual ascent, best repaired
// primal iterate by the Eq-(4) value. Message counting increments c*|O| per
// actually exchanged vector (x_j to each retriever, lambda/h to each source).
inline FinResult run_fin(const GameInstance& g, StepSchedule schedule = StepSchedule::kPolyak,
                         double xi0 = 1.0, int k_stop = 1200, double tol = 1e-5,
                         int message_c = 1) {
  const int n = g.nodes(), K = g.objects();
  FinResult res;
  res.participants = participants(g);
  res.dual = DualState::zeros(g, schedule, xi0);

  // working primal iterates, warm-started across dual iterations
  std::vector<std::vector<double>> xs(n, std::vector<double>(K, 0.0));
  std::vector<std::vector<double>> ys(n);
  for (int i = 0; i < n; ++i) {
    ys[i].assign(g.sources(i).size() * static_cast<size_t>(K), 0.0);
    CachingStrategy tmp = CachingStrategy::zeros(g);
    fill_greedy_local(g, tmp, i);
    for (int k = 0; k < K; ++k) xs[i][k] = tmp.xv(i, k);
  }
  std::vector<std::vector<double>> h(n);
  for (int i = 0; i < n; ++i) h[i].assign(ys[i].size(), 0.0);

  const int window = 300;
  std::vector<double> best_dual_at, best_primal_at;
  double best_primal = -std::numeric_limits<double>::infinity();
  CachingStrategy best_s;
  // ergodic average of the subproblem placements over a suffix of the run;
  // the dual subgradient iterates oscillate between vertices but their
  // average recovers a near-optimal primal point. Restarting the average at
  // powers of two keeps it over the last half of the iterations, where the
  // multipliers are close to their limit.
  std::vector<std::vector<double>> xavg(n, std::vector<double>(K, 0.0));
  double wsum = 0.0;
  int next_restart = 2;

  for (int iter = 1; iter <= k_stop; ++iter) {
    res.dual.iteration = iter;
    std::int64_t msgs = 0;

    // income_{j,k}: each retriever i communicates lambda_{i,j,.} to source j
    std::vector<std::vector<double>> income(n, std::vector<double>(K, 0.0));
    for (int i = 0; i < n; ++i) {
      const auto& src = g.sources(i);
      for (size_t a = 0; a < src.size(); ++a) {
        for (int k = 0; k < K; ++k)
          income[src[a]][k] += res.dual.lambda[i][a * K + k];
        msgs += message_c * K;  // lambda row sent from i to source
      }
    }

    // synchronous local solves
    double dual_val = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!res.participants[i]) continue;
      dual_val += local_subproblem(g, i, res.dual.lambda[i], income[i], xs[i], ys[i]);
    }
    dual_val = -dual_val;  // report the dual of the maximization form

    // subgradient: retriever i reads x*_j from each source j
    double max_h = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto& src = g.sources(i);
      for (size_t a = 0; a < src.size(); ++a) {
        for (int k = 0; k < K; ++k) {
          double hv = ys[i][a * K + k] - xs[src[a]][k];
          h[i][a * K + k] = hv;
          max_h = std::max(max_h, std::abs(hv));
        }
        msgs += message_c * K;  // x row sent from source to i
      }
    }

    if (dual_val < res.dual.best_dual) res.dual.best_dual = dual_val;
    best_dual_at.push_back(res.dual.best_dual);

    if (iter == next_restart) {
      next_restart *= 2;
      wsum = 0.0;
      for (auto& row : xavg) std::fill(row.begin(), row.end(), 0.0);
    }
    wsum += 1.0;
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < K; ++k) xavg[i][k] += (1.0 / wsum) * (xs[i][k] - xavg[i][k]);

    // primal repair: keep an x candidate (current iterate or the ergodic
    // average), rebuild y greedily under (6)-(7), take the better objective
    double primal = -std::numeric_limits<double>::infinity();
    auto try_candidate = [&](const std::vector<std::vector<double>>& cand) {
      CachingStrategy rep = CachingStrategy::zeros(g);
      for (int i = 0; i < n; ++i)
        for (int k = 0; k < K; ++k) rep.xv(i, k) = cand[i][k];
      fill_greedy_retrieval(g, rep, RetrievalMode::kModel);
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!res.participants[i]) continue;
        double margin = utility(g, rep, i) - g.u0[i];
        if (margin <= 0) return;
        acc += std::log(margin);
      }
      primal = std::max(primal, acc);
      if (acc > best_primal) {
        best_primal = acc;
        best_s = std::move(rep);
      }
    };
    try_candidate(xs);
    try_candidate(xavg);

    res.total_messages += msgs;
    res.trace.rows.push_back({iter, dual_val, primal, res.dual.best_dual - best_primal, max_h,
                              msgs});

    best_primal_at.push_back(best_primal);

    // stop once both the best dual bound and the best repaired primal have
    // stalled over the window; the dual alone flattens long before the
    // averaged primal stops improving
    if (iter > window &&
        best_dual_at[iter - 1 - window] - res.dual.best_dual < tol &&
        best_primal - best_primal_at[iter - 1 - window] < tol) {
      res.converged = true;
      break;
    }

    double xi;
    if (schedule == StepSchedule::kPolyak) {
      double hh = 0.0;
      for (int i = 0; i < n; ++i) {
        if (!res.participants[i]) continue;
        for (double hv : h[i]) hh += hv * hv;
      }
      double over = dual_val - best_primal;  // distance to the primal target
      xi = (hh > 1e-18 && std::isfinite(over) && over > 0.0) ? xi0 * over / hh
                                                            : step_size(StepSchedule::kDiminishing, xi0, iter);
    } else {
      xi = step_size(schedule, xi0, iter);
    }
    dual_update(res.dual, h, xi);
  }

  if (best_primal == -std::numeric_limits<double>::infinity()) {
    // fall back to the greedy strategy so callers always get a feasible point
    best_s = CachingStrategy::zeros(g);
    for (int i = 0; i < n; ++i) fill_greedy_local(g, best_s, i);
    fill_greedy_retrieval(g, best_s, RetrievalMode::kModel);
  } else {
    detail::StrategyVec pf = detail::StrategyVec::from(best_s);
    // the exact projection inside the polish is only affordable on
    // small/medium strategy vectors; large simulations keep the raw repair
    if (pf.v.size() <= 50000) {
      double polished = detail::polish_primal(g, res.participants, pf);
      if (polished > best_primal) {
        best_primal = polished;
        best_s = pf.to(g);
      }
    }
  }
  res.strategy = std::move(best_s);
  res.primal_objective = best_primal;
  return res;
}

// Dual function evaluation at a given lambda (fresh cold-started subproblem
// solves); used by the subgradient-validity property checks.
inline double dual_value(const GameInstance& g, const DualState& d,
                         std::vector<std::vector<double>>* h_out = nullptr) {
  const int n = g.nodes(), K = g.objects();
  std::vector<bool> part = participants(g);
  std::vector<std::vector<double>> income(n, std::vector<double>(K, 0.0));
  for (int i = 0; i < n; ++i) {
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size(); ++a)
      for (int k = 0; k < K; ++k) income[src[a]][k] += d.lambda[i][a * K + k];
  }
  std::vector<std::vector<double>> xs(n, std::vector<double>(K, 0.0));
  std::vector<std::vector<double>> ys(n);
  double val = 0.0;
  for (int i = 0; i < n; ++i) {
    ys[i].assign(g.sources(i).size() * static_cast<size_t>(K), 0.0);
    CachingStrategy tmp = CachingStrategy::zeros(g);
    fill_greedy_local(g, tmp, i);
    for (int k = 0; k < K; ++k) xs[i][k] = tmp.xv(i, k);
    if (part[i]) val += local_subproblem(g, i, d.lambda[i], income[i], xs[i], ys[i], 2000, 1e-12);
  }
  if (h_out) {
    h_out->resize(n);
    for (int i = 0; i < n; ++i) {
      const auto& src = g.sources(i);
      (*h_out)[i].assign(ys[i].size(), 0.0);
      for (size_t a = 0; a < src.size(); ++a)
        for (int k = 0; k < K; ++k) (*h_out)[i][a * K + k] = ys[i][a * K + k] - xs[src[a]][k];
    }
  }
  return -val;
}

}  // namespace fincache
