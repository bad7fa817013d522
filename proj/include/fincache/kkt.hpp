#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "fincache/game.hpp"

namespace fincache {

// KKT multipliers for the program (4)-(9). alpha: capacity (5); beta:
// retrieval budget (6); lambda: coupling (7); gamma: x <= 1; mu: x >= 0;
// delta: y >= 0. The x >= 0 multiplier is not in the paper's Lagrangian (it
// is dropped there as redundant), but it is required for stationarity at
// boundary optima with x_{i,k} = 0.
struct KKTMultipliers {
  std::vector<double> alpha;                    // per node
  std::vector<double> beta;                     // node x object
  std::vector<double> gamma;                    // node x object
  std::vector<double> mu;                       // node x object
  std::vector<std::vector<double>> lambda;      // per node: |N_i| x objects
  std::vector<std::vector<double>> delta;       // per node: |N_i| x objects
};

struct KKTReport {
  KKTMultipliers m;
  double stationarity_residual = 0.0;  // max norm over all coordinates
  double slackness_residual = 0.0;     // max norm over all complementarity products
  std::vector<double> tau;             // tau_{i,k} = U_i - u0_i - w_{i,k} x_{i,k}
  std::vector<std::vector<double>> tau_prime;  // per triple, paper's tau'
  double max_residual() const { return std::max(stationarity_residual, slackness_residual); }
};

// Recovers multipliers from the stationarity system at a (near-)optimal
// point: a closed-form two-pass warm start followed by projected coordinate
// descent on the residual least-squares problem, with each multiplier's
// support restricted to its active constraint. Misclassification surfaces in
// the residuals rather than being hidden.
inline KKTMultipliers recover_multipliers(const GameInstance& g, const CachingStrategy& s,
                                          const std::vector<bool>& part,
                                          double act_tol = 1e-6) {
  const int n = g.nodes(), K = g.objects();
  KKTMultipliers m;
  m.alpha.assign(n, 0.0);
  m.beta.assign(static_cast<size_t>(n) * K, 0.0);
  m.gamma.assign(static_cast<size_t>(n) * K, 0.0);
  m.mu.assign(static_cast<size_t>(n) * K, 0.0);
  m.lambda.resize(n);
  m.delta.resize(n);
  std::vector<double> margin(n, 1.0);
  for (int i = 0; i < n; ++i)
    if (part[i]) margin[i] = utility(g, s, i) - g.u0[i];

  // Pass 1: lambda, beta, delta from the y stationarity per (i,k).
  for (int i = 0; i < n; ++i) {
    const auto& src = g.sources(i);
    const int msz = static_cast<int>(src.size());
    m.lambda[i].assign(static_cast<size_t>(msz) * K, 0.0);
    m.delta[i].assign(static_cast<size_t>(msz) * K, 0.0);
    if (!part[i]) continue;
    for (int k = 0; k < K; ++k) {
      double row_sum = 0.0;
      for (int a = 0; a < msz; ++a) row_sum += s.yv(i, a, k);
      bool budget_active = row_sum >= 1.0 - act_tol;
      // target d_a for each source
      std::vector<double> d(msz);
      for (int a = 0; a < msz; ++a)
        d[a] = g.demand.at(i, k) * g.discount(g.dist.at(i, src[a])) / margin[i];
      double beta = 0.0;
      if (budget_active) {
        double lo = 0.0, hi = std::numeric_limits<double>::infinity();
        double interior_sum = 0.0;
        int interior_cnt = 0;
        for (int a = 0; a < msz; ++a) {
          double yv = s.yv(i, a, k);
          double cap = s.xv(src[a], k);
          bool at_cap = cap - yv <= act_tol;
          bool at_zero = yv <= act_tol;
          if (!at_cap && !at_zero) {
            interior_sum += d[a];
            ++interior_cnt;
          } else if (at_zero && !at_cap) {
            lo = std::max(lo, d[a]);
          } else if (at_cap && !at_zero) {
            hi = std::min(hi, d[a]);
          }
        }
        if (interior_cnt > 0) {
          beta = interior_sum / interior_cnt;
        } else {
          // beta is free in [lo, hi]; take lo so sources receive maximal
          // lambda income, which the x-layer capacity duals rely on
          beta = lo;
        }
        (void)hi;
        beta = std::max(0.0, beta);
      }
      m.beta[static_cast<size_t>(i) * K + k] = beta;
      for (int a = 0; a < msz; ++a) {
        double yv = s.yv(i, a, k);
        double cap = s.xv(src[a], k);
        bool at_cap = cap - yv <= act_tol;
        bool at_zero = yv <= act_tol;
        double r = d[a] - beta;
        if (r >= 0.0 && at_cap)
          m.lambda[i][static_cast<size_t>(a) * K + k] = r;
        else if (r < 0.0 && at_zero)
          m.delta[i][static_cast<size_t>(a) * K + k] = -r;
      }
    }
  }

  // Pass 2: alpha, gamma, mu from the x stationarity. Income term collects
  // lambda from every retriever of (i,k).
  std::vector<double> income(static_cast<size_t>(n) * K, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size(); ++a)
      for (int k = 0; k < K; ++k)
        income[static_cast<size_t>(src[a]) * K + k] += m.lambda[i][a * K + k];
  }
  for (int i = 0; i < n; ++i) {
    if (!part[i]) continue;
    double cap_sum = 0.0;
    for (int k = 0; k < K; ++k) cap_sum += s.xv(i, k);
    bool cap_active = cap_sum >= g.capacities[i] - act_tol;
    std::vector<double> gvec(K);
    for (int k = 0; k < K; ++k)
      gvec[k] = g.demand.at(i, k) / margin[i] + income[static_cast<size_t>(i) * K + k];
    double alpha = 0.0;
    if (cap_active) {
      double lo = 0.0, hi = std::numeric_limits<double>::infinity();
      double interior_sum = 0.0;
      int interior_cnt = 0;
      for (int k = 0; k < K; ++k) {
        double xv = s.xv(i, k);
        bool at_one = xv >= 1.0 - act_tol;
        bool at_zero = xv <= act_tol;
        if (!at_one && !at_zero) {
          interior_sum += gvec[k];
          ++interior_cnt;
        } else if (at_zero) {
          lo = std::max(lo, gvec[k]);
        } else {
          hi = std::min(hi, gvec[k]);
        }
      }
      if (interior_cnt > 0)
        alpha = interior_sum / interior_cnt;
      else if (std::isinf(hi))
        alpha = lo;
      else
        alpha = 0.5 * (lo + hi);
      alpha = std::max(0.0, alpha);
    }
    m.alpha[i] = alpha;
    for (int k = 0; k < K; ++k) {
      double xv = s.xv(i, k);
      bool at_one = xv >= 1.0 - act_tol;
      bool at_zero = xv <= act_tol;
      double r = gvec[k] - alpha;
      if (r >= 0.0 && at_one)
        m.gamma[static_cast<size_t>(i) * K + k] = r;
      else if (r < 0.0 && at_zero)
        m.mu[static_cast<size_t>(i) * K + k] = -r;
    }
  }

  // Refinement: projected coordinate descent on the sum of squared
  // stationarity residuals. Activity flags fix the support; every update is
  // an exact single-coordinate minimizer clamped at zero.
  std::vector<char> x_at_one(static_cast<size_t>(n) * K), x_at_zero(static_cast<size_t>(n) * K);
  std::vector<char> cap_act(n), row_act(static_cast<size_t>(n) * K);
  std::vector<std::vector<char>> y_at_cap(n), y_at_zero(n);
  for (int i = 0; i < n; ++i) {
    double cap_sum = 0.0;
    for (int k = 0; k < K; ++k) {
      cap_sum += s.xv(i, k);
      x_at_one[static_cast<size_t>(i) * K + k] = s.xv(i, k) >= 1.0 - act_tol;
      x_at_zero[static_cast<size_t>(i) * K + k] = s.xv(i, k) <= act_tol;
    }
    cap_act[i] = cap_sum >= g.capacities[i] - act_tol;
    const auto& src = g.sources(i);
    const int msz = static_cast<int>(src.size());
    y_at_cap[i].assign(static_cast<size_t>(msz) * K, 0);
    y_at_zero[i].assign(static_cast<size_t>(msz) * K, 0);
    for (int k = 0; k < K; ++k) {
      double row_sum = 0.0;
      for (int a = 0; a < msz; ++a) {
        double yv = s.yv(i, a, k);
        row_sum += yv;
        y_at_cap[i][static_cast<size_t>(a) * K + k] = s.xv(src[a], k) - yv <= act_tol;
        y_at_zero[i][static_cast<size_t>(a) * K + k] = yv <= act_tol;
      }
      row_act[static_cast<size_t>(i) * K + k] = row_sum >= 1.0 - act_tol;
    }
  }

  // Residuals of the stationarity equations under the current multipliers.
  std::vector<double> rx(static_cast<size_t>(n) * K, 0.0);  // participant x-equations
  std::vector<std::vector<double>> ry(n);                   // participant y-equations
  auto rebuild = [&] {
    std::fill(income.begin(), income.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      const auto& src = g.sources(i);
      for (size_t a = 0; a < src.size(); ++a)
        for (int k = 0; k < K; ++k)
          income[static_cast<size_t>(src[a]) * K + k] += m.lambda[i][a * K + k];
    }
    for (int i = 0; i < n; ++i) {
      const auto& src = g.sources(i);
      const int msz = static_cast<int>(src.size());
      ry[i].assign(static_cast<size_t>(msz) * K, 0.0);
      for (int k = 0; k < K; ++k) {
        size_t ik = static_cast<size_t>(i) * K + k;
        if (!part[i]) {
          rx[ik] = 0.0;
          continue;
        }
        rx[ik] = g.demand.at(i, k) / margin[i] + income[ik] - m.alpha[i] - m.gamma[ik] + m.mu[ik];
        for (int a = 0; a < msz; ++a) {
          size_t ak = static_cast<size_t>(a) * K + k;
          double d = g.demand.at(i, k) * g.discount(g.dist.at(i, src[a])) / margin[i];
          ry[i][ak] = d - m.lambda[i][ak] - m.beta[ik] + m.delta[i][ak];
        }
      }
    }
  };
  rebuild();

  for (int sweep = 0; sweep < 20000; ++sweep) {
    double max_step = 0.0;
    for (int i = 0; i < n; ++i) {
      if (!part[i]) continue;
      const auto& src = g.sources(i);
      const int msz = static_cast<int>(src.size());
      // alpha_i over the K x-equations
      if (cap_act[i]) {
        double mean = 0.0;
        for (int k = 0; k < K; ++k) mean += rx[static_cast<size_t>(i) * K + k];
        mean /= K;
        double nv = std::max(0.0, m.alpha[i] + mean);
        double d = nv - m.alpha[i];
        if (d != 0.0) {
          m.alpha[i] = nv;
          for (int k = 0; k < K; ++k) rx[static_cast<size_t>(i) * K + k] -= d;
          max_step = std::max(max_step, std::abs(d));
        }
      }
      for (int k = 0; k < K; ++k) {
        size_t ik = static_cast<size_t>(i) * K + k;
        if (x_at_one[ik]) {
          double nv = std::max(0.0, m.gamma[ik] + rx[ik]);
          double d = nv - m.gamma[ik];
          if (d != 0.0) {
            m.gamma[ik] = nv;
            rx[ik] -= d;
            max_step = std::max(max_step, std::abs(d));
          }
        }
        if (x_at_zero[ik]) {
          double nv = std::max(0.0, m.mu[ik] - rx[ik]);
          double d = nv - m.mu[ik];
          if (d != 0.0) {
            m.mu[ik] = nv;
            rx[ik] += d;
            max_step = std::max(max_step, std::abs(d));
          }
        }
        // beta_{i,k} over the msz y-equations
        if (row_act[ik] && msz > 0) {
          double mean = 0.0;
          for (int a = 0; a < msz; ++a) mean += ry[i][static_cast<size_t>(a) * K + k];
          mean /= msz;
          double nv = std::max(0.0, m.beta[ik] + mean);
          double d = nv - m.beta[ik];
          if (d != 0.0) {
            m.beta[ik] = nv;
            for (int a = 0; a < msz; ++a) ry[i][static_cast<size_t>(a) * K + k] -= d;
            max_step = std::max(max_step, std::abs(d));
          }
        }
        for (int a = 0; a < msz; ++a) {
          size_t ak = static_cast<size_t>(a) * K + k;
          size_t jk = static_cast<size_t>(src[a]) * K + k;
          // lambda couples its y-equation with the source's x-equation
          if (y_at_cap[i][ak]) {
            double step = part[src[a]] ? 0.5 * (ry[i][ak] - rx[jk]) : ry[i][ak];
            double nv = std::max(0.0, m.lambda[i][ak] + step);
            double d = nv - m.lambda[i][ak];
            if (d != 0.0) {
              m.lambda[i][ak] = nv;
              ry[i][ak] -= d;
              if (part[src[a]]) rx[jk] += d;
              max_step = std::max(max_step, std::abs(d));
            }
          }
          if (y_at_zero[i][ak]) {
            double nv = std::max(0.0, m.delta[i][ak] - ry[i][ak]);
            double d = nv - m.delta[i][ak];
            if (d != 0.0) {
              m.delta[i][ak] = nv;
              ry[i][ak] += d;
              max_step = std::max(max_step, std::abs(d));
            }
          }
        }
      }
    }
    if (max_step < 1e-13) break;
  }
  return m;
}

// Residuals of the stationarity system and the complementary slackness
// products, plus the paper's tau / tau' values.
inline KKTReport kkt_check(const GameInstance& g, const CachingStrategy& s,
                           const KKTMultipliers& m,
                           const std::vector<bool>& part) {
  const int n = g.nodes(), K = g.objects();
  KKTReport rep;
  rep.m = m;
  rep.tau.assign(static_cast<size_t>(n) * K, 0.0);
  rep.tau_prime.resize(n);
  std::vector<double> margin(n, 1.0);
  for (int i = 0; i < n; ++i)
    if (part[i]) margin[i] = utility(g, s, i) - g.u0[i];

  std::vector<double> income(static_cast<size_t>(n) * K, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size(); ++a)
      for (int k = 0; k < K; ++k)
        income[static_cast<size_t>(src[a]) * K + k] += m.lambda[i][a * K + k];
  }

  double stat = 0.0, slack = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto& src = g.sources(i);
    const int msz = static_cast<int>(src.size());
    rep.tau_prime[i].assign(static_cast<size_t>(msz) * K, 0.0);
    double cap_sum = 0.0;
    for (int k = 0; k < K; ++k) cap_sum += s.xv(i, k);
    if (part[i]) slack = std::max(slack, std::abs(m.alpha[i] * (cap_sum - g.capacities[i])));
    for (int k = 0; k < K; ++k) {
      size_t ik = static_cast<size_t>(i) * K + k;
      rep.tau[ik] = margin[i] - g.demand.at(i, k) * s.xv(i, k);
      if (!part[i]) continue;
      double sres = g.demand.at(i, k) / margin[i] + income[ik] - m.alpha[i] - m.gamma[ik] + m.mu[ik];
      stat = std::max(stat, std::abs(sres));
      slack = std::max(slack, std::abs(m.gamma[ik] * (s.xv(i, k) - 1.0)));
      slack = std::max(slack, std::abs(m.mu[ik] * s.xv(i, k)));
      double row_sum = 0.0;
      for (int a = 0; a < msz; ++a) row_sum += s.yv(i, a, k);
      slack = std::max(slack, std::abs(m.beta[ik] * (row_sum - 1.0)));
      for (int a = 0; a < msz; ++a) {
        size_t ak = static_cast<size_t>(a) * K + k;
        double disc = g.discount(g.dist.at(i, src[a]));
        rep.tau_prime[i][ak] = margin[i] - g.demand.at(i, k) * disc * s.yv(i, a, k);
        double yres = g.demand.at(i, k) * disc / margin[i] - m.lambda[i][ak] - m.beta[ik] +
                      m.delta[i][ak];
        stat = std::max(stat, std::abs(yres));
        slack = std::max(slack, std::abs(m.lambda[i][ak] * (s.yv(i, a, k) - s.xv(src[a], k))));
        slack = std::max(slack, std::abs(m.delta[i][ak] * s.yv(i, a, k)));
      }
    }
  }
  rep.stationarity_residual = stat;
  rep.slackness_residual = slack;
  return rep;
}

}  // namespace fincache
