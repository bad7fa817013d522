#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "fincache/game.hpp"
#include "fincache/kkt.hpp"
#include "fincache/projection.hpp"

namespace fincache {

struct SolveReport {
  CachingStrategy strategy;
  double objective = 0.0;  // sum of ln(U_i - u0_i) over participants
  int iterations = 0;
  bool converged = false;
  KKTReport kkt;
  std::vector<bool> participants;
  std::vector<double> objective_history;
};

namespace detail {

inline double central_objective(const GameInstance& g, const StrategyVec& f,
                                const std::vector<bool>& part, double eps0) {
  double obj = 0.0;
  for (int i = 0; i < g.nodes(); ++i) {
    if (!part[i]) continue;
    double u = 0.0;
    for (int k = 0; k < g.objects(); ++k) u += g.demand.at(i, k) * f.xv(i, k);
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size(); ++a) {
      double disc = g.discount(g.dist.at(i, src[a]));
      for (int k = 0; k < g.objects(); ++k)
        u += g.demand.at(i, k) * disc * f.yv(i, static_cast<int>(a), k);
    }
    double margin = u - g.u0[i];
    if (margin < eps0) return -std::numeric_limits<double>::infinity();
    obj += std::log(margin);
  }
  return obj;
}

inline void central_gradient(const GameInstance& g, const StrategyVec& f,
                             const std::vector<bool>& part, StrategyVec& grad) {
  grad.v.assign(f.v.size(), 0.0);
  for (int i = 0; i < g.nodes(); ++i) {
    if (!part[i]) continue;
    double u = 0.0;
    for (int k = 0; k < g.objects(); ++k) u += g.demand.at(i, k) * f.xv(i, k);
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size(); ++a) {
      double disc = g.discount(g.dist.at(i, src[a]));
      for (int k = 0; k < g.objects(); ++k)
        u += g.demand.at(i, k) * disc * f.yv(i, static_cast<int>(a), k);
    }
    double margin = u - g.u0[i];
    for (int k = 0; k < g.objects(); ++k) grad.xref(i, k) = g.demand.at(i, k) / margin;
    for (size_t a = 0; a < src.size(); ++a) {
      double disc = g.discount(g.dist.at(i, src[a]));
      for (int k = 0; k < g.objects(); ++k)
        grad.yref(i, static_cast<int>(a), k) = g.demand.at(i, k) * disc / margin;
    }
  }
}

// Exact 1-D ascent along pairwise cache swaps x_{j,k1} += t, x_{j,k2} -= t
// with the coupled retrieval coordinates moved in lockstep. Near degenerate
// optima the projected-gradient path crawls because every productive x move
// must drag y = x coupling followers along; these joint directions keep the
// iterate feasible and the margins linear in t, so each move is an exact
// concave line search. Returns the total objective improvement.
inline double refine_swaps(const GameInstance& g, detail::StrategyVec& f,
                           const std::vector<bool>& part, std::vector<double>& m_cur,
                           int max_sweeps = 30) {
  const int n = g.nodes(), K = g.objects();
  const double act = 1e-9;
  double total = 0.0;
  struct Delta {
    double* coord;
    double sign;
  };
  std::vector<Delta> deltas;
  std::vector<double> dm(n);

  // Attaches the coupled-retrieval followers of one x change and tightens the
  // step bound; returns false when the move is already blocked.
  auto add_x_change = [&](int j, int k, double sign, double& t_max) {
    double xj = f.xv(j, k);
    deltas.push_back({&f.xref(j, k), sign});
    if (part[j]) dm[j] += sign * g.demand.at(j, k);
    t_max = std::min(t_max, sign > 0 ? 1.0 - xj : xj);
    if (t_max <= act) return false;
    for (int i : g.nbhd[j].co_members) {
      const auto& src = g.sources(i);
      int a = -1;
      for (size_t q = 0; q < src.size(); ++q)
        if (src[q] == j) a = static_cast<int>(q);
      if (a < 0) continue;
      double disc = g.discount(g.dist.at(i, j));
      double y = f.yv(i, a, k);
      if (sign < 0) {
        if (xj - y <= act) {
          // coupled: y must follow x down
          deltas.push_back({&f.yref(i, a, k), -1.0});
          if (part[i]) dm[i] -= g.demand.at(i, k) * disc;
          t_max = std::min(t_max, y);
        } else {
          t_max = std::min(t_max, xj - y);
        }
      } else if (part[i] && y >= xj - act) {
        double row = 0.0;
        for (size_t b = 0; b < src.size(); ++b) row += f.yv(i, static_cast<int>(b), k);
        double slack = 1.0 - row;
        if (slack > act) {
          // coupled at the cap with budget room: ride x up
          deltas.push_back({&f.yref(i, a, k), 1.0});
          dm[i] += g.demand.at(i, k) * disc;
          t_max = std::min(t_max, slack);
        }
      }
      if (t_max <= act) return false;
    }
    return true;
  };

  // Exact concave line search over t in [0, t_max], applied when improving.
  auto try_move = [&](double t_max) {
    double d0 = 0.0;
    for (int i = 0; i < n; ++i)
      if (part[i] && dm[i] != 0.0) d0 += dm[i] / m_cur[i];
    if (d0 <= 1e-12) return 0.0;
    for (int i = 0; i < n; ++i)
      if (part[i] && dm[i] < 0.0) t_max = std::min(t_max, -0.999999 * m_cur[i] / dm[i]);
    if (t_max <= 0.0) return 0.0;
    auto dphi = [&](double t) {
      double sacc = 0.0;
      for (int i = 0; i < n; ++i)
        if (part[i] && dm[i] != 0.0) sacc += dm[i] / (m_cur[i] + t * dm[i]);
      return sacc;
    };
    double t_best = t_max;
    if (dphi(t_max) < 0.0) {
      double lo = 0.0, hi = t_max;
      for (int bis = 0; bis < 60; ++bis) {
        double mid = 0.5 * (lo + hi);
        (dphi(mid) > 0.0 ? lo : hi) = mid;
      }
      t_best = 0.5 * (lo + hi);
    }
    if (t_best <= 0.0) return 0.0;
    double gain = 0.0;
    for (int i = 0; i < n; ++i)
      if (part[i] && dm[i] != 0.0) gain += std::log1p(t_best * dm[i] / m_cur[i]);
    if (!(gain > 1e-15)) return 0.0;
    for (const Delta& d : deltas) *d.coord += d.sign * t_best;
    for (int i = 0; i < n; ++i)
      if (part[i]) m_cur[i] += t_best * dm[i];
    return gain;
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double sweep_gain = 0.0;
    // single-node swaps: x_{j,k1} up, x_{j,k2} down
    for (int j = 0; j < n; ++j) {
      if (!part[j]) continue;  // pinned rows stay put
      for (int k1 = 0; k1 < K; ++k1)
        for (int k2 = 0; k2 < K; ++k2) {
          if (k1 == k2) continue;
          deltas.clear();
          std::fill(dm.begin(), dm.end(), 0.0);
          double t_max = std::numeric_limits<double>::infinity();
          if (add_x_change(j, k1, 1.0, t_max) && add_x_change(j, k2, -1.0, t_max))
            sweep_gain += try_move(t_max);
        }
    }
    // two-node exchange cycles: j swaps k1 for k2 while l swaps k2 for k1;
    // these migrate cached copies between nodes, which no per-node swap can
    for (int j = 0; j < n; ++j) {
      if (!part[j]) continue;
      for (int l = j + 1; l < n; ++l) {
        if (!part[l]) continue;
        for (int k1 = 0; k1 < K; ++k1)
          for (int k2 = 0; k2 < K; ++k2) {
            if (k1 == k2) continue;
            deltas.clear();
            std::fill(dm.begin(), dm.end(), 0.0);
            double t_max = std::numeric_limits<double>::infinity();
            if (add_x_change(j, k1, 1.0, t_max) && add_x_change(j, k2, -1.0, t_max) &&
                add_x_change(l, k2, 1.0, t_max) && add_x_change(l, k1, -1.0, t_max))
              sweep_gain += try_move(t_max);
          }
      }
    }
    total += sweep_gain;
    if (sweep_gain < 1e-14) break;
  }
  return total;
}

// Dense Cholesky of H in place (row-major). Returns false only when the
// matrix loses positive definiteness beyond repair.
inline bool chol_factor(std::vector<double>& H, int N) {
  for (int j = 0; j < N; ++j) {
    double d = H[static_cast<size_t>(j) * N + j];
    for (int p = 0; p < j; ++p) {
      double l = H[static_cast<size_t>(j) * N + p];
      d -= l * l;
    }
    if (d <= 0.0) return false;
    d = std::sqrt(d);
    H[static_cast<size_t>(j) * N + j] = d;
    for (int r = j + 1; r < N; ++r) {
      double s = H[static_cast<size_t>(r) * N + j];
      for (int p = 0; p < j; ++p)
        s -= H[static_cast<size_t>(r) * N + p] * H[static_cast<size_t>(j) * N + p];
      H[static_cast<size_t>(r) * N + j] = s / d;
    }
  }
  return true;
}

// Forward/back substitution with a factor produced by chol_factor.
inline void chol_back(const std::vector<double>& H, std::vector<double>& b, int N) {
  for (int r = 0; r < N; ++r) {
    double s = b[r];
    for (int p = 0; p < r; ++p) s -= H[static_cast<size_t>(r) * N + p] * b[p];
    b[r] = s / H[static_cast<size_t>(r) * N + r];
  }
  for (int r = N - 1; r >= 0; --r) {
    double s = b[r];
    for (int p = r + 1; p < N; ++p) s -= H[static_cast<size_t>(p) * N + r] * b[p];
    b[r] = s / H[static_cast<size_t>(r) * N + r];
  }
}

inline bool chol_solve(std::vector<double>& H, std::vector<double>& b, int N) {
  if (!chol_factor(H, N)) return false;
  chol_back(H, b, N);
  return true;
}

// Second-order fallback for degenerate faces the first-order path cannot
// leave: a log-barrier interior-point pass (damped Newton on
// t*obj + sum log slacks, t increased geometrically). The barrier point comes
// with exact multipliers nu = 1/(t*slack), so certification is direct.
inline bool barrier_refine(const GameInstance& g, const std::vector<bool>& part,
                           StrategyVec& f, double tol, KKTMultipliers& mult) {
  const int n = g.nodes(), K = g.objects();
  std::vector<int> vidx(f.v.size(), -1);
  std::vector<size_t> coords;
  std::vector<int> kof;  // object id of each free coordinate
  for (int i = 0; i < n; ++i) {
    if (!part[i]) continue;
    for (int k = 0; k < K; ++k) {
      size_t o = static_cast<size_t>(&f.xref(i, k) - f.v.data());
      vidx[o] = static_cast<int>(coords.size());
      coords.push_back(o);
      kof.push_back(k);
    }
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size(); ++a)
      for (int k = 0; k < K; ++k) {
        if (!part[src[a]] && f.xv(src[a], k) <= 1e-12) {
          f.yref(i, static_cast<int>(a), k) = 0.0;  // source pinned empty: y fixed
          continue;
        }
        size_t o = static_cast<size_t>(&f.yref(i, static_cast<int>(a), k) - f.v.data());
        vidx[o] = static_cast<int>(coords.size());
        coords.push_back(o);
        kof.push_back(k);
      }
  }
  const int N = static_cast<int>(coords.size());
  if (N == 0) return false;

  // constraints a.v <= rhs, tagged with their multiplier slot
  enum Kind { kAlpha, kBeta, kGamma, kMu, kLambda, kDelta };
  struct Con {
    int kind, i, k, a;
    std::vector<std::pair<int, double>> terms;
    double rhs;
  };
  std::vector<Con> cons;
  auto xid = [&](int i, int k) { return vidx[static_cast<size_t>(&f.xref(i, k) - f.v.data())]; };
  auto yid = [&](int i, int a, int k) {
    return vidx[static_cast<size_t>(&f.yref(i, a, k) - f.v.data())];
  };
  for (int i = 0; i < n; ++i) {
    if (!part[i]) continue;
    Con cap{kAlpha, i, 0, 0, {}, g.capacities[i]};
    for (int k = 0; k < K; ++k) {
      cap.terms.push_back({xid(i, k), 1.0});
      cons.push_back({kGamma, i, k, 0, {{xid(i, k), 1.0}}, 1.0});
      cons.push_back({kMu, i, k, 0, {{xid(i, k), -1.0}}, 0.0});
    }
    cons.push_back(std::move(cap));
    const auto& src = g.sources(i);
    const int msz = static_cast<int>(src.size());
    for (int k = 0; k < K; ++k) {
      Con row{kBeta, i, k, 0, {}, 1.0};
      for (int a = 0; a < msz; ++a) {
        int yv = yid(i, a, k);
        if (yv < 0) continue;
        row.terms.push_back({yv, 1.0});
        cons.push_back({kDelta, i, k, a, {{yv, -1.0}}, 0.0});
        if (part[src[a]])
          cons.push_back({kLambda, i, k, a, {{yv, 1.0}, {xid(src[a], k), -1.0}}, 0.0});
        else
          cons.push_back({kLambda, i, k, a, {{yv, 1.0}}, f.xv(src[a], k)});
      }
      if (!row.terms.empty()) cons.push_back(std::move(row));
    }
  }
  const int M = static_cast<int>(cons.size());

  // margins: m_i = wrow_i . v - u0_i over the free coordinates
  std::vector<int> plist;
  std::vector<std::vector<std::pair<int, double>>> wrow(n);
  for (int i = 0; i < n; ++i) {
    if (!part[i]) continue;
    plist.push_back(i);
    for (int k = 0; k < K; ++k) wrow[i].push_back({xid(i, k), g.demand.at(i, k)});
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size(); ++a) {
      double disc = g.discount(g.dist.at(i, src[a]));
      for (int k = 0; k < K; ++k) {
        int yv = yid(i, static_cast<int>(a), k);
        if (yv >= 0) wrow[i].push_back({yv, g.demand.at(i, k) * disc});
      }
    }
  }

  std::vector<double> v(N);
  for (int q = 0; q < N; ++q) v[q] = f.v[coords[q]];

  // strictly interior center, blended in just enough to open every slack
  std::vector<double> vc(N);
  for (int i = 0; i < n; ++i) {
    if (!part[i]) continue;
    double xc = 0.9 * std::min(1.0, g.capacities[i] / std::max(1, K));
    for (int k = 0; k < K; ++k) vc[xid(i, k)] = xc;
  }
  for (int i = 0; i < n; ++i) {
    if (!part[i]) continue;
    const auto& src = g.sources(i);
    const int msz = static_cast<int>(src.size());
    for (size_t a = 0; a < src.size(); ++a)
      for (int k = 0; k < K; ++k) {
        int q = yid(i, static_cast<int>(a), k);
        if (q < 0) continue;
        double capv = part[src[a]] ? vc[xid(src[a], k)] : f.xv(src[a], k);
        vc[q] = 0.9 * std::min(capv, 1.0 / msz);
      }
  }
  auto margin_at = [&](const std::vector<double>& vv, int i) {
    double m = -g.u0[i];
    for (const auto& [q, w] : wrow[i]) m += w * vv[q];
    return m;
  };
  auto slack_of = [&](const std::vector<double>& vv, const Con& c) {
    double s = c.rhs;
    for (const auto& [q, cf] : c.terms) s -= cf * vv[q];
    return s;
  };
  {
    std::vector<double> vt(N);
    bool found = false;
    for (double th : {0.05, 0.02, 0.01, 0.003, 0.001, 0.0003}) {
      for (int q = 0; q < N; ++q) vt[q] = (1.0 - th) * v[q] + th * vc[q];
      bool ok = true;
      for (int i : plist)
        if (margin_at(vt, i) <= 0.0) ok = false;
      for (int c = 0; c < M && ok; ++c)
        if (slack_of(vt, cons[c]) <= 0.0) ok = false;
      if (ok) {
        v = vt;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }

  std::vector<double> slack(M), marg(n, 1.0), grad(N), d(N);
  auto refresh = [&](const std::vector<double>& vv) {
    for (int c = 0; c < M; ++c) slack[c] = slack_of(vv, cons[c]);
    for (int i : plist) marg[i] = margin_at(vv, i);
  };
  auto phi = [&](double t) {
    double p = 0.0;
    for (int i : plist) {
      if (marg[i] <= 0.0) return -std::numeric_limits<double>::infinity();
      p += t * std::log(marg[i]);
    }
    for (int c = 0; c < M; ++c) {
      if (slack[c] <= 0.0) return -std::numeric_limits<double>::infinity();
      p += std::log(slack[c]);
    }
    return p;
  };
  refresh(v);

  // The Hessian splits as B + U diag(sigma) U^T. Every bound, coupling, and
  // retrieval-row term touches variables of a single object, so B is block-
  // diagonal over objects (blocks of size <= |V|(1+max sources)) and factors
  // exactly. U holds only the capacity rows and margin vectors — at most 2|V|
  // Woodbury columns — which keeps the capacitance system small and, with the
  // huge-curvature retrieval rows handled inside B, well conditioned even on
  // the last barrier stage.
  std::vector<int> singleton, couple, brow, ucap;  // constraint ids by role
  std::vector<int> couple_y(M, -1), couple_x(M, -1);
  for (int c = 0; c < M; ++c) {
    const auto& tm = cons[c].terms;
    if (tm.size() == 1) {
      singleton.push_back(c);
    } else if (cons[c].kind == kLambda) {
      couple.push_back(c);
      for (const auto& [q, cf] : tm) (cf > 0 ? couple_y[c] : couple_x[c]) = q;
    } else if (cons[c].kind == kBeta) {
      brow.push_back(c);
    } else {
      ucap.push_back(c);
    }
  }
  std::vector<std::vector<int>> blockvars(K);
  std::vector<int> bpos(N);
  for (int q = 0; q < N; ++q) {
    bpos[q] = static_cast<int>(blockvars[kof[q]].size());
    blockvars[kof[q]].push_back(q);
  }
  const int mcols = static_cast<int>(ucap.size() + plist.size());
  std::vector<double> sdiag(N), soff(M), sg(N), Z(static_cast<size_t>(mcols) * N);
  std::vector<double> uden(N), G, rhs(mcols), gscale(mcols);
  std::vector<std::vector<double>> blocks(K), bscale(K);
  std::vector<double> bbuf;

  auto s_solve = [&](const std::vector<double>& r, double* z) {
    for (int k = 0; k < K; ++k) {
      const auto& bv = blockvars[k];
      const auto& sc = bscale[k];
      const int nb = static_cast<int>(bv.size());
      if (nb == 0) continue;
      bbuf.resize(nb);
      for (int p = 0; p < nb; ++p) bbuf[p] = r[bv[p]] * sc[p];
      chol_back(blocks[k], bbuf, nb);
      for (int p = 0; p < nb; ++p) z[bv[p]] = bbuf[p] * sc[p];
    }
  };

  double t_final = 10.0 / tol;
  for (double t = 100.0; t <= t_final * 10.0; t *= 10.0) {
    bool final_stage = 1.0 / t <= 0.1 * tol;
    double gtol = 0.1 * tol * t;
    double gprev = std::numeric_limits<double>::infinity();
    int gflat = 0;
    for (int nit = 0; nit < 100; ++nit) {
      std::fill(grad.begin(), grad.end(), 0.0);
      for (int i : plist) {
        double gm = t / marg[i];
        for (const auto& [q, w] : wrow[i]) grad[q] += gm * w;
      }
      for (int c = 0; c < M; ++c) {
        double gs = 1.0 / slack[c];
        for (const auto& [q, cf] : cons[c].terms) grad[q] -= gs * cf;
      }
      double gmax = 0.0;
      for (double gq : grad) gmax = std::max(gmax, std::abs(gq));
#ifdef FINCACHE_BARRIER_DEBUG
      if (final_stage)
        std::fprintf(stderr, "t=%.0e nit=%d gmax=%.3e gtol=%.3e\n", t, nit, gmax, gtol);
#endif
      if (final_stage) {
        if (gmax <= gtol) break;
        // numerical floor: no meaningful gradient decrease over several steps
        if (gmax > 0.95 * gprev && ++gflat >= 5) break;
        if (gmax < 0.95 * gprev) gflat = 0;
        gprev = std::min(gprev, gmax);
      }

      std::fill(sdiag.begin(), sdiag.end(), 0.0);
      for (int c : singleton) {
        double hs = 1.0 / (slack[c] * slack[c]);
        sdiag[cons[c].terms[0].first] += hs;
      }
      for (int c : couple) {
        double hs = 1.0 / (slack[c] * slack[c]);
        sdiag[couple_y[c]] += hs;
        sdiag[couple_x[c]] += hs;
        soff[c] = -hs;
      }
      // assemble and factor the per-object blocks of B
      for (int k = 0; k < K; ++k) {
        const auto& bv = blockvars[k];
        const int nb = static_cast<int>(bv.size());
        blocks[k].assign(static_cast<size_t>(nb) * nb, 0.0);
        for (int p = 0; p < nb; ++p) blocks[k][static_cast<size_t>(p) * nb + p] = sdiag[bv[p]];
      }
      for (int c : couple) {
        auto& B = blocks[kof[couple_y[c]]];
        const int nb = static_cast<int>(blockvars[kof[couple_y[c]]].size());
        int py = bpos[couple_y[c]], px = bpos[couple_x[c]];
        B[static_cast<size_t>(py) * nb + px] += soff[c];
        B[static_cast<size_t>(px) * nb + py] += soff[c];
      }
      for (int c : brow) {
        double hs = 1.0 / (slack[c] * slack[c]);
        const auto& tm = cons[c].terms;
        auto& B = blocks[kof[tm[0].first]];
        const int nb = static_cast<int>(blockvars[kof[tm[0].first]].size());
        for (const auto& [q, cf] : tm) {
          double scf = hs * cf;
          for (const auto& [q2, cf2] : tm)
            B[static_cast<size_t>(bpos[q]) * nb + bpos[q2]] += scf * cf2;
        }
      }
      for (int k = 0; k < K; ++k) {
        const int nb = static_cast<int>(blockvars[k].size());
        if (nb == 0) continue;
        auto& B = blocks[k];
        auto& sc = bscale[k];
        sc.resize(nb);
        for (int p = 0; p < nb; ++p) sc[p] = 1.0 / std::sqrt(B[static_cast<size_t>(p) * nb + p]);
        for (int p = 0; p < nb; ++p)
          for (int p2 = 0; p2 < nb; ++p2) B[static_cast<size_t>(p) * nb + p2] *= sc[p] * sc[p2];
        if (!chol_factor(B, nb)) return false;
      }
      auto col_terms = [&](int col) -> const std::vector<std::pair<int, double>>& {
        return col < static_cast<int>(ucap.size()) ? cons[ucap[col]].terms
                                                   : wrow[plist[col - ucap.size()]];
      };
      auto col_sigma = [&](int col) {
        if (col < static_cast<int>(ucap.size())) {
          double s = slack[ucap[col]];
          return 1.0 / (s * s);
        }
        double m = marg[plist[col - ucap.size()]];
        return t / (m * m);
      };
      auto h_mul_into = [&](std::vector<double>& out, const std::vector<double>& b) {
        for (int q = 0; q < N; ++q) out[q] = sdiag[q] * b[q];
        for (int c : couple) {
          out[couple_y[c]] += soff[c] * b[couple_x[c]];
          out[couple_x[c]] += soff[c] * b[couple_y[c]];
        }
        for (int c : brow) {
          double acc = 0.0;
          for (const auto& [q, cf] : cons[c].terms) acc += cf * b[q];
          acc /= slack[c] * slack[c];
          for (const auto& [q, cf] : cons[c].terms) out[q] += cf * acc;
        }
        for (int c = 0; c < mcols; ++c) {
          double acc = 0.0;
          for (const auto& [q, cf] : col_terms(c)) acc += cf * b[q];
          acc *= col_sigma(c);
          for (const auto& [q, cf] : col_terms(c)) out[q] += cf * acc;
        }
      };
      s_solve(grad, sg.data());
      // Z_c = B^{-1} u_c for every wide column
      auto fill_col = [&](int col, const std::vector<std::pair<int, double>>& terms) {
        std::fill(uden.begin(), uden.end(), 0.0);
        for (const auto& [q, cf] : terms) uden[q] = cf;
        s_solve(uden, &Z[static_cast<size_t>(col) * N]);
      };
      for (size_t c = 0; c < ucap.size(); ++c) fill_col(static_cast<int>(c), cons[ucap[c]].terms);
      for (size_t pi = 0; pi < plist.size(); ++pi)
        fill_col(static_cast<int>(ucap.size() + pi), wrow[plist[pi]]);
      G.assign(static_cast<size_t>(mcols) * mcols, 0.0);
      for (int c = 0; c < mcols; ++c) {
        for (int c2 = 0; c2 <= c; ++c2) {
          double acc = 0.0;
          const double* zc2 = &Z[static_cast<size_t>(c2) * N];
          for (const auto& [q, cf] : col_terms(c)) acc += cf * zc2[q];
          G[static_cast<size_t>(c) * mcols + c2] = acc;
          G[static_cast<size_t>(c2) * mcols + c] = acc;
        }
        G[static_cast<size_t>(c) * mcols + c] += 1.0 / col_sigma(c);
        double acc = 0.0;
        for (const auto& [q, cf] : col_terms(c)) acc += cf * sg[q];
        rhs[c] = acc;
      }
      for (int c = 0; c < mcols; ++c)
        gscale[c] = 1.0 / std::sqrt(G[static_cast<size_t>(c) * mcols + c]);
      for (int c = 0; c < mcols; ++c)
        for (int c2 = 0; c2 < mcols; ++c2) G[static_cast<size_t>(c) * mcols + c2] *= gscale[c] * gscale[c2];
      for (int c = 0; c < mcols; ++c) G[static_cast<size_t>(c) * mcols + c] += 1e-13;
      if (!chol_factor(G, mcols)) return false;
      auto wb_solve = [&](const std::vector<double>& b, std::vector<double>& out) {
        s_solve(b, out.data());
        for (int c = 0; c < mcols; ++c) {
          double acc = 0.0;
          for (const auto& [q, cf] : col_terms(c)) acc += cf * out[q];
          rhs[c] = acc * gscale[c];
        }
        chol_back(G, rhs, mcols);
        for (int c = 0; c < mcols; ++c) rhs[c] *= gscale[c];
        for (int c = 0; c < mcols; ++c) {
          const double* zc = &Z[static_cast<size_t>(c) * N];
          for (int q = 0; q < N; ++q) out[q] -= rhs[c] * zc[q];
        }
      };
      // CG on H d = grad preconditioned by the Woodbury solve: one or two
      // sweeps when the split is accurate, still convergent at large t where
      // plain iterative refinement on the split diverges
      std::vector<double> resv(N), zv(N), pv(N), hp(N), dbest(N);
      std::fill(d.begin(), d.end(), 0.0);
      double gn2 = 0.0;
      for (int q = 0; q < N; ++q) { resv[q] = grad[q]; gn2 += grad[q] * grad[q]; }
      double best = std::numeric_limits<double>::infinity();
      double rz = 0.0;
      for (int cit = 0; cit < 40; ++cit) {
        double rn2 = 0.0;
        for (int q = 0; q < N; ++q) rn2 += resv[q] * resv[q];
#ifdef FINCACHE_BARRIER_DEBUG
        if (final_stage)
          std::fprintf(stderr, "t=%.0e nit=%d cg=%d relres=%.3e\n", t, nit, cit,
                       std::sqrt(rn2 / gn2));
#endif
        if (rn2 < best) { best = rn2; dbest = d; }
        if (rn2 <= 1e-20 * gn2) break;
        wb_solve(resv, zv);
        double rznew = 0.0;
        for (int q = 0; q < N; ++q) rznew += resv[q] * zv[q];
        if (!(rznew > 0.0)) break;  // preconditioner lost definiteness
        if (cit == 0) {
          pv = zv;
        } else {
          double cgb = rznew / rz;
          for (int q = 0; q < N; ++q) pv[q] = zv[q] + cgb * pv[q];
        }
        rz = rznew;
        h_mul_into(hp, pv);
        double php = 0.0;
        for (int q = 0; q < N; ++q) php += pv[q] * hp[q];
        if (!(php > 0.0)) break;
        double ac = rz / php;
        for (int q = 0; q < N; ++q) {
          d[q] += ac * pv[q];
          resv[q] -= ac * hp[q];
        }
      }
      {
        double rn2 = 0.0;
        for (int q = 0; q < N; ++q) rn2 += resv[q] * resv[q];
        if (rn2 >= best) d = dbest;
      }
      double gd = 0.0;
      for (int q = 0; q < N; ++q) gd += grad[q] * d[q];
      // Newton decrement: intermediate stages only need rough centering
      if (!final_stage && gd < 0.5) break;
      // longest step keeping slacks and margins positive, then backtracking
      double amax = 1.0;
      for (int c = 0; c < M; ++c) {
        double dd = 0.0;
        for (const auto& [q, cf] : cons[c].terms) dd += cf * d[q];
        if (dd > 0.0) amax = std::min(amax, 0.99 * slack[c] / dd);
      }
      for (int i : plist) {
        double dd = 0.0;
        for (const auto& [q, w] : wrow[i]) dd += w * d[q];
        if (dd < 0.0) amax = std::min(amax, -0.99 * marg[i] / dd);
      }
      double base = phi(t), alpha = amax;
      std::vector<double> vt(N);
      bool moved = false;
      // deep in the quadratic regime the predicted gain drops below the
      // roundoff noise of phi, so the backtracking test cannot see it; take
      // the damped Newton step outright (the flat-gradient guard above stops
      // the stage if this ever stops helping)
      if (final_stage && gd > 0.0 && gd < 1e-9 * std::max(1.0, std::abs(base))) {
        for (int q = 0; q < N; ++q) v[q] += alpha * d[q];
        refresh(v);
        continue;
      }
      while (alpha > 1e-14) {
        for (int q = 0; q < N; ++q) vt[q] = v[q] + alpha * d[q];
        refresh(vt);
        if (phi(t) >= base + 0.01 * alpha * gd) {
          v = vt;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) {
#ifdef FINCACHE_BARRIER_DEBUG
        std::fprintf(stderr, "t=%.0e nit=%d STUCK gd=%.3e\n", t, nit, gd);
#endif
        refresh(v);
        break;
      }
    }
    if (1.0 / t <= 0.1 * tol) {
      // multipliers straight off the barrier: nu = 1/(t * slack)
      mult.alpha.assign(n, 0.0);
      mult.beta.assign(static_cast<size_t>(n) * K, 0.0);
      mult.gamma.assign(static_cast<size_t>(n) * K, 0.0);
      mult.mu.assign(static_cast<size_t>(n) * K, 0.0);
      mult.lambda.assign(n, {});
      mult.delta.assign(n, {});
      for (int i = 0; i < n; ++i) {
        const int msz = static_cast<int>(g.sources(i).size());
        mult.lambda[i].assign(static_cast<size_t>(msz) * K, 0.0);
        mult.delta[i].assign(static_cast<size_t>(msz) * K, 0.0);
      }
      for (int c = 0; c < M; ++c) {
        double nu = 1.0 / (t * std::max(slack[c], 1e-300));
        const Con& cc = cons[c];
        size_t ik = static_cast<size_t>(cc.i) * K + cc.k;
        size_t ak = static_cast<size_t>(cc.a) * K + cc.k;
        switch (cc.kind) {
          case kAlpha: mult.alpha[cc.i] = nu; break;
          case kBeta: mult.beta[ik] = nu; break;
          case kGamma: mult.gamma[ik] = nu; break;
          case kMu: mult.mu[ik] = nu; break;
          case kLambda: mult.lambda[cc.i][ak] = nu; break;
          case kDelta: mult.delta[cc.i][ak] = nu; break;
        }
      }
      for (int q = 0; q < N; ++q) f.v[coords[q]] = v[q];
      // y coordinates pinned at an empty source still need their equation
      // balanced: both y = 0 and the coupling are active there
      for (int i = 0; i < n; ++i) {
        if (!part[i]) continue;
        const auto& src = g.sources(i);
        for (size_t a = 0; a < src.size(); ++a)
          for (int k = 0; k < K; ++k) {
            if (yid(i, static_cast<int>(a), k) >= 0) continue;
            double dd = g.demand.at(i, k) * g.discount(g.dist.at(i, src[a])) / marg[i];
            double r = dd - mult.beta[static_cast<size_t>(i) * K + k];
            if (r >= 0.0)
              mult.lambda[i][a * K + k] = r;
            else
              mult.delta[i][a * K + k] = -r;
          }
      }
      return true;
    }
  }
  return false;
}

}  // namespace detail

// Strictly feasible start: greedy local placement blended toward a uniform
// spread, with exact greedy retrieval on top. Blending keeps every object
// minimally present so any participating node has a positive margin.
inline CachingStrategy initial_strategy(const GameInstance& g, double blend = 0.0) {
  CachingStrategy s = CachingStrategy::zeros(g);
  for (int i = 0; i < g.nodes(); ++i) {
    fill_greedy_local(g, s, i);
    if (blend > 0) {
      double uniform = std::min(1.0, g.capacities[i] / std::max(1, g.objects()));
      for (int k = 0; k < g.objects(); ++k)
        s.xv(i, k) = (1.0 - blend) * s.xv(i, k) + blend * uniform;
    }
  }
  fill_greedy_retrieval(g, s, RetrievalMode::kModel);
  return s;
}

// Projected gradient ascent with backtracking on the Eq-(2) objective over
// the polyhedron (5)-(9). Projection is the exact Euclidean projection
// (Dykstra over the constraint blocks); stopping is by KKT residual.
inline SolveReport solve_central(const GameInstance& g, double tol = 1e-6, int max_iter = 4000) {
  SolveReport rep;
  std::vector<bool> part = participants(g);
  // Iteratively pin nodes whose margin cannot be made positive at the start.
  CachingStrategy s0;
  for (int attempt = 0; attempt < g.nodes() + 1; ++attempt) {
    double blend = 0.0;
    bool ok = false;
    for (double b : {0.0, 0.02, 0.1}) {
      s0 = initial_strategy(g, b);
      ok = true;
      for (int i = 0; i < g.nodes() && ok; ++i)
        if (part[i] && utility(g, s0, i) - g.u0[i] < g.eps0) ok = false;
      blend = b;
      if (ok) break;
    }
    (void)blend;
    if (ok) break;
    // pin the worst node and retry
    int worst = -1;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < g.nodes(); ++i) {
      if (!part[i]) continue;
      double mg = utility(g, s0, i) - g.u0[i];
      if (mg < worst_margin) {
        worst_margin = mg;
        worst = i;
      }
    }
    if (worst < 0) break;
    part[worst] = false;
  }
  rep.participants = part;

  detail::StrategyVec f = detail::StrategyVec::from(s0);
  // pinned nodes keep their greedy row; retrieval rows of non-participants are
  // harmless but we zero them for a clean report
  for (int i = 0; i < g.nodes(); ++i)
    if (!part[i]) {
      CachingStrategy tmp = CachingStrategy::zeros(g);
      fill_greedy_local(g, tmp, i);
      for (int k = 0; k < g.objects(); ++k) f.xref(i, k) = tmp.xv(i, k);
      const auto& src = g.sources(i);
      for (size_t a = 0; a < src.size(); ++a)
        for (int k = 0; k < g.objects(); ++k) f.yref(i, static_cast<int>(a), k) = 0.0;
    }

  // per-participant margin, linear in the strategy vector
  auto margins = [&](const detail::StrategyVec& fv, std::vector<double>& m) {
    m.assign(g.nodes(), 0.0);
    for (int i = 0; i < g.nodes(); ++i) {
      if (!part[i]) continue;
      double u = 0.0;
      for (int k = 0; k < g.objects(); ++k) u += g.demand.at(i, k) * fv.xv(i, k);
      const auto& src = g.sources(i);
      for (size_t a = 0; a < src.size(); ++a) {
        double disc = g.discount(g.dist.at(i, src[a]));
        for (int k = 0; k < g.objects(); ++k)
          u += g.demand.at(i, k) * disc * fv.yv(i, static_cast<int>(a), k);
      }
      m[i] = u - g.u0[i];
    }
  };

  double obj = detail::central_objective(g, f, part, 0.0);
  rep.objective_history.push_back(obj);
  detail::StrategyVec grad = f;
  std::vector<double> m_cur, m_trial;
  margins(f, m_cur);
  double step = 1.0;
  double last_check_obj = obj;
  const int check_every = 10;
  for (int iter = 1; iter <= max_iter; ++iter) {
    rep.iterations = iter;
    detail::central_gradient(g, f, part, grad);
    // one exact projection, then an exact line search along the segment to
    // the projected point; the segment direction is always an ascent
    // direction, and the objective along it is concave in the margins
    detail::StrategyVec trial = f;
    for (size_t t = 0; t < trial.v.size(); ++t) trial.v[t] += step * grad.v[t];
    project_feasible_exact(g, trial);
    for (int i = 0; i < g.nodes(); ++i)
      if (!part[i]) {
        for (int k = 0; k < g.objects(); ++k) trial.xref(i, k) = f.xv(i, k);
        // keep retrievers feasible against the restored pinned row
        for (int r : g.nbhd[i].co_members) {
          const auto& src = g.sources(r);
          for (size_t a = 0; a < src.size(); ++a)
            if (src[a] == i)
              for (int k = 0; k < g.objects(); ++k) {
                double& yr = trial.yref(r, static_cast<int>(a), k);
                yr = std::min(yr, trial.xv(i, k));
              }
        }
      }
    margins(trial, m_trial);
    double move = 0.0;
    for (size_t q = 0; q < trial.v.size(); ++q)
      move = std::max(move, std::abs(trial.v[q] - f.v[q]));
    // phi(t) = sum ln(m_i + t dm_i) on [0, t_hi], keeping every margin positive
    double t_hi = 1.0;
    for (int i = 0; i < g.nodes(); ++i) {
      if (!part[i]) continue;
      double dm = m_trial[i] - m_cur[i];
      if (dm < 0.0) t_hi = std::min(t_hi, -0.999999 * m_cur[i] / dm);
    }
    auto dphi = [&](double t) {
      double s = 0.0;
      for (int i = 0; i < g.nodes(); ++i) {
        if (!part[i]) continue;
        double dm = m_trial[i] - m_cur[i];
        s += dm / (m_cur[i] + t * dm);
      }
      return s;
    };
    double t_best = t_hi;
    if (t_hi > 0.0 && dphi(t_hi) < 0.0) {
      double lo = 0.0, hi = t_hi;
      for (int bis = 0; bis < 80; ++bis) {
        double mid = 0.5 * (lo + hi);
        (dphi(mid) > 0.0 ? lo : hi) = mid;
      }
      t_best = 0.5 * (lo + hi);
    }
    bool accepted = false;
    if (move > 1e-13 && t_best > 0.0) {
      double new_obj = 0.0;
      bool pos = true;
      for (int i = 0; i < g.nodes() && pos; ++i) {
        if (!part[i]) continue;
        double m = m_cur[i] + t_best * (m_trial[i] - m_cur[i]);
        if (m <= 0.0)
          pos = false;
        else
          new_obj += std::log(m);
      }
      if (pos && new_obj >= obj) {
        for (size_t q = 0; q < f.v.size(); ++q)
          f.v[q] += t_best * (trial.v[q] - f.v[q]);
        for (int i = 0; i < g.nodes(); ++i)
          if (part[i]) m_cur[i] += t_best * (m_trial[i] - m_cur[i]);
        obj = new_obj;
        accepted = true;
        // step adaptation: projection-limited moves can take longer steps,
        // curvature-limited ones shorter
        if (t_best >= 0.99)
          step = std::min(step * 2.0, 64.0);  // distant trials only slow the projection down
        else if (t_best < 0.1)
          step = std::max(step * 0.5, 1e-8);
      }
    }
    rep.objective_history.push_back(obj);
    bool stalled = !accepted;
    if (iter % check_every == 0 || stalled || iter == max_iter) {
      double gain = detail::refine_swaps(g, f, part, m_cur);
      if (gain != 0.0) {
        margins(f, m_cur);
        double fresh = 0.0;
        for (int i = 0; i < g.nodes(); ++i)
          if (part[i]) fresh += std::log(m_cur[i]);
        obj = fresh;
      }
      if (gain > 1e-12) stalled = false;  // swaps still make progress
      // a whole window of sub-1e-11 total progress is a crawl, not progress
      if (iter > check_every && obj - last_check_obj < 1e-11) stalled = true;
      last_check_obj = obj;
      // past this point the second-order fallback is cheaper than more
      // first-order sweeps, so treat the iterate as final if it won't certify
      if (iter >= 60) stalled = true;
      CachingStrategy cur = f.to(g);
      // retrieval polish: greedy y is the exact per-node argmax given x, so
      // it never lowers the objective; it also lands y on clean active sets
      // instead of the slightly-smeared rows the projection leaves behind
      CachingStrategy pol = cur;
      fill_greedy_retrieval(g, pol, RetrievalMode::kModel);
      for (int i = 0; i < g.nodes(); ++i)
        if (!part[i]) {
          const auto& src = g.sources(i);
          for (size_t a = 0; a < src.size(); ++a)
            for (int k = 0; k < g.objects(); ++k) pol.yv(i, static_cast<int>(a), k) = 0.0;
        }
      double pol_obj = 0.0;
      bool pol_ok = true;
      for (int i = 0; i < g.nodes() && pol_ok; ++i) {
        if (!part[i]) continue;
        double mg = utility(g, pol, i) - g.u0[i];
        if (mg <= 0.0)
          pol_ok = false;
        else
          pol_obj += std::log(mg);
      }
      // certify at the polished point, but keep iterating from the
      // unpolished one: snapping to a face vertex mid-run can stall the
      // line-search path
      double cur_obj = obj;
      if (pol_ok && pol_obj >= obj) {
        cur = std::move(pol);
        cur_obj = pol_obj;
      }
      KKTMultipliers m = recover_multipliers(g, cur, part);
      KKTReport kk = kkt_check(g, cur, m, part);
      if (kk.max_residual() <= tol || stalled || iter == max_iter) {
        if (kk.max_residual() > tol) {
          // first-order moves are exhausted; hand the face to the barrier pass
          detail::StrategyVec fb = f;
          KKTMultipliers bm;
          if (detail::barrier_refine(g, part, fb, tol, bm)) {
            CachingStrategy cand = fb.to(g);
            KKTReport kb = kkt_check(g, cand, bm, part);
            // least-squares multipliers can certify tighter than the raw
            // barrier ones when near-active normals carry the residual
            KKTReport kr = kkt_check(g, cand, recover_multipliers(g, cand, part), part);
            if (kr.max_residual() < kb.max_residual()) kb = std::move(kr);
            if (kb.max_residual() < kk.max_residual()) {
              double cobj = 0.0;
              bool pos = true;
              for (int i = 0; i < g.nodes() && pos; ++i) {
                if (!part[i]) continue;
                double mg = utility(g, cand, i) - g.u0[i];
                if (mg <= 0.0)
                  pos = false;
                else
                  cobj += std::log(mg);
              }
              if (pos) {
                cur = std::move(cand);
                kk = std::move(kb);
                cur_obj = cobj;
              }
            }
          }
        }
        rep.strategy = std::move(cur);
        rep.kkt = std::move(kk);
        rep.objective = cur_obj;
        rep.converged = kk.max_residual() <= tol;
        return rep;
      }
    } else if (!accepted) {
      break;
    }
  }
  CachingStrategy cur = f.to(g);
  KKTMultipliers m = recover_multipliers(g, cur, part);
  rep.kkt = kkt_check(g, cur, m, part);
  rep.objective = obj;
  rep.strategy = std::move(cur);
  rep.converged = rep.kkt.max_residual() <= tol;
  return rep;
}

}  // namespace fincache
