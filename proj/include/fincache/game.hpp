#pragma once

#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fincache/demand.hpp"
#include "fincache/topology.hpp"

namespace fincache {

enum class DiscountRule {
  kInverseHop,  // 1 / (l* + 1)
  kUnit,        // constant 1 (Fig-style satisfied-demand arithmetic)
};

// Everything a solver needs: graph, distances, neighborhoods, demand,
// capacities, radii, discount and the disagreement point.
struct GameInstance {
  Topology topology;
  DistanceMatrix dist;
  std::vector<Neighborhood> nbhd;
  DemandMatrix demand;
  Catalog catalog;
  std::vector<double> capacities;  // C_i in objects (unit-size convention)
  std::vector<int> radii;
  DiscountRule discount_rule = DiscountRule::kInverseHop;
  double eps0 = 1e-6;  // strict feasibility margin for U_i - u0_i
  std::vector<double> u0;

  int nodes() const { return topology.node_count; }
  int objects() const { return demand.objects; }

  double discount(int hops) const {
    return discount_rule == DiscountRule::kUnit ? 1.0 : 1.0 / (hops + 1.0);
  }

  // Neighbors of i sorted nearest-first (ties by id).
  const std::vector<int>& sources(int i) const { return nbhd[i].members; }
};

// Relaxed decision pair. y is stored per node over (source index, object),
// where source index follows GameInstance::sources(i).
struct CachingStrategy {
  int nodes = 0;
  int objects = 0;
  std::vector<double> x;                   // nodes x objects
  std::vector<std::vector<double>> y;      // y[i] has |N_i| * objects entries

  double xv(int i, int k) const { return x[static_cast<size_t>(i) * objects + k]; }
  double& xv(int i, int k) { return x[static_cast<size_t>(i) * objects + k]; }
  double yv(int i, int src_idx, int k) const {
    return y[i][static_cast<size_t>(src_idx) * objects + k];
  }
  double& yv(int i, int src_idx, int k) {
    return y[i][static_cast<size_t>(src_idx) * objects + k];
  }

  static CachingStrategy zeros(const GameInstance& g) {
    CachingStrategy s;
    s.nodes = g.nodes();
    s.objects = g.objects();
    s.x.assign(static_cast<size_t>(s.nodes) * s.objects, 0.0);
    s.y.resize(s.nodes);
    for (int i = 0; i < s.nodes; ++i)
      s.y[i].assign(g.sources(i).size() * static_cast<size_t>(s.objects), 0.0);
    return s;
  }
};

struct UtilityVector {
  std::vector<double> u;
  std::vector<double> u0;
};

// Eq-(3)-style utility: local term plus discounted retrieval term.
inline double utility(const GameInstance& g, const CachingStrategy& s, int i) {
  double u = 0.0;
  const int K = g.objects();
  // unit object size convention; sizes re-enter only in byte metrics
  for (int k = 0; k < K; ++k) u += g.demand.at(i, k) * s.xv(i, k);
  const auto& src = g.sources(i);
  for (size_t a = 0; a < src.size(); ++a) {
    double disc = g.discount(g.dist.at(i, src[a]));
    for (int k = 0; k < K; ++k) u += g.demand.at(i, k) * disc * s.yv(i, static_cast<int>(a), k);
  }
  return u;
}

// Local-only utility (first term of the utility; the Fig-1 "local view").
inline double local_utility(const GameInstance& g, const CachingStrategy& s, int i) {
  double u = 0.0;
  for (int k = 0; k < g.objects(); ++k) u += g.demand.at(i, k) * s.xv(i, k);
  return u;
}

inline std::vector<double> utilities(const GameInstance& g, const CachingStrategy& s) {
  std::vector<double> u(g.nodes());
  for (int i = 0; i < g.nodes(); ++i) u[i] = utility(g, s, i);
  return u;
}

// u0_i = sum of the C_i largest demand weights at node i (ties by object id;
// fractional capacities take a matching fraction of the marginal object).
inline std::vector<double> disagreement_point_for(const DemandMatrix& demand,
                                                  const std::vector<double>& capacities) {
  std::vector<double> u0(demand.nodes, 0.0);
  for (int i = 0; i < demand.nodes; ++i) {
    std::vector<int> order(demand.objects);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return demand.at(i, a) > demand.at(i, b); });
    double cap = capacities[i];
    for (int k : order) {
      if (cap <= 0) break;
      double take = std::min(1.0, cap);
      u0[i] += take * demand.at(i, k);
      cap -= take;
    }
  }
  return u0;
}

inline std::vector<double> disagreement_point(const GameInstance& g) {
  return disagreement_point_for(g.demand, g.capacities);
}

// Greedy local placement: top-C_i objects by demand weight, ties by id.
inline void fill_greedy_local(const GameInstance& g, CachingStrategy& s, int i) {
  std::vector<int> order(g.objects());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return g.demand.at(i, a) > g.demand.at(i, b); });
  double cap = g.capacities[i];
  for (int k = 0; k < g.objects(); ++k) s.xv(i, k) = 0.0;
  for (int k : order) {
    if (cap <= 0) break;
    double take = std::min(1.0, cap);
    s.xv(i, k) = take;
    cap -= take;
  }
}

enum class RetrievalMode {
  kModel,     // maximize the Eq-(3) utility: fill per object from the best
              // discounted source regardless of local placement
  kCoverage,  // satisfied-demand reading: retrieval budget is 1 - x_{i,k}
};

// Exact greedy y given x: per (i,k) fill from sources in nearest-first order
// under constraints (6)-(7). In coverage mode the budget is 1 - x_{i,k}.
inline void fill_greedy_retrieval(const GameInstance& g, CachingStrategy& s,
                                  RetrievalMode mode = RetrievalMode::kModel) {
  for (int i = 0; i < g.nodes(); ++i) {
    const auto& src = g.sources(i);
    for (int k = 0; k < g.objects(); ++k) {
      double budget = mode == RetrievalMode::kCoverage ? std::max(0.0, 1.0 - s.xv(i, k)) : 1.0;
      if (g.demand.at(i, k) <= 0.0) budget = 0.0;
      for (size_t a = 0; a < src.size(); ++a) {
        double take = std::min(budget, s.xv(src[a], k));
        s.yv(i, static_cast<int>(a), k) = take;
        budget -= take;
        if (budget <= 0) {
          for (size_t b = a + 1; b < src.size(); ++b) s.yv(i, static_cast<int>(b), k) = 0.0;
          break;
        }
      }
    }
  }
}

struct Violation {
  std::string constraint;  // "capacity", "retrieval_budget", "feasibility", "bounds_x", "bounds_y"
  int i = -1, j = -1, k = -1;
  double slack = 0.0;  // amount by which the inequality is violated
};

struct ViolationReport {
  std::vector<Violation> violations;
  bool empty() const { return violations.empty(); }
};

// Checks constraints (5)-(9) and reports each violation with its slack.
inline ViolationReport validate(const GameInstance& g, const CachingStrategy& s,
                                double tol = 1e-9) {
  ViolationReport rep;
  const int K = g.objects();
  for (int i = 0; i < g.nodes(); ++i) {
    double cap_sum = 0.0;
    for (int k = 0; k < K; ++k) {
      double xv = s.xv(i, k);
      cap_sum += xv;
      if (xv < -tol) rep.violations.push_back({"bounds_x", i, -1, k, -xv});
      if (xv > 1.0 + tol) rep.violations.push_back({"bounds_x", i, -1, k, xv - 1.0});
    }
    if (cap_sum > g.capacities[i] + tol)
      rep.violations.push_back({"capacity", i, -1, -1, cap_sum - g.capacities[i]});
    const auto& src = g.sources(i);
    for (int k = 0; k < K; ++k) {
      double row = 0.0;
      for (size_t a = 0; a < src.size(); ++a) {
        double yv = s.yv(i, static_cast<int>(a), k);
        row += yv;
        if (yv < -tol) rep.violations.push_back({"bounds_y", i, src[a], k, -yv});
        if (yv > 1.0 + tol) rep.violations.push_back({"bounds_y", i, src[a], k, yv - 1.0});
        double xjk = s.xv(src[a], k);
        if (yv > xjk + tol) rep.violations.push_back({"feasibility", i, src[a], k, yv - xjk});
      }
      if (row > 1.0 + tol) rep.violations.push_back({"retrieval_budget", i, -1, k, row - 1.0});
    }
  }
  return rep;
}

struct NegotiationBreakdown : std::runtime_error {
  int node;
  explicit NegotiationBreakdown(int i)
      : std::runtime_error("negotiation breakdown at node " + std::to_string(i)), node(i) {}
};

// Nodes that cannot strictly improve on u0 by collaborating are pinned to
// their greedy local strategy and excluded from the log objective.
inline std::vector<bool> participants(const GameInstance& g) {
  std::vector<bool> part(g.nodes(), false);
  for (int i = 0; i < g.nodes(); ++i) {
    for (int j : g.sources(i)) {
      if (g.capacities[j] <= 0) continue;
      for (int k = 0; k < g.objects(); ++k)
        if (g.demand.at(i, k) > 0) {
          part[i] = true;
          break;
        }
      if (part[i]) break;
    }
  }
  return part;
}

// Sum of ln(U_i - u0_i) over participating nodes (Eq. 2 form).
inline double nash_log_objective(const GameInstance& g, const CachingStrategy& s,
                                 const std::vector<bool>* participant_mask = nullptr) {
  double obj = 0.0;
  for (int i = 0; i < g.nodes(); ++i) {
    if (participant_mask && !(*participant_mask)[i]) continue;
    double margin = utility(g, s, i) - g.u0[i];
    if (margin <= 0) throw NegotiationBreakdown(i);
    obj += std::log(margin);
  }
  return obj;
}

inline GameInstance make_game(Topology t, DemandMatrix demand, Catalog catalog,
                              std::vector<double> capacities, std::vector<int> radii,
                              DiscountRule rule = DiscountRule::kInverseHop,
                              double eps0 = 1e-6) {
  GameInstance g;
  g.topology = std::move(t);
  g.dist = shortest_paths(g.topology);
  g.nbhd = neighborhoods(g.topology, g.dist, radii);
  g.demand = std::move(demand);
  g.catalog = std::move(catalog);
  g.capacities = std::move(capacities);
  g.radii = std::move(radii);
  g.discount_rule = rule;
  g.eps0 = eps0;
  g.u0 = disagreement_point(g);
  return g;
}

// The two-node, four-object instance from the worked example: C=2 per node,
// identical demand rows (3,2,2,1).
inline GameInstance fig1_game(DiscountRule rule = DiscountRule::kInverseHop) {
  Topology t = Topology::from_edges(2, {{0, 1}});
  DemandMatrix dm = DemandMatrix::zeros(2, 4);
  const double row[4] = {3, 2, 2, 1};
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 4; ++k) dm.at(i, k) = row[k];
  return make_game(std::move(t), std::move(dm), Catalog::uniform(4, 8.4), {2, 2}, {1, 1}, rule);
}

// Strategy serialization: x as CSV plus sparse (i, j, k, y) triples.
inline std::string strategy_to_csv(const GameInstance& g, const CachingStrategy& s) {
  std::ostringstream out;
  out.precision(17);
  out << "# x\n";
  for (int i = 0; i < s.nodes; ++i) {
    for (int k = 0; k < s.objects; ++k) out << (k ? "," : "") << s.xv(i, k);
    out << "\n";
  }
  out << "# y i,j,k,value\n";
  for (int i = 0; i < s.nodes; ++i) {
    const auto& src = g.sources(i);
    for (size_t a = 0; a < src.size(); ++a)
      for (int k = 0; k < s.objects; ++k)
        if (s.yv(i, static_cast<int>(a), k) != 0.0)
          out << i << "," << src[a] << "," << k << "," << s.yv(i, static_cast<int>(a), k) << "\n";
  }
  return out.str();
}

}  // namespace fincache
