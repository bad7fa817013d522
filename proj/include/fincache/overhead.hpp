#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fincache/topology.hpp"

namespace fincache {

struct OverheadParams {
  double c = 1.0;        // messages per exchanged vector entry batch
  int catalog_size = 0;  // |O|
  double theta() const { return 2.0 * c * catalog_size; }
};

// phi_i = c * |O| * (|N+_i| + |N_i|)  (Eq. 17 shape)
inline double node_overhead(const OverheadParams& p, size_t n_i, size_t n_plus_i) {
  return p.c * p.catalog_size * (static_cast<double>(n_plus_i) + static_cast<double>(n_i));
}

// Phi = 2 c |O| sum_i |N_i|; also checks the double-counting identity
// sum |N_i| = sum |N+_i| that the closed form relies on.
inline double system_overhead(const OverheadParams& p, const std::vector<Neighborhood>& nbhd) {
  size_t sum_n = 0, sum_np = 0;
  for (const auto& nb : nbhd) {
    sum_n += nb.members.size();
    sum_np += nb.co_members.size();
  }
  if (sum_n != sum_np)
    throw std::logic_error("system_overhead: double-counting identity violated");
  return p.theta() * static_cast<double>(sum_n);
}

// z_1 = <k>, z_2 = <k^2> - <k>, z_r = (z2/z1)^{r-1} z1 (tree approximation).
inline double analytic_zr(const DegreeStats& stats, int r) {
  if (stats.mean_k <= 0.0) throw std::domain_error("analytic_zr: z1 = 0");
  if (r < 1) throw std::domain_error("analytic_zr: r >= 1 required");
  double z1 = stats.mean_k;
  double z2 = stats.mean_k2 - stats.mean_k;
  return std::pow(z2 / z1, r - 1) * z1;
}

// Marginal overhead of growing the average radius from r to r+1:
// Delta Phi = theta |V| (z2/z1)^r z1. r = 0 gives the first ring.
inline double delta_phi(const OverheadParams& p, const DegreeStats& stats, int nodes, int r) {
  if (stats.mean_k <= 0.0) throw std::domain_error("delta_phi: z1 = 0");
  if (r < 0) throw std::domain_error("delta_phi: r >= 0 required");
  double z1 = stats.mean_k;
  double z2 = stats.mean_k2 - stats.mean_k;
  return p.theta() * nodes * std::pow(z2 / z1, r) * z1;
}

struct ErOverhead {
  double delta_phi = 0.0;  // theta |V| z^{r+1}
  double phi = 0.0;        // theta |V| (z + z^2 + ... + z^r)
};

// ER closed forms (z_r = z^r): geometric-sum Phi with the z = 1 limit.
inline ErOverhead er_overhead(const OverheadParams& p, double z, int nodes, int r) {
  if (z <= 0.0) throw std::domain_error("er_overhead: z > 0 required");
  if (r < 0) throw std::domain_error("er_overhead: r >= 0 required");
  ErOverhead out;
  out.delta_phi = p.theta() * nodes * std::pow(z, r + 1);
  if (z == 1.0)
    out.phi = p.theta() * nodes * r;
  else
    out.phi = p.theta() * nodes * z * (1.0 - std::pow(z, r)) / (1.0 - z);
  return out;
}

// Stirling numbers of the second kind S(n,k) by the standard recurrence.
inline std::vector<std::vector<double>> stirling2_table(int n_max) {
  std::vector<std::vector<double>> s(n_max + 1, std::vector<double>(n_max + 1, 0.0));
  s[0][0] = 1.0;
  for (int n = 1; n <= n_max; ++n)
    for (int k = 1; k <= n; ++k) s[n][k] = k * s[n - 1][k] + s[n - 1][k - 1];
  return s;
}

// Poisson raw moment <k^n> = sum_k S(n,k) z^k (Dobinski form).
inline double poisson_moment(double z, int n) {
  if (n < 0) throw std::domain_error("poisson_moment: n >= 0 required");
  if (z <= 0.0) throw std::domain_error("poisson_moment: z > 0 required");
  if (n == 0) return 1.0;
  auto s = stirling2_table(n);
  double acc = 0.0;
  double zk = 1.0;
  for (int k = 1; k <= n; ++k) {
    zk *= z;
    acc += s[n][k] * zk;
  }
  return acc;
}

struct GrowthRow {
  int r = 0;
  double z_analytic = 0.0;
  double z_empirical = 0.0;
  double delta_phi = 0.0;
  double phi_cumulative = 0.0;
};

struct GrowthLaw {
  double z1 = 0.0;
  double z2 = 0.0;
  double ratio = 0.0;  // z2/z1; > 1 flags exponential growth
  std::vector<GrowthRow> rows;

  std::string to_csv() const {
    std::ostringstream out;
    out.precision(12);
    out << "r,z_r_analytic,z_r_empirical,delta_phi,phi_cumulative\n";
    for (const auto& row : rows)
      out << row.r << "," << row.z_analytic << "," << row.z_empirical << "," << row.delta_phi
          << "," << row.phi_cumulative << "\n";
    return out.str();
  }
};

// Analytic-vs-empirical growth table up to r_max rings.
inline GrowthLaw growth_law(const OverheadParams& p, const Topology& t, const DistanceMatrix& d,
                            int r_max) {
  DegreeStats stats = degree_stats(t, d, r_max);
  GrowthLaw law;
  law.z1 = stats.mean_k;
  law.z2 = stats.mean_k2 - stats.mean_k;
  law.ratio = law.z1 > 0 ? law.z2 / law.z1 : 0.0;
  double phi = 0.0;
  for (int r = 1; r <= r_max; ++r) {
    GrowthRow row;
    row.r = r;
    row.z_analytic = analytic_zr(stats, r);
    row.z_empirical = r < static_cast<int>(stats.z_ring.size()) ? stats.z_ring[r] : 0.0;
    row.delta_phi = delta_phi(p, stats, t.node_count, r - 1);
    phi += row.delta_phi;
    row.phi_cumulative = phi;
    law.rows.push_back(row);
  }
  return law;
}

// Least-squares growth ratio of the empirical ring sizes over r in
// [1, r_max]: geometric fit of z_{r+1}/z_r (mean of successive ratios).
struct GrowthFit {
  double ratio = 0.0;
  double residual = 0.0;  // max relative deviation of fitted from empirical
};

inline GrowthFit fit_growth_ratio(const DegreeStats& stats, int r_max) {
  GrowthFit fit;
  int m = std::min<int>(r_max, static_cast<int>(stats.z_ring.size()) - 1);
  std::vector<double> ratios;
  for (int r = 1; r < m; ++r)
    if (stats.z_ring[r] > 0) ratios.push_back(stats.z_ring[r + 1] / stats.z_ring[r]);
  if (ratios.empty()) return fit;
  double acc = 0.0;
  for (double q : ratios) acc += q;
  fit.ratio = acc / ratios.size();
  for (size_t t = 0; t < ratios.size(); ++t)
    fit.residual = std::max(fit.residual, std::abs(ratios[t] - fit.ratio) / fit.ratio);
  return fit;
}

}  // namespace fincache
