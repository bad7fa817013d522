#pragma once

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fincache/topology.hpp"

namespace fincache {

struct Catalog {
  int object_count = 0;
  std::vector<double> sizes_mb;  // s_k, all > 0

  static Catalog uniform(int count, double size_mb) {
    if (count < 1) throw std::invalid_argument("Catalog: object_count must be positive");
    if (size_mb <= 0) throw std::invalid_argument("Catalog: size must be positive");
    return Catalog{count, std::vector<double>(count, size_mb)};
  }
};

// Per-node, per-object demand rates w_{i,k}.
struct DemandMatrix {
  int nodes = 0;
  int objects = 0;
  std::vector<double> w;  // row-major nodes x objects

  double at(int i, int k) const { return w[static_cast<size_t>(i) * objects + k]; }
  double& at(int i, int k) { return w[static_cast<size_t>(i) * objects + k]; }

  static DemandMatrix zeros(int nodes, int objects) {
    return DemandMatrix{nodes, objects, std::vector<double>(static_cast<size_t>(nodes) * objects, 0.0)};
  }
};

// Rank-j weight = F(j) - F(j-1) with F the Weibull CDF over rank treated as a
// continuous variable, sorted non-increasing and normalized to sum 1.
inline std::vector<double> weibull_popularity(int n_objects, double shape, double scale) {
  if (shape <= 0 || scale <= 0)
    throw std::invalid_argument("weibull_popularity: shape and scale must be positive");
  if (n_objects < 1) throw std::invalid_argument("weibull_popularity: need at least one object");
  auto cdf = [&](double x) { return 1.0 - std::exp(-std::pow(x / scale, shape)); };
  std::vector<double> p(n_objects);
  double prev = 0.0, sum = 0.0;
  for (int j = 1; j <= n_objects; ++j) {
    double f = cdf(static_cast<double>(j));
    p[j - 1] = f - prev;
    prev = f;
    sum += p[j - 1];
  }
  std::sort(p.begin(), p.end(), std::greater<>());
  for (double& v : p) v /= sum;
  return p;
}

// w_{i,k} = rate * pop_k * (1 + eps), eps ~ U[-perturb, perturb], clipped at 0.
inline DemandMatrix build_demand(const Topology& t, const std::vector<double>& pop,
                                 double total_rate_per_node, double perturb, uint64_t seed) {
  if (perturb < 0.0 || perturb >= 1.0)
    throw std::invalid_argument("build_demand: perturb must be in [0,1)");
  DemandMatrix dm = DemandMatrix::zeros(t.node_count, static_cast<int>(pop.size()));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-perturb, perturb);
  for (int i = 0; i < dm.nodes; ++i)
    for (int k = 0; k < dm.objects; ++k) {
      double eps = perturb > 0 ? u(rng) : 0.0;
      dm.at(i, k) = std::max(0.0, total_rate_per_node * pop[k] * (1.0 + eps));
    }
  return dm;
}

// CSV: header row of object ids, then one row per node.
inline std::string demand_to_csv(const DemandMatrix& dm) {
  std::ostringstream out;
  out.precision(17);
  for (int k = 0; k < dm.objects; ++k) out << (k ? "," : "") << "o" << k;
  out << "\n";
  for (int i = 0; i < dm.nodes; ++i) {
    for (int k = 0; k < dm.objects; ++k) out << (k ? "," : "") << dm.at(i, k);
    out << "\n";
  }
  return out.str();
}

inline DemandMatrix demand_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("demand csv: empty input");
  int objects = 1 + static_cast<int>(std::count(line.begin(), line.end(), ','));
  std::vector<double> vals;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ls, cell, ',')) {
      vals.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != objects) throw std::runtime_error("demand csv: ragged row");
    ++rows;
  }
  return DemandMatrix{rows, objects, std::move(vals)};
}

}  // namespace fincache
