#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <list>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "fincache/game.hpp"

namespace fincache {

// Realized trace of the demand matrix: (node, object) events drawn with
// probability proportional to w_{i,k}.
struct RequestStream {
  std::vector<std::pair<int, int>> events;
  uint64_t seed = 0;

  static RequestStream draw(const DemandMatrix& w, size_t count, uint64_t seed) {
    RequestStream s;
    s.seed = seed;
    s.events.reserve(count);
    std::vector<double> flat(static_cast<size_t>(w.nodes) * w.objects);
    for (int i = 0; i < w.nodes; ++i)
      for (int k = 0; k < w.objects; ++k) flat[static_cast<size_t>(i) * w.objects + k] = w.at(i, k);
    std::discrete_distribution<size_t> pick(flat.begin(), flat.end());
    std::mt19937_64 rng(seed);
    for (size_t t = 0; t < count; ++t) {
      size_t idx = pick(rng);
      s.events.emplace_back(static_cast<int>(idx / w.objects), static_cast<int>(idx % w.objects));
    }
    return s;
  }
};

struct MetricsReport {
  double bhr = 0.0;
  double fpr = 0.0;
  double overlap = 0.0;
  std::vector<double> distance_hist;  // mass at hop 0,1,...,origin (last bucket)
};

struct LruResult {
  MetricsReport metrics;
  std::vector<std::vector<int>> snapshots;  // per node, cached object ids (MRU first)
};

// Independent per-node LRU over the node's substream; eviction on byte
// capacity, no collaboration. Misses fetch from the origin.
inline LruResult run_lru(const Catalog& catalog, const RequestStream& stream, int nodes,
                         double cache_bytes, double origin_distance = 1.0) {
  double max_size = 0.0;
  for (double s : catalog.sizes_mb) max_size = std::max(max_size, s);
  if (cache_bytes < max_size)
    throw std::invalid_argument("run_lru: cache smaller than largest object");
  struct NodeCache {
    std::list<int> order;  // MRU first
    std::unordered_map<int, std::list<int>::iterator> where;
    double used = 0.0;
  };
  std::vector<NodeCache> caches(nodes);
  double hit_bytes = 0.0, total_bytes = 0.0;
  for (auto [i, k] : stream.events) {
    double sz = catalog.sizes_mb[k];
    total_bytes += sz;
    NodeCache& c = caches[i];
    auto it = c.where.find(k);
    if (it != c.where.end()) {
      hit_bytes += sz;
      c.order.erase(it->second);
      c.order.push_front(k);
      c.where[k] = c.order.begin();
      continue;
    }
    while (c.used + sz > cache_bytes && !c.order.empty()) {
      int victim = c.order.back();
      c.order.pop_back();
      c.where.erase(victim);
      c.used -= catalog.sizes_mb[victim];
    }
    c.order.push_front(k);
    c.where[k] = c.order.begin();
    c.used += sz;
  }
  LruResult res;
  res.metrics.bhr = total_bytes > 0 ? hit_bytes / total_bytes : 0.0;
  // no collaboration: hits at 0 hops, misses at the origin
  res.metrics.fpr = res.metrics.bhr;
  (void)origin_distance;
  res.metrics.distance_hist = {res.metrics.bhr, 1.0 - res.metrics.bhr};
  res.snapshots.resize(nodes);
  for (int i = 0; i < nodes; ++i)
    res.snapshots[i].assign(caches[i].order.begin(), caches[i].order.end());
  return res;
}

// Nearby Search: greedy local placement, then satisfied-demand retrieval
// toward the nearest cached copy within `radius` hops (radius 0 = pure
// greedy, no retrieval).
inline CachingStrategy run_ns(const GameInstance& g, int radius) {
  if (radius < 0) throw std::invalid_argument("run_ns: radius >= 0 required");
  CachingStrategy s = CachingStrategy::zeros(g);
  for (int i = 0; i < g.nodes(); ++i) fill_greedy_local(g, s, i);
  for (int i = 0; i < g.nodes(); ++i) {
    const auto& src = g.sources(i);
    for (int k = 0; k < g.objects(); ++k) {
      double budget = std::max(0.0, 1.0 - s.xv(i, k));
      if (g.demand.at(i, k) <= 0.0) budget = 0.0;
      for (size_t a = 0; a < src.size() && budget > 0; ++a) {
        if (g.dist.at(i, src[a]) > radius) continue;
        double take = std::min(budget, s.xv(src[a], k));
        s.yv(i, static_cast<int>(a), k) = take;
        budget -= take;
      }
    }
  }
  return s;
}

namespace detail {

// Effective serving split for (i,k): local fraction, per-source fractions
// (nearest first, capped at a total of 1), and the unserved remainder.
template <typename Fn>
inline void serving_walk(const GameInstance& g, const CachingStrategy& s, int i, int k, Fn&& fn) {
  double local = std::clamp(s.xv(i, k), 0.0, 1.0);
  fn(0, local);
  double remaining = 1.0 - local;
  const auto& src = g.sources(i);
  for (size_t a = 0; a < src.size() && remaining > 0; ++a) {
    double take = std::min(remaining, std::max(0.0, s.yv(i, static_cast<int>(a), k)));
    if (take > 0) fn(g.dist.at(i, src[a]), take);
    remaining -= take;
  }
  fn(-1, std::max(0.0, remaining));  // -1 marks the origin bucket
}

}  // namespace detail

// Expected byte hitrate of a strategy: demand served locally or by any
// in-network neighbor counts as a hit.
inline double byte_hitrate(const GameInstance& g, const CachingStrategy& s) {
  double hit = 0.0, total = 0.0;
  for (int i = 0; i < g.nodes(); ++i)
    for (int k = 0; k < g.objects(); ++k) {
      double bytes = g.demand.at(i, k) * g.catalog.sizes_mb[k];
      total += bytes;
      detail::serving_walk(g, s, i, k, [&](int hops, double frac) {
        if (hops >= 0) hit += bytes * frac;
      });
    }
  return total > 0 ? hit / total : 0.0;
}

// Footprint reduction against an all-origin baseline with the origin at a
// fixed hop distance (default diameter + 1).
inline double footprint_reduction(const GameInstance& g, const CachingStrategy& s,
                                  double origin_distance = -1.0) {
  if (origin_distance < 0) origin_distance = g.dist.diameter() + 1;
  double cost = 0.0, base = 0.0;
  for (int i = 0; i < g.nodes(); ++i)
    for (int k = 0; k < g.objects(); ++k) {
      double bytes = g.demand.at(i, k) * g.catalog.sizes_mb[k];
      base += bytes * origin_distance;
      detail::serving_walk(g, s, i, k, [&](int hops, double frac) {
        cost += bytes * frac * (hops < 0 ? origin_distance : hops);
      });
    }
  return base > 0 ? 1.0 - cost / base : 0.0;
}

// Mean pairwise cache-content overlap; fractional placements count as
// members above the 0.5 threshold. Normalized by the smaller cache's
// effective capacity.
inline double content_overlap(const GameInstance& g, const CachingStrategy& s,
                              double threshold = 0.5) {
  const int n = g.nodes();
  if (n < 2) throw std::invalid_argument("content_overlap: need >= 2 nodes");
  std::vector<std::vector<bool>> cached(n, std::vector<bool>(g.objects(), false));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < g.objects(); ++k) cached[i][k] = s.xv(i, k) >= threshold;
  double acc = 0.0;
  int pairs = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      int inter = 0;
      for (int k = 0; k < g.objects(); ++k) inter += cached[i][k] && cached[j][k];
      double denom = std::max(1.0, std::min(g.capacities[i], g.capacities[j]));
      acc += inter / denom;
      ++pairs;
    }
  return acc / pairs;
}

// Demand-weighted mass served at hop distance 0, 1, ..., with a trailing
// origin bucket. Sums to 1.
inline std::vector<double> distance_histogram(const GameInstance& g, const CachingStrategy& s) {
  int buckets = g.dist.diameter() + 2;  // 0..diameter plus origin
  std::vector<double> hist(buckets, 0.0);
  double total = 0.0;
  for (int i = 0; i < g.nodes(); ++i)
    for (int k = 0; k < g.objects(); ++k) {
      double bytes = g.demand.at(i, k) * g.catalog.sizes_mb[k];
      total += bytes;
      detail::serving_walk(g, s, i, k, [&](int hops, double frac) {
        hist[hops < 0 ? buckets - 1 : hops] += bytes * frac;
      });
    }
  if (total > 0)
    for (double& h : hist) h /= total;
  return hist;
}

// One results-CSV row keyed by the experiment dimensions.
inline std::string metrics_csv_row(const std::string& topology, double cache_size,
                                   const std::string& algorithm, uint64_t seed,
                                   const MetricsReport& m) {
  std::ostringstream out;
  out.precision(12);
  out << topology << "," << cache_size << "," << algorithm << "," << seed << "," << m.bhr << ","
      << m.fpr << "," << m.overlap;
  return out.str();
}

}  // namespace fincache
