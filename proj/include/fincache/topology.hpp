#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fincache {

// Hop distance marker for node pairs in different components.
inline constexpr int kUnreachable = -1;

// Undirected simple graph with dense 0-based node ids.
struct Topology {
  int node_count = 0;
  std::vector<std::pair<int, int>> edges;          // normalized (a < b), sorted
  std::vector<std::vector<int>> adjacency;         // sorted neighbor lists
  std::vector<std::string> labels;                 // original labels, if loaded

  int edge_count() const { return static_cast<int>(edges.size()); }

  int degree(int v) const { return static_cast<int>(adjacency[v].size()); }

  static Topology from_edges(int n, std::vector<std::pair<int, int>> e) {
    Topology t;
    t.node_count = n;
    for (auto& [a, b] : e) {
      if (a == b) throw std::invalid_argument("self-loop in edge set");
      if (a > b) std::swap(a, b);
    }
    std::sort(e.begin(), e.end());
    e.erase(std::unique(e.begin(), e.end()), e.end());
    t.edges = std::move(e);
    t.adjacency.assign(n, {});
    for (auto [a, b] : t.edges) {
      t.adjacency[a].push_back(b);
      t.adjacency[b].push_back(a);
    }
    for (auto& nb : t.adjacency) std::sort(nb.begin(), nb.end());
    return t;
  }
};

struct DistanceMatrix {
  int n = 0;
  std::vector<int> d;  // row-major n*n, kUnreachable for disconnected pairs

  int at(int i, int j) const { return d[static_cast<size_t>(i) * n + j]; }
  int& at(int i, int j) { return d[static_cast<size_t>(i) * n + j]; }

  int diameter() const {  // max finite distance
    int m = 0;
    for (int v : d)
      if (v != kUnreachable) m = std::max(m, v);
    return m;
  }
};

struct Neighborhood {
  int center = 0;
  int radius = 0;
  std::vector<int> members;     // N_i, sorted by (hop distance, id)
  std::vector<int> co_members;  // N+_i, ascending id
};

struct DegreeStats {
  double mean_k = 0.0;   // <k>
  double mean_k2 = 0.0;  // <k^2>
  std::vector<double> z_ring;  // z_ring[r] = avg # of nodes at exactly r hops, r>=1
};

// G(n, p) with each unordered pair drawn independently.
inline Topology gen_er(int n, double p, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("gen_er: n must be >= 1");
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("gen_er: p must be in [0,1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<int, int>> e;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (u(rng) < p) e.emplace_back(a, b);
  return Topology::from_edges(n, std::move(e));
}

// Barabasi-Albert preferential attachment. Seed core is K_{m+1}; each new
// node attaches m edges to distinct existing nodes, probability proportional
// to current degree.
inline Topology gen_ba(int n, int m, uint64_t seed) {
  if (m < 1) throw std::invalid_argument("gen_ba: m must be >= 1");
  if (n <= m) throw std::invalid_argument("gen_ba: n must exceed m");
  std::mt19937_64 rng(seed);
  std::vector<std::pair<int, int>> e;
  std::vector<int> deg(n, 0);
  // endpoint pool: each edge contributes both endpoints, so sampling from the
  // pool is degree-proportional
  std::vector<int> pool;
  int core = m + 1;
  for (int a = 0; a < core && a < n; ++a)
    for (int b = a + 1; b < core; ++b) {
      e.emplace_back(a, b);
      ++deg[a];
      ++deg[b];
      pool.push_back(a);
      pool.push_back(b);
    }
  for (int v = core; v < n; ++v) {
    std::vector<int> targets;
    while (static_cast<int>(targets.size()) < m) {
      std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
      int cand = pool[pick(rng)];
      if (std::find(targets.begin(), targets.end(), cand) == targets.end())
        targets.push_back(cand);
    }
    for (int t : targets) {
      e.emplace_back(t, v);
      ++deg[t];
      ++deg[v];
      pool.push_back(t);
      pool.push_back(v);
    }
  }
  return Topology::from_edges(n, std::move(e));
}

struct EdgeListResult {
  Topology topology;
  int dropped_self_loops = 0;
  int dropped_duplicates = 0;
  int warnings() const { return dropped_self_loops + dropped_duplicates; }
};

// Parses "A B" per line; '#' starts a comment, blank lines ignored. Labels
// are arbitrary strings remapped to dense ids in first-appearance order.
inline EdgeListResult load_edge_list(const std::string& text) {
  EdgeListResult res;
  std::map<std::string, int> id_of;
  std::vector<std::string> labels;
  std::vector<std::pair<int, int>> raw;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto intern = [&](const std::string& s) {
    auto it = id_of.find(s);
    if (it != id_of.end()) return it->second;
    int id = static_cast<int>(labels.size());
    id_of.emplace(s, id);
    labels.push_back(s);
    return id;
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string a, b, extra;
    if (!(ls >> a)) continue;  // blank
    if (!(ls >> b) || (ls >> extra))
      throw std::runtime_error("edge list parse error at line " + std::to_string(line_no) +
                               ": expected two node labels");
    int ia = intern(a);  // intern in appearance order (arg order is unspecified)
    int ib = intern(b);
    raw.emplace_back(ia, ib);
  }
  std::vector<std::pair<int, int>> kept;
  std::vector<std::pair<int, int>> seen;
  for (auto [a, b] : raw) {
    if (a == b) {
      ++res.dropped_self_loops;
      continue;
    }
    auto e = std::minmax(a, b);
    kept.emplace_back(e.first, e.second);
  }
  std::sort(kept.begin(), kept.end());
  size_t unique_count = std::unique(kept.begin(), kept.end()) - kept.begin();
  res.dropped_duplicates = static_cast<int>(kept.size() - unique_count);
  kept.resize(unique_count);
  res.topology = Topology::from_edges(static_cast<int>(labels.size()), std::move(kept));
  res.topology.labels = std::move(labels);
  return res;
}

// All-pairs BFS hop distances.
inline DistanceMatrix shortest_paths(const Topology& t) {
  DistanceMatrix dm;
  dm.n = t.node_count;
  dm.d.assign(static_cast<size_t>(dm.n) * dm.n, kUnreachable);
  std::vector<int> dist(t.node_count);
  for (int s = 0; s < t.node_count; ++s) {
    std::fill(dist.begin(), dist.end(), kUnreachable);
    dist[s] = 0;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      for (int w : t.adjacency[v])
        if (dist[w] == kUnreachable) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
    }
    for (int j = 0; j < t.node_count; ++j) dm.at(s, j) = dist[j];
  }
  return dm;
}

// N_i = { j != i : 0 < l*_{i,j} <= r_i }, members sorted nearest-first.
// co_members by inverting membership.
inline std::vector<Neighborhood> neighborhoods(const Topology& t, const DistanceMatrix& d,
                                               const std::vector<int>& radii) {
  int n = t.node_count;
  std::vector<Neighborhood> nb(n);
  for (int i = 0; i < n; ++i) {
    if (radii[i] < 0) throw std::invalid_argument("neighborhoods: radius must be >= 0");
    nb[i].center = i;
    nb[i].radius = radii[i];
    for (int j = 0; j < n; ++j) {
      int l = d.at(i, j);
      if (j != i && l != kUnreachable && l <= radii[i]) nb[i].members.push_back(j);
    }
    std::stable_sort(nb[i].members.begin(), nb[i].members.end(),
                     [&](int a, int b) { return d.at(i, a) < d.at(i, b); });
  }
  for (int i = 0; i < n; ++i)
    for (int j : nb[i].members) nb[j].co_members.push_back(i);
  for (auto& x : nb) std::sort(x.co_members.begin(), x.co_members.end());
  return nb;
}

inline DegreeStats degree_stats(const Topology& t, const DistanceMatrix& d, int r_max) {
  if (r_max < 1) throw std::invalid_argument("degree_stats: r_max must be >= 1");
  DegreeStats s;
  int n = t.node_count;
  for (int i = 0; i < n; ++i) {
    double k = t.degree(i);
    s.mean_k += k;
    s.mean_k2 += k * k;
  }
  s.mean_k /= n;
  s.mean_k2 /= n;
  s.z_ring.assign(r_max + 1, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      int l = d.at(i, j);
      if (l >= 1 && l <= r_max) s.z_ring[l] += 1.0;
    }
  for (int r = 1; r <= r_max; ++r) s.z_ring[r] /= n;
  return s;
}

}  // namespace fincache
