#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fincache/baselines.hpp"

using namespace fincache;

namespace {

CachingStrategy fair_split(const GameInstance& g) {
  CachingStrategy s = CachingStrategy::zeros(g);
  s.xv(0, 0) = 1;
  s.xv(0, 1) = 1;
  s.xv(1, 0) = 1;
  s.xv(1, 2) = 1;
  s.yv(0, 0, 2) = 1;
  s.yv(1, 0, 1) = 1;
  return s;
}

}  // namespace

TEST_CASE("request stream matches the demand proportions") {
  DemandMatrix dm = DemandMatrix::zeros(2, 2);
  dm.at(0, 0) = 6;
  dm.at(0, 1) = 2;
  dm.at(1, 0) = 1;
  dm.at(1, 1) = 1;
  RequestStream s = RequestStream::draw(dm, 100000, 5);
  REQUIRE(s.events.size() == 100000);
  double c00 = 0;
  for (auto [i, k] : s.events)
    if (i == 0 && k == 0) ++c00;
  CHECK(c00 / 100000 == doctest::Approx(0.6).epsilon(0.02));
  CHECK(RequestStream::draw(dm, 100, 5).events == RequestStream::draw(dm, 100, 5).events);
}

TEST_CASE("lru single node") {
  Catalog cat = Catalog::uniform(3, 1.0);

  // repeated object: first event misses, the rest hit
  RequestStream rep;
  for (int t = 0; t < 10; ++t) rep.events.push_back({0, 1});
  LruResult r = run_lru(cat, rep, 1, 1.0);
  CHECK(r.metrics.bhr == doctest::Approx(0.9));
  CHECK(r.metrics.fpr == doctest::Approx(0.9));
  CHECK(r.snapshots[0] == std::vector<int>{1});

  // cyclic thrash over a cache of one object: nothing ever hits
  RequestStream cyc;
  for (int t = 0; t < 12; ++t) cyc.events.push_back({0, t % 3});
  LruResult thrash = run_lru(cat, cyc, 1, 1.0);
  CHECK(thrash.metrics.bhr == doctest::Approx(0.0));

  // cache big enough for the working set: only compulsory misses
  LruResult warm = run_lru(cat, cyc, 1, 3.0);
  CHECK(warm.metrics.bhr == doctest::Approx(9.0 / 12));

  CHECK_THROWS(run_lru(cat, rep, 1, 0.5));
}

TEST_CASE("lru keeps nodes independent") {
  Catalog cat = Catalog::uniform(2, 1.0);
  RequestStream s;
  s.events = {{0, 0}, {1, 0}, {0, 0}, {1, 0}};
  LruResult r = run_lru(cat, s, 2, 1.0);
  CHECK(r.metrics.bhr == doctest::Approx(0.5));  // one miss per node
}

TEST_CASE("run_ns") {
  GameInstance g = fig1_game();
  CachingStrategy ns0 = run_ns(g, 0);
  for (int i = 0; i < 2; ++i)
    for (double v : ns0.y[i]) CHECK(v == 0.0);
  CHECK(local_utility(g, ns0, 0) == doctest::Approx(5.0));

  // radius 1: both cache {A,B}; nothing new to fetch from the twin
  CachingStrategy ns1 = run_ns(g, 1);
  double total = utility(g, ns1, 0) + utility(g, ns1, 1);
  CHECK(total == doctest::Approx(10.0));
  CHECK(validate(g, ns1).empty());

  // wider radius can only help
  Topology t = gen_er(10, 0.3, 2);
  auto pop = weibull_popularity(6, 0.7, 5.0);
  DemandMatrix dm = build_demand(t, pop, 10.0, 0.3, 3);
  GameInstance g2 = make_game(std::move(t), std::move(dm), Catalog::uniform(6, 1.0),
                              std::vector<double>(10, 2.0), std::vector<int>(10, 4));
  double prev = -1.0;
  for (int radius = 0; radius <= 4; ++radius) {
    CachingStrategy s = run_ns(g2, radius);
    double u = 0.0;
    for (int i = 0; i < 10; ++i) u += utility(g2, s, i);
    CHECK(u >= prev - 1e-9);
    CHECK(validate(g2, s).empty());
    prev = u;
  }
  CHECK_THROWS(run_ns(g, -1));
}

TEST_CASE("byte_hitrate") {
  GameInstance g = fig1_game();
  CachingStrategy fair = fair_split(g);
  CHECK(byte_hitrate(g, fair) == doctest::Approx(0.875));  // 14 of 16 demand units

  CachingStrategy none = CachingStrategy::zeros(g);
  CHECK(byte_hitrate(g, none) == doctest::Approx(0.0));

  // everything cached everywhere
  GameInstance big = make_game(Topology::from_edges(2, {{0, 1}}), g.demand,
                               Catalog::uniform(4, 8.4), {4, 4}, {1, 1});
  CachingStrategy all = CachingStrategy::zeros(big);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 4; ++k) all.xv(i, k) = 1.0;
  CHECK(byte_hitrate(big, all) == doctest::Approx(1.0));
}

TEST_CASE("footprint_reduction") {
  GameInstance g = fig1_game();
  CachingStrategy fair = fair_split(g);
  // origin at 2 hops: cost = (10*0 + 4*1 + 2*2)/ (16*2) = 0.25 -> reduction 0.75
  CHECK(footprint_reduction(g, fair, 2.0) == doctest::Approx(0.75));
  CHECK(footprint_reduction(g, CachingStrategy::zeros(g), 2.0) == doctest::Approx(0.0));

  GameInstance big = make_game(Topology::from_edges(2, {{0, 1}}), g.demand,
                               Catalog::uniform(4, 8.4), {4, 4}, {1, 1});
  CachingStrategy all = CachingStrategy::zeros(big);
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 4; ++k) all.xv(i, k) = 1.0;
  CHECK(footprint_reduction(big, all, 2.0) == doctest::Approx(1.0));
}

TEST_CASE("content_overlap") {
  GameInstance g = fig1_game();
  CachingStrategy fair = fair_split(g);
  CHECK(content_overlap(g, fair) == doctest::Approx(0.5));  // share A only, C = 2

  CachingStrategy dup = CachingStrategy::zeros(g);
  for (int i = 0; i < 2; ++i) {
    dup.xv(i, 0) = 1;
    dup.xv(i, 1) = 1;
  }
  CHECK(content_overlap(g, dup) == doctest::Approx(1.0));

  CachingStrategy disjoint = CachingStrategy::zeros(g);
  disjoint.xv(0, 0) = 1;
  disjoint.xv(0, 1) = 1;
  disjoint.xv(1, 2) = 1;
  disjoint.xv(1, 3) = 1;
  CHECK(content_overlap(g, disjoint) == doctest::Approx(0.0));
}

TEST_CASE("distance_histogram") {
  GameInstance g = fig1_game();
  CachingStrategy fair = fair_split(g);
  std::vector<double> h = distance_histogram(g, fair);
  REQUIRE(h.size() == 3);  // hops 0, 1, origin
  CHECK(h[0] == doctest::Approx(10.0 / 16));
  CHECK(h[1] == doctest::Approx(4.0 / 16));
  CHECK(h[2] == doctest::Approx(2.0 / 16));

  CachingStrategy none = CachingStrategy::zeros(g);
  std::vector<double> h0 = distance_histogram(g, none);
  CHECK(h0[0] == doctest::Approx(0.0));
  CHECK(h0[2] == doctest::Approx(1.0));
}

TEST_CASE("metric bounds on random strategies") {
  Topology t = gen_er(8, 0.4, 6);
  auto pop = weibull_popularity(5, 0.7, 5.0);
  DemandMatrix dm = build_demand(t, pop, 10.0, 0.3, 7);
  GameInstance g = make_game(std::move(t), std::move(dm), Catalog::uniform(5, 2.0),
                             std::vector<double>(8, 2.0), std::vector<int>(8, 2));
  for (int radius = 0; radius <= 2; ++radius) {
    CachingStrategy s = run_ns(g, radius);
    double bhr = byte_hitrate(g, s);
    double fpr = footprint_reduction(g, s);
    double ov = content_overlap(g, s);
    CHECK(bhr >= 0.0);
    CHECK(bhr <= 1.0);
    CHECK(fpr >= 0.0);
    CHECK(fpr <= 1.0);
    CHECK(ov >= 0.0);
    CHECK(ov <= 1.0 + 1e-12);
    std::vector<double> h = distance_histogram(g, s);
    double sum = 0.0;
    for (double v : h) {
      CHECK(v >= -1e-12);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0));
  }
}

TEST_CASE("metrics_csv_row") {
  MetricsReport m;
  m.bhr = 0.5;
  m.fpr = 0.25;
  m.overlap = 0.125;
  CHECK(metrics_csv_row("er100", 33.6, "lru", 7, m) == "er100,33.6,lru,7,0.5,0.25,0.125");
}
