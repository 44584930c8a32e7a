#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"

#include "slg/error.hpp"
#include "slg/graphbuild.hpp"
#include "slg/rng.hpp"
#include "test_util.hpp"

using namespace slg;
using namespace slg::graph;

namespace {

using PairSet = std::set<std::pair<TxnId, TxnId>>;

PairSet pairs_of(const std::vector<Edge>& e) {
  PairSet s;
  for (const auto& x : e) s.insert({x.src, x.dst});
  return s;
}

double scalar_cos(const std::vector<double>& u, const std::vector<double>& v) {
  double d = 0, a = 0, b = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    d += u[i] * v[i];
    a += u[i] * u[i];
    b += v[i] * v[i];
  }
  return d / (std::sqrt(a) * std::sqrt(b));
}

// Clustered random vectors with ids 100.., one filter cluster per group.
struct Fixture {
  EmbeddingTable table;
  cluster::FilterReport filter;
};

Fixture clustered(Rng& r, std::size_t groups, std::size_t per, std::size_t d, double spread) {
  Matrix m(Eigen::Index(groups * per), Eigen::Index(d));
  std::vector<TxnId> ids;
  Fixture f;
  for (std::size_t g = 0; g < groups; ++g) {
    std::vector<double> c(d);
    for (auto& v : c) v = r.normal();
    for (std::size_t i = 0; i < per; ++i) {
      const auto row = Eigen::Index(g * per + i);
      for (std::size_t k = 0; k < d; ++k) m(row, Eigen::Index(k)) = c[k] + spread * r.normal();
      const TxnId id = TxnId(100 + g * per + i);
      ids.push_back(id);
      f.filter.retained_clusters[int(g)].push_back(id);
      f.filter.retained.push_back(id);
    }
  }
  std::sort(f.filter.retained.begin(), f.filter.retained.end());
  f.table = EmbeddingTable(ids, m);
  return f;
}

// Unfiltered reference: every in-cluster pair with sim >= tau, then the both-endpoints cap.
PairSet brute_soft(const Fixture& f, double tau, std::size_t cap) {
  std::map<TxnId, std::vector<std::pair<double, TxnId>>> lists;
  std::vector<std::pair<TxnId, TxnId>> cand;
  for (const auto& [cid, mem] : f.filter.retained_clusters)
    for (std::size_t i = 0; i < mem.size(); ++i)
      for (std::size_t j = i + 1; j < mem.size(); ++j) {
        const auto ri = *f.table.row_of(mem[i]), rj = *f.table.row_of(mem[j]);
        std::vector<double> u(f.table.dim()), v(f.table.dim());
        for (std::size_t k = 0; k < u.size(); ++k) {
          u[k] = f.table.vectors()(Eigen::Index(ri), Eigen::Index(k));
          v[k] = f.table.vectors()(Eigen::Index(rj), Eigen::Index(k));
        }
        const double s = scalar_cos(u, v);
        if (s < tau - 1e-9) continue;
        lists[mem[i]].push_back({s, mem[j]});
        lists[mem[j]].push_back({s, mem[i]});
        cand.push_back({std::min(mem[i], mem[j]), std::max(mem[i], mem[j])});
      }
  std::map<TxnId, std::set<TxnId>> top;
  for (auto& [id, l] : lists) {
    std::sort(l.begin(), l.end(), [](auto& a, auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    for (std::size_t i = 0; i < std::min(cap, l.size()); ++i) top[id].insert(l[i].second);
  }
  PairSet out;
  for (const auto& [a, b] : cand)
    if (top[a].count(b) && top[b].count(a)) out.insert({a, b});
  return out;
}

}  // namespace

TEST_CASE("cosine similarity basics") {
  const std::vector<double> a{1, 0}, b{0, 1}, c{2, 0}, z{0, 0};
  CHECK(cosine_sim(a, b) == 0.0);
  CHECK(cosine_sim(a, c) == 1.0);
  CHECK_THROWS_AS(cosine_sim(a, z), UndefinedSimilarity);
  Rng r(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> u(10), v(10);
    for (auto& x : u) x = r.normal();
    for (auto& x : v) x = r.normal();
    CHECK(std::abs(cosine_sim(u, v) - scalar_cos(u, v)) <= 1e-12);
  }
}

TEST_CASE("soft links match the brute-force rule including the degree cap") {
  Rng r(2);
  for (int rep = 0; rep < 10; ++rep) {
    const auto f = clustered(r, 1 + r.below(4), 5 + r.below(30), 2 + r.below(6), r.uniform(0.1, 1.0));
    SoftLinkConfig c;
    c.tau = r.uniform(0.3, 0.95);
    c.max_degree_cap = 1 + r.below(8);
    const auto got = soft_link_edges(f.table, f.filter, c);
    CHECK(pairs_of(got.edges) == brute_soft(f, c.tau, c.max_degree_cap));
    std::map<TxnId, std::size_t> deg;
    for (const auto& e : got.edges) {
      CHECK(e.kind == EdgeKind::soft);
      CHECK(e.weight >= c.tau - kSimTolerance);
      ++deg[e.src];
      ++deg[e.dst];
    }
    for (const auto& [id, d] : deg) CHECK(d <= c.max_degree_cap);
    CHECK(std::is_sorted(got.edges.begin(), got.edges.end(), edge_less));
  }
}

TEST_CASE("threshold monotonicity holds with and without the cap") {
  Rng r(3);
  for (int rep = 0; rep < 20; ++rep) {
    const auto f = clustered(r, 3, 25, 4, 0.6);
    SoftLinkConfig lo, hi;
    lo.tau = r.uniform(0.2, 0.8);
    hi.tau = lo.tau + r.uniform(0.01, 0.19);
    for (std::size_t cap : {std::size_t{3}, std::size_t{1000}}) {
      lo.max_degree_cap = hi.max_degree_cap = cap;
      const auto a = pairs_of(soft_link_edges(f.table, f.filter, hi).edges);
      const auto b = pairs_of(soft_link_edges(f.table, f.filter, lo).edges);
      CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
      CHECK(a.size() <= b.size());
    }
  }
}

TEST_CASE("tau 1 links only collinear pairs") {
  Matrix m(4, 3);
  m << 1, 2, 3, 2, 4, 6, 1, 2, 3.1, -1, -2, -3;
  EmbeddingTable t({1, 2, 3, 4}, m);
  cluster::FilterReport f;
  f.retained = {1, 2, 3, 4};
  f.retained_clusters[0] = {1, 2, 3, 4};
  SoftLinkConfig c;
  c.tau = 1.0;
  CHECK(pairs_of(soft_link_edges(t, f, c).edges) == PairSet{{1, 2}});
}

TEST_CASE("cross-cluster pairs are never linked within clusters") {
  Matrix m(4, 2);
  m << 1, 0, 1, 0.01, 0, 1, 0.01, 1;
  EmbeddingTable t({1, 2, 3, 4}, m);
  cluster::FilterReport f;
  f.retained = {1, 2, 3, 4};
  f.retained_clusters[0] = {1, 3};
  f.retained_clusters[1] = {2, 4};
  SoftLinkConfig c;
  c.tau = 0.9;
  CHECK(soft_link_edges(t, f, c).edges.empty());
  c.within_cluster_only = false;
  CHECK(pairs_of(soft_link_edges(t, f, c).edges) == PairSet{{1, 2}, {3, 4}});
}

TEST_CASE("filtered-out nodes and zero vectors get no soft edges") {
  Rng r(4);
  auto f = clustered(r, 2, 10, 3, 0.2);
  const TxnId dropped = f.filter.retained_clusters[0].back();
  f.filter.retained_clusters[0].pop_back();
  f.filter.retained.erase(std::find(f.filter.retained.begin(), f.filter.retained.end(), dropped));
  SoftLinkConfig c;
  c.tau = 0.0;
  for (const auto& e : soft_link_edges(f.table, f.filter, c).edges) {
    CHECK(e.src != dropped);
    CHECK(e.dst != dropped);
  }

  Matrix m(3, 2);
  m << 0, 0, 1, 0, 1, 0.1;
  EmbeddingTable t({1, 2, 3}, m);
  cluster::FilterReport g;
  g.retained = {1, 2, 3};
  g.retained_clusters[0] = {1, 2, 3};
  const auto res = soft_link_edges(t, g, c);
  CHECK(res.zero_vector_nodes == 1);
  CHECK(pairs_of(res.edges) == PairSet{{2, 3}});
}

TEST_CASE("an empty retained set yields no edges and a warning") {
  Rng r(5);
  auto f = clustered(r, 1, 5, 3, 0.2);
  const cluster::FilterReport none;
  const auto res = soft_link_edges(f.table, none, SoftLinkConfig{});
  CHECK(res.edges.empty());
  CHECK(!res.warnings.empty());
}

TEST_CASE("pair evaluation counts match the cluster arithmetic") {
  Rng r(6);
  const auto f = clustered(r, 10, 20, 3, 0.5);
  SoftLinkConfig c;
  const auto pre = soft_link_edges(f.table, f.filter, c);
  const auto all = all_pairs_soft_link_edges(f.table, c);
  CHECK(pre.pair_evaluations == 10 * 20 * 19 / 2);
  CHECK(all.pair_evaluations == 200 * 199 / 2);
}

TEST_CASE("all-pairs agrees with prefiltered builds on within-cluster pairs when uncapped") {
  Rng r(7);
  const auto f = clustered(r, 4, 30, 5, 0.7);
  SoftLinkConfig c;
  c.tau = 0.5;
  c.max_degree_cap = 100000;
  const auto pre = pairs_of(soft_link_edges(f.table, f.filter, c).edges);
  std::map<TxnId, int> group;
  for (const auto& [cid, mem] : f.filter.retained_clusters)
    for (auto id : mem) group[id] = cid;
  PairSet within;
  for (const auto& p : pairs_of(all_pairs_soft_link_edges(f.table, c).edges))
    if (group[p.first] == group[p.second]) within.insert(p);
  CHECK(pre == within);
}

TEST_CASE("soft links are invariant to the order of clusters and members") {
  Rng r(8);
  auto f = clustered(r, 3, 15, 4, 0.5);
  SoftLinkConfig c;
  c.tau = 0.6;
  c.max_degree_cap = 4;
  const auto base = soft_link_edges(f.table, f.filter, c).edges;
  for (auto& [cid, mem] : f.filter.retained_clusters) std::reverse(mem.begin(), mem.end());
  CHECK(soft_link_edges(f.table, f.filter, c).edges == base);
}

namespace {

synth::Dataset entity_dataset(const std::vector<std::int64_t>& devices) {
  synth::Dataset d;
  for (std::size_t i = 0; i < devices.size(); ++i) {
    synth::Transaction t;
    t.txn_id = TxnId(i + 1);
    t.amount = 1.0;
    t.entities = {devices[i], std::int64_t(1000 + i), std::int64_t(2000 + i), std::int64_t(3000 + i)};
    d.transactions.push_back(t);
    d.sequences.emplace_back();
  }
  return d;
}

}  // namespace

TEST_CASE("hard links form cliques and skip hub values") {
  const auto d = entity_dataset({7, 7, 7, 8, 9});
  const auto h = hard_link_edges(d, HardLinkConfig{});
  CHECK(pairs_of(h.edges) == PairSet{{1, 2}, {1, 3}, {2, 3}});
  for (const auto& e : h.edges) {
    CHECK(e.kind == EdgeKind::hard);
    CHECK(e.weight == 1.0);
  }
  std::vector<std::int64_t> many(51, 5);
  many.push_back(6);
  const auto hub = hard_link_edges(entity_dataset(many), HardLinkConfig{});
  CHECK(hub.edges.empty());
  CHECK(hub.skipped_hub_values == 1);
  CHECK(hub.skipped_by_type.at(synth::EntityType::device) == 1);
  HardLinkConfig bad;
  bad.entity_types.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("merge keeps both kinds and lists shared neighbors once") {
  const auto empty = merge({1, 2, 3}, {}, {});
  CHECK(empty.edge_count() == 0);
  CHECK(graph_stats(empty).isolated == 3);
  const auto g = merge({}, {{1, 2, EdgeKind::soft, 0.95}}, {{1, 2, EdgeKind::hard, 1.0}, {2, 3, EdgeKind::hard, 1.0}});
  CHECK(g.edge_count() == 3);
  CHECK(g.degree(*g.position(2)) == 2);
  const auto s = graph_stats(g);
  CHECK(s.soft_edges == 1);
  CHECK(s.hard_edges == 2);
  CHECK(s.max_degree == 2);
}

TEST_CASE("csr adjacency equals a brute-force adjacency map") {
  Rng r(9);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<Edge> edges;
    std::map<TxnId, std::set<TxnId>> adj;
    const std::size_t n = 5 + r.below(60);
    for (std::size_t i = 0; i < r.below(1000); ++i) {
      const TxnId a = TxnId(r.below(n)), b = TxnId(r.below(n));
      if (a == b) continue;
      edges.push_back({a, b, r.bernoulli(0.5) ? EdgeKind::soft : EdgeKind::hard, 1.0});
      adj[a].insert(b);
      adj[b].insert(a);
    }
    const auto g = TxnGraph::build({}, edges);
    for (std::size_t p = 0; p < g.node_count(); ++p) {
      std::set<TxnId> got;
      for (auto q : g.neighbors(p)) got.insert(g.id(q));
      CHECK(got == adj[g.id(p)]);
      CHECK(got.size() == g.degree(p));
    }
    const auto& csr = g.csr();
    CHECK(std::is_sorted(csr.offsets.begin(), csr.offsets.end()));
    CHECK(csr.offsets.back() == csr.targets.size());
  }
}
