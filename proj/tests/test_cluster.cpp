#include <algorithm>
#include <numeric>

#include "doctest.h"

#include "oracles/hdbscan_oracle.hpp"
#include "oracles/jacobi.hpp"
#include "slg/cluster.hpp"
#include "slg/error.hpp"
#include "slg/rng.hpp"
#include "fixtures.hpp"
#include "test_util.hpp"

using namespace slg;
using namespace slg::cluster;

namespace {

Matrix line(std::initializer_list<double> xs) {
  Matrix m(Eigen::Index(xs.size()), 1);
  Eigen::Index i = 0;
  for (double v : xs) m(i++, 0) = v;
  return m;
}

double mst_weight(const std::vector<MstEdge>& t) {
  double s = 0;
  for (const auto& e : t) s += e.weight;
  return s;
}

}  // namespace

TEST_CASE("core distances on a line") {
  const auto x = line({0, 1, 5});
  const auto c = core_distances(x, 1);
  CHECK(c(0) == 1.0);
  CHECK(c(1) == 1.0);
  CHECK(c(2) == 4.0);
  CHECK_THROWS_AS(core_distances(x, 3), ConfigError);
}

TEST_CASE("duplicated points have zero core distance") {
  const auto x = line({2, 2, 2, 9});
  const auto c = core_distances(x, 2);
  CHECK(c(0) == 0.0);
  CHECK(c(1) == 0.0);
  CHECK(c(2) == 0.0);
}

TEST_CASE("core distances match a sort oracle") {
  Rng r(1);
  const auto x = random_blobs(r, 100, 5);
  for (std::size_t k : {1u, 3u, 7u}) {
    const auto c = core_distances(x, k);
    for (std::size_t i = 0; i < 100; ++i) {
      std::vector<double> d;
      for (std::size_t j = 0; j < 100; ++j)
        if (j != i) d.push_back(oracle::dist(x, i, j));
      std::sort(d.begin(), d.end());
      CHECK(c(Eigen::Index(i)) == d[k - 1]);
    }
  }
}

TEST_CASE("mutual reachability on a line") {
  const auto x = line({0, 1, 5});
  const auto c = core_distances(x, 1);
  CHECK(mutual_reachability(0, 1, c, x) == 1.0);
  CHECK(mutual_reachability(1, 2, c, x) == 4.0);
  CHECK(mutual_reachability(0, 2, c, x) == 5.0);
  CHECK(mutual_reachability(2, 2, c, x) == c(2));
  CHECK(mutual_reachability(2, 0, c, x) == mutual_reachability(0, 2, c, x));
}

TEST_CASE("mst on a line and on two points") {
  const auto x = line({0, 1, 5});
  const auto t = build_mst(x, core_distances(x, 1));
  REQUIRE(t.size() == 2);
  CHECK(t[0] == MstEdge{0, 1, 1.0});
  CHECK(t[1] == MstEdge{1, 2, 4.0});
  const auto two = line({0, 3});
  CHECK(build_mst(two, core_distances(two, 1)).size() == 1);
}

TEST_CASE("mst weight equals Kruskal and is permutation invariant") {
  Rng r(2);
  for (int rep = 0; rep < 5; ++rep) {
    const auto x = random_blobs(r, 120, 3);
    const auto cores = core_distances(x, 4);
    const double w = mst_weight(build_mst(x, cores));
    // Kruskal over every pair.
    std::vector<oracle::OEdge> all;
    for (std::size_t i = 0; i < 120; ++i)
      for (std::size_t j = i + 1; j < 120; ++j)
        all.push_back({i, j, mutual_reachability(i, j, cores, x)});
    std::sort(all.begin(), all.end(), oracle::oedge_less);
    std::vector<std::size_t> comp(120);
    std::iota(comp.begin(), comp.end(), 0);
    auto find = [&](std::size_t v) {
      while (comp[v] != v) v = comp[v];
      return v;
    };
    double kw = 0;
    for (const auto& e : all)
      if (find(e.a) != find(e.b)) {
        comp[find(e.a)] = find(e.b);
        kw += e.w;
      }
    CHECK(w == doctest::Approx(kw).epsilon(1e-12));

    std::vector<Eigen::Index> perm(120);
    std::iota(perm.begin(), perm.end(), 0);
    r.shuffle(perm.begin(), perm.end());
    Matrix px(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < 120; ++i) px.row(i) = x.row(perm[std::size_t(i)]);
    CHECK(mst_weight(build_mst(px, core_distances(px, 4))) == doctest::Approx(w).epsilon(1e-12));
  }
}

TEST_CASE("two separated blobs give two clusters and no noise") {
  Rng r(4);
  Matrix x(20, 2);
  for (Eigen::Index i = 0; i < 20; ++i) {
    x(i, 0) = (i < 10 ? 0.0 : 100.0) + r.normal() * 0.5;
    x(i, 1) = r.normal() * 0.5;
  }
  const auto l = hdbscan(x, 5, 3);
  CHECK(l.cluster_sizes.size() == 2);
  CHECK(std::count(l.labels.begin(), l.labels.end(), kNoise) == 0);
  for (const auto& [id, size] : l.cluster_sizes) CHECK(size == 10);
}

TEST_CASE("identical points plus one distant point give one cluster and one noise point") {
  const auto x = line({3, 3, 3, 3, 3, 50});
  const auto l = hdbscan(x, 5, 2);
  CHECK(l.cluster_sizes.size() == 1);
  CHECK(l.labels[5] == kNoise);
  for (int i = 0; i < 5; ++i) CHECK(l.labels[std::size_t(i)] == 0);
  CHECK(oracle::same_partition(l.labels, oracle::BruteHdbscan(x, 5, 2).labels()));
}

TEST_CASE("equidistant points are labeled the same under shuffling") {
  // Vertices of a regular simplex: all pairwise distances equal.
  Matrix x = Matrix::Identity(7, 7);
  const auto base = hdbscan(x, 4, 2);
  std::vector<std::size_t> sizes;
  for (const auto& [id, s] : base.cluster_sizes) sizes.push_back(s);
  CHECK(sizes.size() <= 1);
  Rng r(9);
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<Eigen::Index> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    r.shuffle(perm.begin(), perm.end());
    Matrix px(7, 7);
    for (Eigen::Index i = 0; i < 7; ++i) px.row(i) = x.row(perm[std::size_t(i)]);
    const auto l = hdbscan(px, 4, 2);
    const std::size_t noise = std::size_t(std::count(l.labels.begin(), l.labels.end(), kNoise));
    CHECK(noise == std::size_t(std::count(base.labels.begin(), base.labels.end(), kNoise)));
  }
}

TEST_CASE("hdbscan agrees with the brute-force reference on random instances") {
  Rng r(2024);
  int matched = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 10 + r.below(191), d = 1 + r.below(5);
    const std::size_t mcs = 2 + r.below(9), k = 1 + r.below(8);
    const auto x = random_blobs(r, n, d);
    const auto got = hdbscan(x, mcs, k);
    oracle::BruteHdbscan ref(x, mcs, k);
    const bool ok = oracle::same_partition(got.labels, ref.labels());
    matched += ok;
    CHECK_MESSAGE(ok, "instance " << rep << " n=" << n << " d=" << d << " mcs=" << mcs << " k=" << k);
    for (const auto& [id, size] : got.cluster_sizes) CHECK(size >= mcs);
  }
  CHECK(matched == 50);
}

TEST_CASE("pca recovers an exact subspace") {
  Rng r(5);
  Matrix basis(2, 10);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis(i) = r.normal();
  Matrix coef(60, 2);
  for (Eigen::Index i = 0; i < coef.size(); ++i) coef(i) = r.normal();
  const Matrix x = coef * basis;
  const auto p = pca_reduce(x, 2);
  const Matrix recon = (p.projected * p.components).rowwise() + p.mean.transpose();
  CHECK((recon - x).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("pca at full dimension preserves distances") {
  Rng r(6);
  Matrix x(40, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = r.normal();
  const auto p = pca_reduce(x, 5 + 1);
  for (std::size_t i = 0; i < 40; i += 7)
    for (std::size_t j = 0; j < 40; j += 3)
      CHECK(std::abs(euclidean(x, i, j) - euclidean(p.projected, i, j)) <= 1e-9);
}

TEST_CASE("pca explained variance and components match a Jacobi oracle") {
  Rng r(7);
  Matrix x(50, 10);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(i, j) = r.normal() * double(j + 1);
  const auto p = pca_reduce(x, 3);
  const Vector mean = x.colwise().mean().transpose();
  std::vector<std::vector<double>> cov(10, std::vector<double>(10, 0.0));
  for (std::size_t a = 0; a < 10; ++a)
    for (std::size_t b = 0; b < 10; ++b) {
      double s = 0;
      for (Eigen::Index i = 0; i < 50; ++i)
        s += (x(i, Eigen::Index(a)) - mean(Eigen::Index(a))) * (x(i, Eigen::Index(b)) - mean(Eigen::Index(b)));
      cov[a][b] = s / 49.0;
    }
  auto e = oracle::jacobi(cov);
  std::vector<std::size_t> order(10);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return e.values[a] > e.values[b]; });
  for (Eigen::Index c = 0; c < 3; ++c) {
    const auto k = order[std::size_t(c)];
    CHECK(std::abs(p.explained_variance(c) - e.values[k]) <= 1e-8 * std::max(1.0, e.values[k]));
    // Largest-magnitude coordinate is positive.
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < 10; ++j)
      if (std::abs(p.components(c, j)) > std::abs(p.components(c, arg))) arg = j;
    CHECK(p.components(c, arg) > 0);
    const double sign = e.vectors[k][std::size_t(arg)] > 0 ? 1.0 : -1.0;
    for (Eigen::Index j = 0; j < 10; ++j) CHECK(std::abs(p.components(c, j) - sign * e.vectors[k][std::size_t(j)]) <= 1e-7);
  }
}

TEST_CASE("pca keeps rank components when asked for more") {
  Matrix x(30, 5);
  Rng r(8);
  for (Eigen::Index i = 0; i < 30; ++i) {
    const double a = r.normal();
    x.row(i) << a, 2 * a, -a, 0.5 * a, 3 * a;
  }
  const auto p = pca_reduce(x, 3);
  CHECK(p.rank == 1);
  CHECK(p.projected.cols() == 1);
  CHECK(!p.warnings.empty());
}

TEST_CASE("prepared points ignore row scale") {
  Rng r(31);
  Matrix x(40, 6);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = r.normal();
  x.row(7).setZero();
  Matrix scaled = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) scaled.row(i) *= r.uniform(0.1, 10.0);
  ClusterConfig c;
  c.pca_dims = std::nullopt;
  const auto a = prepare_points(x, c), b = prepare_points(scaled, c);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(a.row(7).norm() == 0.0);
  CHECK(std::abs(a.row(0).norm() - 1.0) <= 1e-12);
  c.pca_dims = 3;
  CHECK(prepare_points(x, c).cols() == 3);
  c.unit_rows = false;
  c.pca_dims = std::nullopt;
  CHECK(prepare_points(scaled, c) == scaled);
}

TEST_CASE("filter_nodes drops noise and hubs") {
  ClusterLabeling l;
  l.labels = {-1, 0, 0, 1, 1, 1, 1, 1, 1};
  const std::vector<TxnId> ids = {10, 11, 12, 13, 14, 15, 16, 17, 18};
  const auto f = filter_nodes(l, ids, 5);
  CHECK(f.retained == std::vector<TxnId>{11, 12});
  CHECK(f.dropped_noise == 1);
  CHECK(f.dropped_hub == 6);
  CHECK(f.retained.size() + f.dropped_noise + f.dropped_hub == ids.size());

  const auto open = filter_nodes(l, ids, std::numeric_limits<std::size_t>::max());
  CHECK(open.retained.size() == 8);
  CHECK(open.dropped_hub == 0);

  l.labels.assign(9, kNoise);
  CHECK(filter_nodes(l, ids, 5).retained.empty());
}

TEST_CASE("raising the hub threshold never shrinks the retained set") {
  Rng r(10);
  for (int rep = 0; rep < 20; ++rep) {
    ClusterLabeling l;
    std::vector<TxnId> ids;
    for (int i = 0; i < 200; ++i) {
      l.labels.push_back(int(r.below(12)) - 1);
      ids.push_back(i);
    }
    std::size_t prev = 0;
    for (std::size_t t = 0; t <= 40; t += 4) {
      const auto f = filter_nodes(l, ids, t);
      CHECK(f.retained.size() >= prev);
      prev = f.retained.size();
    }
  }
}

TEST_CASE("risky cluster metrics") {
  ClusterLabeling l;
  std::vector<bool> fraud;
  for (int i = 0; i < 10; ++i) {
    l.labels.push_back(0);
    fraud.push_back(i < 5);
  }
  for (int i = 0; i < 50; ++i) {
    l.labels.push_back(kNoise);
    fraud.push_back(i < 15);
  }
  const auto m = risky_cluster_metrics(l, fraud, {2, 0.1});
  CHECK(m.n_risky == 1);
  CHECK(m.precision == 0.5);
  CHECK(m.recall == 0.25);
  CHECK(m.f_score == doctest::Approx(2 * 0.5 * 0.25 / 0.75));
  CHECK(!m.flagged);

  std::vector<bool> none(l.labels.size(), false);
  const auto z = risky_cluster_metrics(l, none, {2, 0.1});
  CHECK(z.n_risky == 0);
  CHECK(z.precision == 0.0);
  CHECK(z.f_score == 0.0);
  CHECK(z.flagged);
}

TEST_CASE("clusters.csv round-trips") {
  TempDir dir;
  ClusterLabeling l;
  l.labels = {-1, 0, 1, 0};
  const std::vector<TxnId> ids = {4, 3, 2, 1};
  write_clusters(dir / "c.csv", ids, l);
  std::vector<TxnId> back;
  const auto r = read_clusters(dir / "c.csv", back);
  CHECK(back == ids);
  CHECK(r.labels == l.labels);
  CHECK(r.cluster_sizes.at(0) == 2);
}

TEST_CASE("cluster config validation") {
  ClusterConfig c;
  CHECK_NOTHROW(c.validate(64));
  c.pca_dims = 64;
  CHECK_THROWS_AS(c.validate(64), ConfigError);
  c = ClusterConfig{};
  c.min_cluster_size = 1;
  CHECK_THROWS_AS(c.validate(64), ConfigError);
}
