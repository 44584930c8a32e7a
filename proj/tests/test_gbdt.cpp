#include <cmath>
#include <numeric>

#include "doctest.h"

#include "slg/error.hpp"
#include "slg/gbdt.hpp"
#include "slg/metrics.hpp"
#include "slg/rng.hpp"
#include "test_util.hpp"

using namespace slg;
using namespace slg::gbdt;

namespace {

struct Data {
  Matrix x;
  std::vector<int> y;
};

// Label depends on an interaction of the first two columns plus noise.
Data noisy(Rng& r, std::size_t n, std::size_t d) {
  Data out{Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d)), {}};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) out.x(Eigen::Index(i), Eigen::Index(k)) = r.normal();
    const double m = out.x(Eigen::Index(i), 0) * out.x(Eigen::Index(i), 1) + 0.5 * out.x(Eigen::Index(i), 2);
    out.y.push_back(r.bernoulli(1.0 / (1.0 + std::exp(-2.0 * m))) ? 1 : 0);
  }
  return out;
}

GbdtConfig quick() {
  GbdtConfig c;
  c.n_trees = 30;
  c.max_depth = 3;
  c.min_leaf = 5;
  return c;
}

}  // namespace

TEST_CASE("training log-loss never increases") {
  Rng r(1);
  for (int rep = 0; rep < 5; ++rep) {
    const auto d = noisy(r, 400, 4);
    const auto m = train(d.x, d.y, quick());
    REQUIRE(m.train_logloss.size() == 31);
    for (std::size_t i = 1; i < m.train_logloss.size(); ++i) CHECK(m.train_logloss[i] <= m.train_logloss[i - 1] + 1e-12);
    CHECK(m.train_logloss.back() < m.train_logloss.front());
    CHECK(std::abs(log_loss(predict(m, d.x), d.y) - m.train_logloss.back()) <= 1e-9);
  }
}

TEST_CASE("a separable problem reaches AUC 1 within ten rounds") {
  Rng r(2);
  Matrix x(200, 3);
  std::vector<int> y;
  for (Eigen::Index i = 0; i < 200; ++i) {
    x.row(i) << r.normal(), r.uniform(), r.normal();
    y.push_back(x(i, 1) > 0.6 ? 1 : 0);
  }
  auto c = quick();
  c.n_trees = 10;
  const auto m = train(x, y, c);
  CHECK(metrics::roc_auc(predict(m, x), y).value == 1.0);
}

TEST_CASE("permuting columns permutes nothing in the predictions") {
  Rng r(3);
  const auto d = noisy(r, 300, 5);
  const std::vector<Eigen::Index> perm = {3, 0, 4, 2, 1};
  Matrix xp(d.x.rows(), d.x.cols());
  for (Eigen::Index k = 0; k < 5; ++k) xp.col(k) = d.x.col(perm[std::size_t(k)]);
  const auto a = predict(train(d.x, d.y, quick()), d.x);
  const auto b = predict(train(xp, d.y, quick()), xp);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= 1e-12);
}

TEST_CASE("prediction is pure and row independent") {
  Rng r(4);
  const auto d = noisy(r, 300, 4);
  const auto m = train(d.x, d.y, quick());
  const auto all = predict(m, d.x);
  CHECK(predict(m, d.x) == all);
  for (Eigen::Index i = 0; i < 300; i += 37) {
    const Matrix one = d.x.row(i);
    CHECK(predict(m, one)[0] == all[std::size_t(i)]);
  }
  for (const auto& t : m.trees) CHECK(t.depth() <= 3);
}

TEST_CASE("training is deterministic, subsampling included") {
  Rng r(5);
  const auto d = noisy(r, 300, 4);
  auto c = quick();
  c.subsample = 0.7;
  CHECK(train(d.x, d.y, c) == train(d.x, d.y, c));
  auto c2 = c;
  c2.seed = 99;
  CHECK(!(train(d.x, d.y, c2) == train(d.x, d.y, c)));
}

TEST_CASE("model JSON round-trips with identical predictions") {
  TempDir dir;
  Rng r(6);
  const auto d = noisy(r, 300, 4);
  const auto m = train(d.x, d.y, quick());
  save_model(m, dir / "m.json");
  const auto back = load_model(dir / "m.json");
  CHECK(back == m);
  CHECK(predict(back, d.x) == predict(m, d.x));
}

TEST_CASE("single-class labels give a constant model with a warning") {
  Matrix x = Matrix::Random(20, 2);
  const auto m = train(x, std::vector<int>(20, 0), quick());
  CHECK(m.trees.empty());
  CHECK(!m.warnings.empty());
  const auto p = predict(m, x);
  for (double v : p) CHECK(v == p[0]);
  CHECK(p[0] < 1e-3);
}

TEST_CASE("boost_concat appends vectors and an indicator") {
  Matrix raw(3, 2);
  raw << 1, 2, 3, 4, 5, 6;
  Matrix bv(2, 3);
  bv << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
  const EmbeddingTable boost({10, 30}, bv);
  const auto x = boost_concat(raw, {10, 20, 30}, boost);
  REQUIRE(x.cols() == 6);
  CHECK(x.row(0) == (Eigen::RowVectorXd(6) << 1, 2, 0.1, 0.2, 0.3, 1).finished());
  CHECK(x.row(1) == (Eigen::RowVectorXd(6) << 3, 4, 0, 0, 0, 0).finished());
  CHECK(x.row(2) == (Eigen::RowVectorXd(6) << 5, 6, 0.4, 0.5, 0.6, 1).finished());
  CHECK_THROWS_AS(boost_concat(raw, {10}, boost), ContractViolation);
}

TEST_CASE("gbdt config validation") {
  GbdtConfig c;
  CHECK_NOTHROW(c.validate());
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GbdtConfig{};
  c.subsample = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GbdtConfig{};
  c.max_depth = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
