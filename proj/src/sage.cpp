#include "slg/sage.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "slg/error.hpp"

namespace slg::sage {

using Idx = Eigen::Index;
namespace {
Idx ix(std::size_t v) { return static_cast<Idx>(v); }
constexpr double kSigmaFloor = 1e-12;
constexpr double kNormFloor = 1e-12;
}  // namespace

std::string_view to_string(NegStrategy s) {
  return s == NegStrategy::uniform ? "uniform" : "distance_weighted";
}

NegStrategy parse_neg_strategy(std::string_view s) {
  if (s == "uniform") return NegStrategy::uniform;
  if (s == "distance_weighted") return NegStrategy::distance_weighted;
  throw ConfigError("unknown negative sampling strategy '" + std::string(s) + "'");
}

void SageConfig::validate() const {
  if (depth < 1) throw ConfigError("sage.depth must be >= 1");
  if (fanouts.size() != depth) throw ConfigError("sage.fanouts must have exactly depth entries");
  for (auto f : fanouts)
    if (f < 1) throw ConfigError("sage.fanouts entries must be >= 1");
  if (in_dim == 0 || hidden_dim == 0 || out_dim == 0) throw ConfigError("sage dimensions must be positive");
  if (q < 1) throw ConfigError("sage.q must be >= 1");
  if (walk_length < 1) throw ConfigError("sage.walk_length must be >= 1");
  if (window < 1) throw ConfigError("sage.window must be >= 1");
  if (walks_per_node < 1) throw ConfigError("sage.walks_per_node must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("sage.lr must be positive");
  if (batch < 1) throw ConfigError("sage.batch must be >= 1");
  if (!(beta >= 0.0)) throw ConfigError("sage.beta must be >= 0");
}

SageParams SageParams::zeros_like() const {
  SageParams z = *this;
  for (auto& l : z.layers) {
    l.w.setZero();
    l.b.setZero();
  }
  return z;
}

bool SageParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.w.allFinite() || !l.b.allFinite()) return false;
  return true;
}

bool SageParams::operator==(const SageParams& o) const {
  if (layers.size() != o.layers.size()) return false;
  auto same = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() &&
           std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
  };
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (!same(layers[i].w, o.layers[i].w) || !same(layers[i].b, o.layers[i].b)) return false;
  return true;
}

SageParams init_params(const SageConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x5a6e));
  SageParams p;
  std::size_t prev = cfg.in_dim;
  for (std::size_t k = 0; k < cfg.depth; ++k) {
    const std::size_t next = k + 1 == cfg.depth ? cfg.out_dim : cfg.hidden_dim;
    Layer l;
    l.w = Matrix(ix(2 * prev), ix(next));
    const double scale = std::sqrt(6.0 / static_cast<double>(2 * prev + next));
    for (Idx i = 0; i < l.w.size(); ++i) l.w.data()[i] = rng.uniform(-scale, scale);
    l.b = Matrix::Zero(1, ix(next));
    p.layers.push_back(std::move(l));
    prev = next;
  }
  return p;
}

std::vector<std::uint32_t> sample_neighbors(const TxnGraph& g, std::size_t v, std::size_t fanout, Rng& rng) {
  const auto nbrs = g.neighbors(v);
  const std::size_t deg = nbrs.size();
  std::vector<std::uint32_t> out;
  if (deg == 0 || fanout == 0) return out;
  out.reserve(fanout);
  if (deg >= fanout) {
    // Partial Fisher-Yates over a copy.
    std::vector<std::uint32_t> pool(nbrs.begin(), nbrs.end());
    for (std::size_t i = 0; i < fanout; ++i) {
      const auto j = i + rng.below(deg - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }
  out.assign(nbrs.begin(), nbrs.end());
  while (out.size() < fanout) out.push_back(nbrs[rng.below(deg)]);
  return out;
}

Vector aggregate_mean(const std::vector<Vector>& vectors, std::size_t dim) {
  Vector m = Vector::Zero(ix(dim));
  if (vectors.empty()) return m;
  for (const auto& v : vectors) {
    if (static_cast<std::size_t>(v.size()) != dim) throw ContractViolation("aggregate_mean: dimension mismatch");
    m += v;
  }
  return m / static_cast<double>(vectors.size());
}

SamplePlan make_plan(const TxnGraph& g, std::vector<std::uint32_t> targets, const std::vector<std::size_t>& fanouts,
                     std::uint64_t seed, SampleMode mode) {
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  SamplePlan plan;
  const std::size_t depth = fanouts.size();
  plan.depth = depth;
  plan.nodes.assign(depth + 1, {});
  plan.self.assign(depth + 1, {});
  plan.children.assign(depth + 1, {});
  plan.nodes[depth] = std::move(targets);
  std::vector<std::int64_t> slot(g.node_count(), -1);
  for (std::size_t k = depth; k >= 1; --k) {
    const std::size_t fanout = fanouts[depth - k];
    const auto& upper = plan.nodes[k];
    auto& lower = plan.nodes[k - 1];
    lower = upper;
    for (std::size_t i = 0; i < lower.size(); ++i) slot[lower[i]] = static_cast<std::int64_t>(i);
    plan.self[k].resize(upper.size());
    plan.children[k].resize(upper.size());
    for (std::size_t i = 0; i < upper.size(); ++i) {
      const std::uint32_t v = upper[i];
      plan.self[k][i] = static_cast<std::uint32_t>(i);
      std::vector<std::uint32_t> picks;
      const auto nbrs = g.neighbors(v);
      if (mode == SampleMode::inference && nbrs.size() <= fanout) {
        picks.assign(nbrs.begin(), nbrs.end());
      } else {
        Rng rng(derive_seed(seed, k, static_cast<std::uint64_t>(g.id(v))));
        picks = sample_neighbors(g, v, fanout, rng);
      }
      std::sort(picks.begin(), picks.end());
      auto& kids = plan.children[k][i];
      kids.reserve(picks.size());
      for (auto s : picks) {
        if (slot[s] < 0) {
          slot[s] = static_cast<std::int64_t>(lower.size());
          lower.push_back(s);
        }
        kids.push_back(static_cast<std::uint32_t>(slot[s]));
      }
    }
    for (auto s : lower) slot[s] = -1;
  }
  return plan;
}

namespace {

struct Pass {
  std::vector<Matrix> h;    // h[k] rows follow plan.nodes[k]
  std::vector<Matrix> a;    // layer inputs [self ; neighbor mean]
  std::vector<Matrix> pre;  // pre-activations
  Matrix z;
  Vector norm;
};

void run_forward(const SageParams& p, const Matrix& features, const SamplePlan& plan, Pass& s) {
  const std::size_t depth = plan.depth;
  if (p.layers.size() != depth) throw ConfigError("sage: parameter depth does not match the sample plan");
  if (static_cast<std::size_t>(p.layers[0].w.rows()) != 2 * static_cast<std::size_t>(features.cols()))
    throw ConfigError("sage: feature dimension does not match the first layer");
  s.h.assign(depth + 1, Matrix());
  s.a.assign(depth + 1, Matrix());
  s.pre.assign(depth + 1, Matrix());
  const auto& base = plan.nodes[0];
  s.h[0].resize(ix(base.size()), features.cols());
  for (std::size_t i = 0; i < base.size(); ++i) s.h[0].row(ix(i)) = features.row(ix(base[i]));
  for (std::size_t k = 1; k <= depth; ++k) {
    const Matrix& prev = s.h[k - 1];
    const Idx d = prev.cols();
    const std::size_t n = plan.nodes[k].size();
    Matrix& a = s.a[k];
    a = Matrix::Zero(ix(n), 2 * d);
    for (std::size_t i = 0; i < n; ++i) {
      a.row(ix(i)).head(d) = prev.row(plan.self[k][i]);
      const auto& kids = plan.children[k][i];
      if (kids.empty()) continue;
      auto agg = a.row(ix(i)).tail(d);
      for (auto c : kids) agg += prev.row(c);
      agg /= static_cast<double>(kids.size());
    }
    const Layer& layer = p.layers[k - 1];
    s.pre[k] = a * layer.w;
    s.pre[k].rowwise() += layer.b.row(0);
    s.h[k] = k < depth ? s.pre[k].cwiseMax(0.0) : s.pre[k];
  }
  const Matrix& top = s.h[depth];
  s.z.resize(top.rows(), top.cols());
  s.norm.resize(top.rows());
  for (Idx i = 0; i < top.rows(); ++i) {
    const double nrm = top.row(i).norm();
    s.norm(i) = nrm;
    if (nrm < kNormFloor) {
      s.z.row(i).setZero();
      s.z(i, 0) = 1.0;
    } else {
      s.z.row(i) = top.row(i) / nrm;
    }
  }
}

void run_backward(const SageParams& p, const SamplePlan& plan, const Pass& s, const Matrix& dz, SageParams& g) {
  const std::size_t depth = plan.depth;
  Matrix dh(dz.rows(), dz.cols());
  for (Idx i = 0; i < dz.rows(); ++i) {
    if (s.norm(i) < kNormFloor) {
      dh.row(i).setZero();
      continue;
    }
    const double proj = s.z.row(i).dot(dz.row(i));
    dh.row(i) = (dz.row(i) - proj * s.z.row(i)) / s.norm(i);
  }
  for (std::size_t k = depth; k >= 1; --k) {
    Matrix dpre = dh;
    if (k < depth) dpre.array() *= (s.pre[k].array() > 0.0).cast<double>();
    Layer& gl = g.layers[k - 1];
    gl.w.noalias() += s.a[k].transpose() * dpre;
    gl.b += dpre.colwise().sum();
    if (k == 1) break;
    const Matrix da = dpre * p.layers[k - 1].w.transpose();
    const Idx d = s.h[k - 1].cols();
    Matrix lower = Matrix::Zero(s.h[k - 1].rows(), d);
    for (std::size_t i = 0; i < plan.nodes[k].size(); ++i) {
      lower.row(plan.self[k][i]) += da.row(ix(i)).head(d);
      const auto& kids = plan.children[k][i];
      if (kids.empty()) continue;
      const double w = 1.0 / static_cast<double>(kids.size());
      for (auto c : kids) lower.row(c) += w * da.row(ix(i)).tail(d);
    }
    dh = std::move(lower);
  }
}

double log_sigmoid(double x) { return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// -log max(sigma(x), floor) and its derivative in x.
double neg_log_sigmoid(double x, double* dx) {
  const double ls = log_sigmoid(x);
  const double floor = std::log(kSigmaFloor);
  if (ls < floor) {
    if (dx) *dx = 0.0;
    return -floor;
  }
  if (dx) *dx = -sigmoid(-x);
  return -ls;
}

}  // namespace

Matrix forward(const SageParams& params, const Matrix& features, const SamplePlan& plan) {
  Pass s;
  run_forward(params, features, plan, s);
  return s.z;
}

double pair_loss(const Vector& zu, const Vector& zv, const std::vector<Vector>& negatives, std::size_t q) {
  double loss = neg_log_sigmoid(zu.dot(zv), nullptr);
  if (negatives.empty()) return loss;
  const double scale = static_cast<double>(q) / static_cast<double>(negatives.size());
  for (const auto& zn : negatives) loss += scale * neg_log_sigmoid(-zu.dot(zn), nullptr);
  return loss;
}

std::vector<std::uint32_t> batch_targets(const PairBatch& batch) {
  std::vector<std::uint32_t> t;
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
    t.push_back(batch.pairs[i].first);
    t.push_back(batch.pairs[i].second);
    if (i < batch.negatives.size()) t.insert(t.end(), batch.negatives[i].begin(), batch.negatives[i].end());
  }
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

double batch_loss_and_grad(const SageParams& params, const Matrix& features, const SamplePlan& plan,
                           const PairBatch& batch, std::size_t q, SageParams* grad) {
  if (batch.pairs.empty()) return 0.0;
  if (batch.negatives.size() != batch.pairs.size())
    throw ContractViolation("sage: negatives must be given for every pair");
  Pass s;
  run_forward(params, features, plan, s);
  const auto& targets = plan.nodes[plan.depth];
  auto row = [&](std::uint32_t v) {
    auto it = std::lower_bound(targets.begin(), targets.end(), v);
    if (it == targets.end() || *it != v) throw ContractViolation("sage: pair node missing from the sample plan");
    return static_cast<Idx>(it - targets.begin());
  };
  const double inv = 1.0 / static_cast<double>(batch.pairs.size());
  Matrix dz = Matrix::Zero(s.z.rows(), s.z.cols());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.pairs.size(); ++i) {
    const Idx u = row(batch.pairs[i].first), v = row(batch.pairs[i].second);
    double d = 0.0;
    total += neg_log_sigmoid(s.z.row(u).dot(s.z.row(v)), &d);
    dz.row(u) += inv * d * s.z.row(v);
    dz.row(v) += inv * d * s.z.row(u);
    const auto& negs = batch.negatives[i];
    if (negs.empty()) continue;
    const double scale = static_cast<double>(q) / static_cast<double>(negs.size());
    for (auto nv : negs) {
      const Idx n = row(nv);
      double dn = 0.0;
      total += scale * neg_log_sigmoid(-s.z.row(u).dot(s.z.row(n)), &dn);
      // d/ds of -log sigma(-s) is -dn.
      dz.row(u) -= inv * scale * dn * s.z.row(n);
      dz.row(n) -= inv * scale * dn * s.z.row(u);
    }
  }
  if (grad) run_backward(params, plan, s, dz, *grad);
  return total * inv;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> positive_pairs(const TxnGraph& g, const SageConfig& cfg,
                                                                     Rng& rng) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  std::vector<std::uint32_t> walk;
  for (std::size_t v = 0; v < g.node_count(); ++v) {
    if (g.degree(v) == 0) continue;
    for (std::size_t w = 0; w < cfg.walks_per_node; ++w) {
      walk.assign(1, static_cast<std::uint32_t>(v));
      std::size_t cur = v;
      for (std::size_t step = 0; step < cfg.walk_length; ++step) {
        const auto nbrs = g.neighbors(cur);
        cur = nbrs[rng.below(nbrs.size())];
        walk.push_back(static_cast<std::uint32_t>(cur));
      }
      for (std::size_t i = 0; i < walk.size(); ++i)
        for (std::size_t j = 0; j < walk.size(); ++j) {
          const std::size_t gap = i > j ? i - j : j - i;
          if (gap == 0 || gap > cfg.window || walk[i] == walk[j]) continue;
          pairs.emplace_back(walk[i], walk[j]);
        }
    }
  }
  return pairs;
}

BehaviorIndex BehaviorIndex::build(const TxnGraph& g, const EmbeddingTable& embeddings) {
  BehaviorIndex b;
  b.unit = Matrix::Zero(ix(g.node_count()), ix(embeddings.dim()));
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    auto r = embeddings.row_of(g.id(i));
    if (!r) continue;
    const auto v = embeddings.vectors().row(ix(*r));
    const double n = v.norm();
    if (n > 0.0) b.unit.row(ix(i)) = v / n;
  }
  return b;
}

NegativeDraw negative_sample(std::size_t u, const TxnGraph& g, const BehaviorIndex* behavior, const SageConfig& cfg,
                             Rng& rng) {
  NegativeDraw out;
  const std::size_t n = g.node_count();
  const std::size_t eligible = n - 1 - g.degree(u);
  if (eligible == 0) {
    out.flagged = true;
    return out;
  }
  auto ok = [&](std::size_t w) { return w != u && !g.adjacent(u, w); };
  const bool weighted = cfg.neg_strategy == NegStrategy::distance_weighted && behavior != nullptr;
  const std::size_t pool_size = weighted ? cfg.neg_pool : cfg.q;
  // Enumerate when rejection would be slow or the whole eligible set is wanted.
  const bool enumerate = eligible < cfg.q || eligible * 4 < n || (weighted && (pool_size == 0 || eligible <= pool_size));
  std::vector<std::uint32_t> pool;
  if (enumerate) {
    pool.reserve(eligible);
    for (std::size_t w = 0; w < n; ++w)
      if (ok(w)) pool.push_back(static_cast<std::uint32_t>(w));
  }
  auto draw_uniform = [&]() -> std::uint32_t {
    if (enumerate) return pool[rng.below(pool.size())];
    for (;;) {
      const auto w = rng.below(n);
      if (ok(w)) return static_cast<std::uint32_t>(w);
    }
  };
  if (eligible < cfg.q) out.flagged = true;
  if (!weighted) {
    for (std::size_t i = 0; i < cfg.q; ++i) out.nodes.push_back(draw_uniform());
    return out;
  }
  if (!enumerate) {
    pool.reserve(pool_size);
    for (std::size_t i = 0; i < pool_size; ++i) pool.push_back(draw_uniform());
  }
  std::vector<double> cum(pool.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const double cos = behavior->unit.row(ix(u)).dot(behavior->unit.row(pool[i]));
    const double w = std::pow(std::max(0.0, 1.0 - cos), cfg.beta);
    total += w;
    cum[i] = total;
  }
  if (!(total > 0.0)) {
    out.flagged = true;
    for (std::size_t i = 0; i < cfg.q; ++i) out.nodes.push_back(pool[rng.below(pool.size())]);
    return out;
  }
  for (std::size_t i = 0; i < cfg.q; ++i) {
    const double x = rng.uniform() * total;
    auto it = std::upper_bound(cum.begin(), cum.end(), x);
    if (it == cum.end()) --it;
    out.nodes.push_back(pool[static_cast<std::size_t>(it - cum.begin())]);
  }
  return out;
}

TrainResult train(const TxnGraph& g, const Matrix& features, const BehaviorIndex* behavior, const SageConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(features.rows()) != g.node_count())
    throw ConfigError("sage.train: feature rows do not match graph nodes");
  if (static_cast<std::size_t>(features.cols()) != cfg.in_dim)
    throw ConfigError("sage.train: feature dimension does not match in_dim");
  TrainResult r;
  r.params = init_params(cfg);
  SageParams m1 = r.params.zeros_like(), m2 = r.params.zeros_like();
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs && !r.diverged; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng walk_rng(derive_seed(cfg.seed, 0x3a1c, epoch));
    auto pairs = positive_pairs(g, cfg, walk_rng);
    if (pairs.empty()) throw ConsistencyError("sage.train: no positive pairs (every node is isolated)");
    walk_rng.shuffle(pairs.begin(), pairs.end());
    if (cfg.max_pairs_per_epoch > 0 && pairs.size() > cfg.max_pairs_per_epoch) pairs.resize(cfg.max_pairs_per_epoch);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t s = 0, bi = 0; s < pairs.size(); s += cfg.batch, ++bi) {
      Rng neg_rng(derive_seed(cfg.seed, 0x9e6, epoch, bi));
      PairBatch batch;
      for (std::size_t i = s; i < std::min(pairs.size(), s + cfg.batch); ++i) {
        batch.pairs.push_back(pairs[i]);
        auto draw = negative_sample(pairs[i].first, g, behavior, cfg, neg_rng);
        r.negative_fallbacks += draw.flagged;
        batch.negatives.push_back(std::move(draw.nodes));
      }
      const auto plan =
          make_plan(g, batch_targets(batch), cfg.fanouts, derive_seed(cfg.seed, 0x71a2, epoch, bi), SampleMode::train);
      SageParams grad = r.params.zeros_like();
      const double loss = batch_loss_and_grad(r.params, features, plan, batch, cfg.q, &grad);
      if (!std::isfinite(loss) || !grad.all_finite()) {
        r.diverged = true;
        r.diagnostic = "non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi);
        break;
      }
      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      auto update = [&](Matrix& w, const Matrix& gw, Matrix& m, Matrix& v) {
        m.array() = kBeta1 * m.array() + (1.0 - kBeta1) * gw.array();
        v.array() = kBeta2 * v.array() + (1.0 - kBeta2) * gw.array().square();
        w.array() -= cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
      };
      for (std::size_t k = 0; k < r.params.layers.size(); ++k) {
        update(r.params.layers[k].w, grad.layers[k].w, m1.layers[k].w, m2.layers[k].w);
        update(r.params.layers[k].b, grad.layers[k].b, m1.layers[k].b, m2.layers[k].b);
      }
      sum += loss;
      ++batches;
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    r.epochs.push_back({epoch, batches ? sum / static_cast<double>(batches) : 0.0, ms, pairs.size()});
  }
  return r;
}

EmbeddingTable embed_nodes(const SageParams& params, const TxnGraph& g, const Matrix& features,
                           const SageConfig& cfg, std::uint64_t seed) {
  const std::size_t n = g.node_count();
  const std::size_t out_dim = params.layers.empty() ? 0 : static_cast<std::size_t>(params.layers.back().w.cols());
  Matrix z(ix(n), ix(out_dim));
  constexpr std::size_t kChunk = 2048;
  const std::uint64_t key = derive_seed(seed, 0xe4b);
  for (std::size_t s = 0; s < n; s += kChunk) {
    std::vector<std::uint32_t> targets;
    for (std::size_t i = s; i < std::min(n, s + kChunk); ++i) targets.push_back(static_cast<std::uint32_t>(i));
    const auto plan = make_plan(g, targets, cfg.fanouts, key, SampleMode::inference);
    const Matrix out = forward(params, features, plan);
    z.middleRows(ix(s), out.rows()) = out;
  }
  return EmbeddingTable(g.nodes(), std::move(z));
}

Matrix standardize_columns(const Matrix& x) {
  Matrix out = x;
  if (x.rows() == 0) return out;
  for (Idx j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double var = (x.col(j).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd > 0.0)
      out.col(j) = (x.col(j).array() - mean) / sd;
    else
      out.col(j).setZero();
  }
  return out;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix json_matrix(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Idx>(), cols = j.at("cols").get<Idx>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Idx>(data.size()) != rows * cols) throw ConfigError("sage params: matrix size mismatch");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

void save_params(const SageParams& params, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "slg-sage-params";
  j["version"] = 1;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : params.layers) j["layers"].push_back({{"w", matrix_json(l.w)}, {"b", matrix_json(l.b)}});
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write sage params", path.string());
  os << j.dump() << '\n';
  if (!os) throw IoError("failed writing sage params", path.string());
}

SageParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open sage params", path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed sage params (") + e.what() + ")", path.string());
  }
  if (j.value("format", "") != "slg-sage-params" || j.value("version", 0) != 1)
    throw IoError("unsupported sage params file", path.string());
  SageParams p;
  for (const auto& l : j.at("layers")) p.layers.push_back({json_matrix(l.at("w")), json_matrix(l.at("b"))});
  return p;
}

}  // namespace slg::sage
