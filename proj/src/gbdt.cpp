#include "slg/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

#include "slg/error.hpp"
#include "slg/parallel.hpp"
#include "slg/rng.hpp"

namespace slg::gbdt {

using Idx = Eigen::Index;

void GbdtConfig::validate() const {
  if (n_trees < 1) throw ConfigError("gbdt.n_trees must be >= 1");
  if (max_depth < 1) throw ConfigError("gbdt.max_depth must be >= 1");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ConfigError("gbdt.learning_rate must lie in (0, 1]");
  if (min_leaf < 1) throw ConfigError("gbdt.min_leaf must be >= 1");
  if (!(subsample > 0.0 && subsample <= 1.0)) throw ConfigError("gbdt.subsample must lie in (0, 1]");
  if (!(lambda >= 0.0)) throw ConfigError("gbdt.lambda must be >= 0");
}

double Tree::eval(const double* row) const {
  int k = 0;
  while (nodes[static_cast<std::size_t>(k)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(k)];
    k = row[n.feature] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(k)].value;
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double GbdtModel::margin(const double* row) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.eval(row);
  return base_score + learning_rate * s;
}

namespace {

double sigmoid(double z) { return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

struct NodeStats {
  double g = 0.0, h = 0.0;
  std::size_t count = 0;
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

double score(double g, double h, double lambda) { return g * g / (h + lambda); }

class TreeGrower {
 public:
  TreeGrower(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& sorted, const GbdtConfig& cfg)
      : x_(x), sorted_(sorted), cfg_(cfg) {}

  Tree grow(const std::vector<double>& g, const std::vector<double>& h, const std::vector<char>& in_sample) {
    const std::size_t n = static_cast<std::size_t>(x_.rows());
    Tree tree;
    tree.nodes.emplace_back();
    node_of_.assign(n, -1);
    for (std::size_t r = 0; r < n; ++r)
      if (in_sample[r]) node_of_[r] = 0;
    std::vector<int> frontier = {0};
    std::vector<NodeStats> stats(1);
    accumulate(g, h, stats, frontier);
    for (std::size_t depth = 0; depth < cfg_.max_depth && !frontier.empty(); ++depth) {
      const auto best = find_splits(g, h, frontier, stats);
      std::vector<int> next;
      std::vector<int> remap(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        const int id = frontier[s];
        if (best[s].feature < 0) {
          finish_leaf(tree, id, stats[s]);
          continue;
        }
        auto& node = tree.nodes[static_cast<std::size_t>(id)];
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.left = static_cast<int>(tree.nodes.size());
        node.right = node.left + 1;
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        next.push_back(tree.nodes[static_cast<std::size_t>(id)].left);
        next.push_back(tree.nodes[static_cast<std::size_t>(id)].right);
      }
      for (std::size_t r = 0; r < n; ++r) {
        const int k = node_of_[r];
        if (k < 0) continue;
        const auto& node = tree.nodes[static_cast<std::size_t>(k)];
        if (node.feature < 0) {
          node_of_[r] = -1;  // settled in a leaf
          continue;
        }
        node_of_[r] = x_(static_cast<Idx>(r), node.feature) < node.threshold ? node.left : node.right;
      }
      frontier = std::move(next);
      stats.assign(frontier.size(), NodeStats{});
      accumulate(g, h, stats, frontier);
    }
    for (std::size_t s = 0; s < frontier.size(); ++s) finish_leaf(tree, frontier[s], stats[s]);
    return tree;
  }

 private:
  void accumulate(const std::vector<double>& g, const std::vector<double>& h, std::vector<NodeStats>& stats,
                  const std::vector<int>& frontier) {
    slot_.assign(slot_.size() < node_limit() ? node_limit() : slot_.size(), -1);
    for (std::size_t s = 0; s < frontier.size(); ++s) slot_[static_cast<std::size_t>(frontier[s])] = static_cast<int>(s);
    for (std::size_t r = 0; r < node_of_.size(); ++r) {
      const int k = node_of_[r];
      if (k < 0) continue;
      auto& st = stats[static_cast<std::size_t>(slot_[static_cast<std::size_t>(k)])];
      st.g += g[r];
      st.h += h[r];
      ++st.count;
    }
  }

  std::size_t node_limit() const { return (std::size_t{2} << cfg_.max_depth) + 1; }

  void finish_leaf(Tree& tree, int id, const NodeStats& st) {
    auto& node = tree.nodes[static_cast<std::size_t>(id)];
    node.feature = -1;
    node.value = st.count ? -st.g / (st.h + cfg_.lambda) : 0.0;
  }

  std::vector<Split> find_splits(const std::vector<double>& g, const std::vector<double>& h,
                                 const std::vector<int>& frontier, const std::vector<NodeStats>& stats) {
    const std::size_t d = sorted_.size();
    const std::size_t m = frontier.size();
    std::vector<std::vector<Split>> per_feature(d, std::vector<Split>(m));
    parallel_blocks(d, thread_count(), [&](std::size_t fb, std::size_t fe, std::size_t) {
      std::vector<NodeStats> left(m);
      std::vector<double> last(m);
      std::vector<char> seen(m);
      for (std::size_t f = fb; f < fe; ++f) {
        std::fill(left.begin(), left.end(), NodeStats{});
        std::fill(seen.begin(), seen.end(), 0);
        auto& best = per_feature[f];
        for (auto r : sorted_[f]) {
          const int k = node_of_[r];
          if (k < 0) continue;
          const auto s = static_cast<std::size_t>(slot_[static_cast<std::size_t>(k)]);
          const double v = x_(static_cast<Idx>(r), static_cast<Idx>(f));
          auto& l = left[s];
          if (seen[s] && v != last[s]) {
            const auto& tot = stats[s];
            const std::size_t cr = tot.count - l.count;
            if (l.count >= cfg_.min_leaf && cr >= cfg_.min_leaf) {
              const double gain = score(l.g, l.h, cfg_.lambda) + score(tot.g - l.g, tot.h - l.h, cfg_.lambda) -
                                  score(tot.g, tot.h, cfg_.lambda);
              if (gain > best[s].gain) {
                double thr = last[s] + (v - last[s]) / 2.0;
                if (!(last[s] < thr)) thr = v;
                best[s] = {gain, static_cast<int>(f), thr};
              }
            }
          }
          l.g += g[r];
          l.h += h[r];
          ++l.count;
          last[s] = v;
          seen[s] = 1;
        }
      }
    });
    std::vector<Split> best(m);
    for (std::size_t f = 0; f < d; ++f)
      for (std::size_t s = 0; s < m; ++s)
        if (per_feature[f][s].gain > best[s].gain) best[s] = per_feature[f][s];
    return best;
  }

  const Matrix& x_;
  const std::vector<std::vector<std::uint32_t>>& sorted_;
  const GbdtConfig& cfg_;
  std::vector<int> node_of_;
  std::vector<int> slot_;
};

}  // namespace

double log_loss(const std::vector<double>& p, const std::vector<int>& y) {
  if (p.size() != y.size()) throw ContractViolation("log_loss: size mismatch");
  if (p.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], 1e-15, 1.0 - 1e-15);
    s -= y[i] ? std::log(q) : std::log1p(-q);
  }
  return s / static_cast<double>(p.size());
}

GbdtModel train(const Matrix& x, const std::vector<int>& y, const GbdtConfig& cfg) {
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(x.rows());
  const std::size_t d = static_cast<std::size_t>(x.cols());
  if (y.size() != n) throw ContractViolation("gbdt.train: labels do not match rows");
  if (n < 2) throw ConfigError("gbdt.train: need at least 2 rows");
  GbdtModel model;
  model.learning_rate = cfg.learning_rate;
  model.n_features = d;
  const auto pos = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](int v) { return v != 0; }));
  double rate = static_cast<double>(pos) / static_cast<double>(n);
  if (pos == 0 || pos == n) {
    rate = std::clamp(rate, 1e-6, 1.0 - 1e-6);
    model.base_score = std::log(rate / (1.0 - rate));
    model.warnings.push_back("single-class labels; constant model");
    model.train_logloss.push_back(log_loss(std::vector<double>(n, rate), y));
    return model;
  }
  model.base_score = std::log(rate / (1.0 - rate));

  std::vector<std::vector<std::uint32_t>> sorted(d);
  parallel_for(d, [&](std::size_t f) {
    auto& idx = sorted[f];
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), 0U);
    std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      return x(static_cast<Idx>(a), static_cast<Idx>(f)) < x(static_cast<Idx>(b), static_cast<Idx>(f));
    });
  });

  std::vector<double> margin(n, model.base_score), p(n), g(n), h(n);
  std::vector<char> in_sample(n, 1);
  for (std::size_t i = 0; i < n; ++i) p[i] = sigmoid(margin[i]);
  model.train_logloss.push_back(log_loss(p, y));
  TreeGrower grower(x, sorted, cfg);
  Rng rng(derive_seed(cfg.seed, 0x6bd7));
  for (std::size_t round = 0; round < cfg.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = p[i] - (y[i] ? 1.0 : 0.0);
      h[i] = p[i] * (1.0 - p[i]);
    }
    if (cfg.subsample < 1.0)
      for (std::size_t i = 0; i < n; ++i) in_sample[i] = rng.bernoulli(cfg.subsample);
    Tree tree = grower.grow(g, h, in_sample);
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] += cfg.learning_rate * tree.eval(x.row(static_cast<Idx>(i)).data());
      p[i] = sigmoid(margin[i]);
    }
    model.trees.push_back(std::move(tree));
    model.train_logloss.push_back(log_loss(p, y));
  }
  return model;
}

std::vector<double> predict(const GbdtModel& model, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.n_features)
    throw ConfigError("gbdt.predict: feature dimension " + std::to_string(x.cols()) + " does not match the model's " +
                      std::to_string(model.n_features));
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Idx i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = sigmoid(model.margin(x.row(i).data()));
  return out;
}

void save_model(const GbdtModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "slg-gbdt";
  j["version"] = 1;
  j["base_score"] = model.base_score;
  j["learning_rate"] = model.learning_rate;
  j["n_features"] = model.n_features;
  j["train_logloss"] = model.train_logloss;
  j["warnings"] = model.warnings;
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const auto& t : model.trees) {
    auto nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    trees.push_back(std::move(nodes));
  }
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write model", path.string());
  os << j.dump() << '\n';
  if (!os) throw IoError("failed writing model", path.string());
}

GbdtModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open model", path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model (") + e.what() + ")", path.string());
  }
  if (j.value("format", "") != "slg-gbdt" || j.value("version", 0) != 1)
    throw IoError("unsupported model file", path.string());
  GbdtModel m;
  m.base_score = j.at("base_score").get<double>();
  m.learning_rate = j.at("learning_rate").get<double>();
  m.n_features = j.at("n_features").get<std::size_t>();
  m.train_logloss = j.value("train_logloss", std::vector<double>{});
  m.warnings = j.value("warnings", std::vector<std::string>{});
  for (const auto& t : j.at("trees")) {
    Tree tree;
    for (const auto& n : t)
      tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                            n.at(4).get<double>()});
    m.trees.push_back(std::move(tree));
  }
  return m;
}

Matrix boost_concat(const Matrix& raw, const std::vector<TxnId>& ids, const EmbeddingTable& boost) {
  if (static_cast<std::size_t>(raw.rows()) != ids.size()) throw ContractViolation("boost_concat: ids not aligned");
  const Idx rd = raw.cols(), bd = static_cast<Idx>(boost.dim());
  Matrix out = Matrix::Zero(raw.rows(), rd + bd + 1);
  out.leftCols(rd) = raw;
  for (Idx i = 0; i < raw.rows(); ++i) {
    auto r = boost.row_of(ids[static_cast<std::size_t>(i)]);
    if (!r) continue;
    out.row(i).segment(rd, bd) = boost.vectors().row(static_cast<Idx>(*r));
    out(i, rd + bd) = 1.0;
  }
  return out;
}

}  // namespace slg::gbdt
