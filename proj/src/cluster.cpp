#include "slg/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "slg/csv.hpp"
#include "slg/error.hpp"
#include "slg/parallel.hpp"

namespace slg::cluster {

void ClusterConfig::validate(std::size_t input_dim) const {
  if (min_cluster_size < 2) throw ConfigError("cluster.min_cluster_size must be >= 2");
  if (min_samples < 1) throw ConfigError("cluster.min_samples must be >= 1");
  if (pca_dims && *pca_dims >= input_dim) throw ConfigError("cluster.pca_dims must be < input dimension");
  if (pca_dims && *pca_dims == 0) throw ConfigError("cluster.pca_dims must be >= 1");
}

// ---------------------------------------------------------------------------
// PCA

PcaResult pca_reduce(const Matrix& x, std::size_t target_dims) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (target_dims == 0) throw ConfigError("pca target_dims must be >= 1");
  if (n < target_dims) throw ConfigError("pca needs at least target_dims rows");
  PcaResult r;
  r.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - r.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(std::max<std::size_t>(1, n - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca eigendecomposition failed");
  const Eigen::VectorXd evals = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd evecs = solver.eigenvectors();
  const double top = std::max(0.0, evals(static_cast<Eigen::Index>(d) - 1));
  const double tol = std::max(top, 1.0) * 1e-12 * static_cast<double>(d);
  std::size_t rank = 0;
  for (Eigen::Index i = 0; i < evals.size(); ++i)
    if (evals(i) > tol) ++rank;
  r.rank = rank;
  std::size_t keep = target_dims;
  if (target_dims > rank) {
    keep = std::max<std::size_t>(rank, 1);
    r.warnings.push_back("pca: target_dims " + std::to_string(target_dims) + " exceeds rank " +
                         std::to_string(rank) + "; keeping " + std::to_string(keep) + " components");
  }
  r.components.resize(static_cast<Eigen::Index>(keep), static_cast<Eigen::Index>(d));
  r.explained_variance.resize(static_cast<Eigen::Index>(keep));
  for (std::size_t c = 0; c < keep; ++c) {
    const Eigen::Index col = static_cast<Eigen::Index>(d - 1 - c);
    Eigen::VectorXd v = evecs.col(col);
    Eigen::Index arg = 0;
    for (Eigen::Index k = 1; k < v.size(); ++k)
      if (std::abs(v(k)) > std::abs(v(arg))) arg = k;
    if (v(arg) < 0) v = -v;
    r.components.row(static_cast<Eigen::Index>(c)) = v.transpose();
    r.explained_variance(static_cast<Eigen::Index>(c)) = std::max(0.0, evals(col));
  }
  r.projected = centered * r.components.transpose();
  return r;
}

Matrix prepare_points(const Matrix& x, const ClusterConfig& cfg, std::vector<std::string>* warnings) {
  Matrix y = x;
  if (cfg.unit_rows)
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      const double n = y.row(i).norm();
      if (n > 0.0) y.row(i) /= n;
    }
  if (!cfg.pca_dims) return y;
  auto pca = pca_reduce(y, *cfg.pca_dims);
  if (warnings) warnings->insert(warnings->end(), pca.warnings.begin(), pca.warnings.end());
  return std::move(pca.projected);
}

// ---------------------------------------------------------------------------
// Distances

double euclidean(const Matrix& x, std::size_t i, std::size_t j) {
  double acc = 0.0;
  const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    const double diff = x(ii, k) - x(jj, k);
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

namespace {

/// Coordinates stored dimension-major so one query against all points
/// vectorizes across points while each pair still sums in coordinate order.
struct Columns {
  std::size_t n = 0, d = 0;
  std::vector<double> data;  // data[k * n + j]

  explicit Columns(const Matrix& x)
      : n(static_cast<std::size_t>(x.rows())), d(static_cast<std::size_t>(x.cols())), data(n * d) {
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < d; ++k) data[k * n + j] = x(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
  }

  /// out[j] = distance(i, j) for all j.
  void row(std::size_t i, double* out) const {
    std::fill(out, out + n, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
      const double* col = data.data() + k * n;
      const double xi = col[i];
      for (std::size_t j = 0; j < n; ++j) {
        const double diff = xi - col[j];
        out[j] += diff * diff;
      }
    }
    for (std::size_t j = 0; j < n; ++j) out[j] = std::sqrt(out[j]);
  }
};

}  // namespace

Vector core_distances(const Matrix& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (k < 1) throw ConfigError("core distance k must be >= 1");
  if (n <= k) throw ConfigError("core distances need more than k=" + std::to_string(k) + " points, got " + std::to_string(n));
  const Columns cols(x);
  Vector cores(static_cast<Eigen::Index>(n));
  const std::size_t threads = thread_count();
  parallel_blocks(n, threads, [&](std::size_t b, std::size_t e, std::size_t) {
    std::vector<double> row(n), others(n - 1);
    for (std::size_t i = b; i < e; ++i) {
      cols.row(i, row.data());
      std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(i), others.begin());
      std::copy(row.begin() + static_cast<std::ptrdiff_t>(i) + 1, row.end(), others.begin() + static_cast<std::ptrdiff_t>(i));
      std::nth_element(others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k - 1), others.end());
      cores(static_cast<Eigen::Index>(i)) = others[k - 1];
    }
  });
  return cores;
}

double mutual_reachability(std::size_t i, std::size_t j, const Vector& cores, const Matrix& x) {
  const double d = i == j ? 0.0 : euclidean(x, i, j);
  return std::max({cores(static_cast<Eigen::Index>(i)), cores(static_cast<Eigen::Index>(j)), d});
}

bool mst_edge_less(const MstEdge& l, const MstEdge& r) {
  if (l.weight != r.weight) return l.weight < r.weight;
  if (l.a != r.a) return l.a < r.a;
  return l.b < r.b;
}

std::vector<MstEdge> build_mst(const Matrix& x, const Vector& cores) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 2) throw ContractViolation("build_mst needs at least 2 points");
  const Columns cols(x);
  std::vector<MstEdge> best(n);
  std::vector<bool> has_best(n, false), in_tree(n, false);
  std::vector<double> row(n);
  std::vector<MstEdge> tree;
  tree.reserve(n - 1);
  std::size_t current = 0;
  in_tree[0] = true;
  for (std::size_t step = 0; step + 1 < n; ++step) {
    const double core_c = cores(static_cast<Eigen::Index>(current));
    cols.row(current, row.data());
    std::size_t next = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (in_tree[j]) continue;
      const double w = std::max({core_c, cores(static_cast<Eigen::Index>(j)), row[j]});
      const MstEdge cand{std::min(current, j), std::max(current, j), w};
      if (!has_best[j] || mst_edge_less(cand, best[j])) {
        best[j] = cand;
        has_best[j] = true;
      }
      if (next == n || mst_edge_less(best[j], best[next])) next = j;
    }
    tree.push_back(best[next]);
    in_tree[next] = true;
    current = next;
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Condensed tree and excess-of-mass selection

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
};

struct Merge {
  std::size_t left, right;
  double distance;
  std::size_t size;
};

struct CondensedRow {
  std::size_t parent;  // cluster index
  std::size_t child;   // point index (< n) or n + cluster index
  double lambda;
  std::size_t size;
};

double lambda_of(double distance) {
  return distance > 0.0 ? 1.0 / distance : std::numeric_limits<double>::infinity();
}

/// (lambda - birth) * size, with inf - inf read as 0.
double excess(double lambda, double birth, std::size_t size) {
  if (std::isinf(lambda) && std::isinf(birth)) return 0.0;
  return (lambda - birth) * static_cast<double>(size);
}

}  // namespace

ClusterLabeling condense_and_extract(const std::vector<MstEdge>& mst, std::size_t n, std::size_t min_cluster_size) {
  ClusterLabeling out;
  out.labels.assign(n, kNoise);
  if (n == 0) return out;
  if (mst.size() + 1 != n) throw ContractViolation("MST must have n-1 edges");
  if (n == 1) return out;

  // Single-linkage dendrogram: node ids < n are points, n + m is merge m.
  std::vector<MstEdge> sorted = mst;
  std::sort(sorted.begin(), sorted.end(), mst_edge_less);
  UnionFind uf(2 * n - 1);
  std::vector<std::size_t> node_size(2 * n - 1, 1);
  std::vector<Merge> merges;
  merges.reserve(n - 1);
  for (const auto& e : sorted) {
    const std::size_t ra = uf.find(e.a), rb = uf.find(e.b);
    if (ra == rb) throw ContractViolation("MST edges contain a cycle");
    const std::size_t id = n + merges.size();
    merges.push_back({ra, rb, e.weight, node_size[ra] + node_size[rb]});
    node_size[id] = node_size[ra] + node_size[rb];
    uf.parent[ra] = id;
    uf.parent[rb] = id;
  }

  auto leaves_of = [&](std::size_t node, std::vector<std::size_t>& acc) {
    std::vector<std::size_t> stack{node};
    while (!stack.empty()) {
      const std::size_t v = stack.back();
      stack.pop_back();
      if (v < n) {
        acc.push_back(v);
      } else {
        stack.push_back(merges[v - n].right);
        stack.push_back(merges[v - n].left);
      }
    }
  };

  // Top-down condensation in breadth-first order.
  const std::size_t root = 2 * n - 2;
  std::vector<CondensedRow> rows;
  std::vector<double> birth{0.0};  // per cluster
  std::vector<std::size_t> cluster_parent{0};
  std::vector<std::size_t> relabel(2 * n - 1, 0);
  relabel[root] = 0;
  std::vector<std::size_t> queue{root};
  std::vector<std::size_t> leaves;
  for (std::size_t qi = 0; qi < queue.size(); ++qi) {
    const std::size_t node = queue[qi];
    if (node < n) continue;
    const Merge& m = merges[node - n];
    const double lam = lambda_of(m.distance);
    const std::size_t cur = relabel[node];
    const std::size_t lsize = node_size[m.left], rsize = node_size[m.right];
    const bool lbig = lsize >= min_cluster_size, rbig = rsize >= min_cluster_size;
    auto fall_out = [&](std::size_t child) {
      leaves.clear();
      leaves_of(child, leaves);
      for (std::size_t p : leaves) rows.push_back({cur, p, lam, 1});
    };
    auto new_cluster = [&](std::size_t child, std::size_t size) {
      const std::size_t id = birth.size();
      birth.push_back(lam);
      cluster_parent.push_back(cur);
      relabel[child] = id;
      rows.push_back({cur, n + id, lam, size});
      queue.push_back(child);
    };
    if (lbig && rbig) {
      new_cluster(m.left, lsize);
      new_cluster(m.right, rsize);
    } else if (!lbig && !rbig) {
      fall_out(m.left);
      fall_out(m.right);
    } else if (!lbig) {
      fall_out(m.left);
      relabel[m.right] = cur;
      queue.push_back(m.right);
    } else {
      fall_out(m.right);
      relabel[m.left] = cur;
      queue.push_back(m.left);
    }
  }

  const std::size_t n_clusters = birth.size();
  std::vector<double> stability(n_clusters, 0.0);
  std::vector<std::vector<std::size_t>> children(n_clusters);
  std::vector<std::size_t> point_parent(n, 0);
  std::vector<double> point_lambda(n, 0.0);
  for (const auto& r : rows) {
    stability[r.parent] += excess(r.lambda, birth[r.parent], r.size);
    if (r.child >= n) {
      children[r.parent].push_back(r.child - n);
    } else {
      point_parent[r.child] = r.parent;
      point_lambda[r.child] = r.lambda;
    }
  }

  std::vector<bool> selected(n_clusters, false);
  if (n_clusters > 1) {
    // Children always carry larger ids than their parents.
    std::vector<double> subtree(stability);
    for (std::size_t c = n_clusters - 1; c >= 1; --c) {
      if (children[c].empty()) {
        selected[c] = true;
        continue;
      }
      double child_sum = 0.0;
      for (std::size_t ch : children[c]) child_sum += subtree[ch];
      if (child_sum > stability[c]) {
        selected[c] = false;
        subtree[c] = child_sum;
      } else {
        selected[c] = true;
        std::vector<std::size_t> stack(children[c]);
        while (!stack.empty()) {
          const std::size_t v = stack.back();
          stack.pop_back();
          selected[v] = false;
          for (std::size_t ch : children[v]) stack.push_back(ch);
        }
      }
    }
  } else {
    selected[0] = true;
  }

  // Point membership: nearest selected ancestor of the point's condensed parent.
  std::vector<long> cluster_of_point(n, -1);
  if (n_clusters == 1) {
    double lam_max = -std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < n; ++p) lam_max = std::max(lam_max, point_lambda[p]);
    for (std::size_t p = 0; p < n; ++p)
      if (point_lambda[p] >= lam_max) cluster_of_point[p] = 0;
  } else {
    for (std::size_t p = 0; p < n; ++p) {
      std::size_t c = point_parent[p];
      while (c != 0 && !selected[c]) c = cluster_parent[c];
      if (c != 0) cluster_of_point[p] = static_cast<long>(c);
    }
  }

  // Canonical ids: order selected clusters by their smallest member.
  std::unordered_map<long, int> id_of;
  int next_id = 0;
  for (std::size_t p = 0; p < n; ++p) {
    const long c = cluster_of_point[p];
    if (c < 0) continue;
    auto [it, inserted] = id_of.emplace(c, next_id);
    if (inserted) {
      out.stabilities[next_id] = stability[static_cast<std::size_t>(c)];
      ++next_id;
    }
    out.labels[p] = it->second;
    ++out.cluster_sizes[it->second];
  }
  return out;
}

ClusterLabeling hdbscan(const Matrix& x, std::size_t min_cluster_size, std::size_t min_samples) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n < 2) {
    ClusterLabeling l;
    l.labels.assign(n, kNoise);
    return l;
  }
  const Vector cores = core_distances(x, std::min(min_samples, n - 1));
  return condense_and_extract(build_mst(x, cores), n, min_cluster_size);
}

// ---------------------------------------------------------------------------
// Filtering and metrics

FilterReport filter_nodes(const ClusterLabeling& labeling, const std::vector<TxnId>& ids,
                          std::size_t hub_size_threshold) {
  if (ids.size() != labeling.labels.size()) throw ConsistencyError("filter_nodes: ids and labels differ in length");
  FilterReport r;
  r.hub_size_threshold = hub_size_threshold;
  std::map<int, std::size_t> sizes;
  for (int l : labeling.labels)
    if (l != kNoise) ++sizes[l];
  for (const auto& [id, size] : sizes) r.decisions.push_back({id, size, size <= hub_size_threshold});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int l = labeling.labels[i];
    if (l == kNoise) {
      ++r.dropped_noise;
    } else if (sizes[l] > hub_size_threshold) {
      ++r.dropped_hub;
    } else {
      r.retained.push_back(ids[i]);
      r.retained_clusters[l].push_back(ids[i]);
    }
  }
  std::sort(r.retained.begin(), r.retained.end());
  for (auto& [id, members] : r.retained_clusters) std::sort(members.begin(), members.end());
  return r;
}

RiskyMetrics risky_cluster_metrics(const ClusterLabeling& labeling, const std::vector<bool>& is_fraud,
                                   const RiskyRule& rule) {
  if (is_fraud.size() != labeling.labels.size()) throw ConsistencyError("risky metrics: labels not aligned");
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // members, frauds
  std::size_t total_frauds = 0;
  for (std::size_t i = 0; i < is_fraud.size(); ++i) {
    if (is_fraud[i]) ++total_frauds;
    const int l = labeling.labels[i];
    if (l == kNoise) continue;
    auto& c = counts[l];
    ++c.first;
    if (is_fraud[i]) ++c.second;
  }
  RiskyMetrics m;
  std::size_t members = 0, frauds = 0;
  for (const auto& [id, c] : counts) {
    const double rate = static_cast<double>(c.second) / static_cast<double>(c.first);
    if (c.second >= rule.min_frauds && rate >= rule.min_fraud_rate) {
      ++m.n_risky;
      members += c.first;
      frauds += c.second;
    }
  }
  if (members == 0 || total_frauds == 0) {
    m.flagged = true;
  }
  m.precision = members ? static_cast<double>(frauds) / static_cast<double>(members) : 0.0;
  m.recall = total_frauds ? static_cast<double>(frauds) / static_cast<double>(total_frauds) : 0.0;
  m.f_score = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

void write_clusters(const std::filesystem::path& path, const std::vector<TxnId>& ids, const ClusterLabeling& labeling) {
  csv::Writer w(path, {"txn_id", "cluster_id"});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    w.field(ids[i]).field(labeling.labels[i]);
    w.end_row();
  }
  w.close();
}

ClusterLabeling read_clusters(const std::filesystem::path& path, std::vector<TxnId>& ids) {
  csv::Reader r(path, {"txn_id", "cluster_id"});
  ClusterLabeling l;
  ids.clear();
  std::vector<std::string_view> f;
  while (r.next(f)) {
    ids.push_back(csv::parse_int(f[0]));
    const int c = static_cast<int>(csv::parse_int(f[1]));
    l.labels.push_back(c);
    if (c != kNoise) ++l.cluster_sizes[c];
  }
  return l;
}

}  // namespace slg::cluster
