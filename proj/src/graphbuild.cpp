#include "slg/graphbuild.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "slg/error.hpp"
#include "slg/parallel.hpp"

namespace slg::graph {

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ContractViolation("cosine_sim: dimension mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += u[k] * v[k];
    nu += u[k] * u[k];
    nv += v[k] * v[k];
  }
  if (nu == 0.0 || nv == 0.0) throw UndefinedSimilarity("cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

void SoftLinkConfig::validate() const {
  if (!(tau > -1.0 && tau <= 1.0)) throw ConfigError("softlink.tau must lie in (-1, 1]");
  if (max_degree_cap < 1) throw ConfigError("softlink.max_degree_cap must be >= 1");
}

void HardLinkConfig::validate() const {
  if (entity_types.empty()) throw ConfigError("hardlink.entity_types must not be empty");
  if (entity_hub_cap < 2) throw ConfigError("hardlink.entity_hub_cap must be >= 2");
}

namespace {

struct Candidate {
  double sim;
  std::uint32_t row;  // table row of the neighbor
  TxnId id;
};

// Higher similarity first, then the smaller neighbor id.
bool better(const Candidate& a, const Candidate& b) { return a.sim != b.sim ? a.sim > b.sim : a.id < b.id; }

/// Keeps the `cap` best candidates; heap front is the worst kept.
class TopK {
 public:
  void offer(const Candidate& c, std::size_t cap) {
    if (heap_.size() < cap) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end(), better);
    } else if (better(c, heap_.front())) {
      std::pop_heap(heap_.begin(), heap_.end(), better);
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end(), better);
    }
  }
  void finalize() {
    std::sort(heap_.begin(), heap_.end(), [](const Candidate& a, const Candidate& b) { return a.id < b.id; });
  }
  bool contains(TxnId id) const {
    auto it = std::lower_bound(heap_.begin(), heap_.end(), id, [](const Candidate& c, TxnId v) { return c.id < v; });
    return it != heap_.end() && it->id == id;
  }
  const std::vector<Candidate>& items() const { return heap_; }

 private:
  std::vector<Candidate> heap_;
};

class SoftLinker {
 public:
  SoftLinker(const EmbeddingTable& table, const SoftLinkConfig& cfg) : table_(table), cfg_(cfg) {
    cfg.validate();
    const auto n = table.size();
    const auto d = table.dim();
    normalized_.resize(n * d);
    valid_.assign(n, false);
    const Matrix& m = table.vectors();
    for (std::size_t i = 0; i < n; ++i) {
      double norm2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double x = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        norm2 += x * x;
      }
      if (norm2 == 0.0) continue;
      valid_[i] = true;
      const double norm = std::sqrt(norm2);
      for (std::size_t k = 0; k < d; ++k)
        normalized_[i * d + k] = m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) / norm;
    }
    top_.resize(n);
  }

  /// Enumerates all pairs among `rows`.
  void add_group(std::vector<std::uint32_t> rows) {
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [&](std::uint32_t r) {
                                if (!valid_[r]) {
                                  ++result_.zero_vector_nodes;
                                  return true;
                                }
                                return false;
                              }),
               rows.end());
    const std::size_t m = rows.size();
    if (m < 2) return;
    const std::size_t d = table_.dim();
    // Dimension-major block: one query against the rest vectorizes across
    // neighbors while each pair still accumulates in coordinate order.
    std::vector<double> block(d * m);
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t k = 0; k < d; ++k) block[k * m + b] = normalized_[rows[b] * d + k];
    std::vector<double> acc(m);
    const double threshold = cfg_.tau - kSimTolerance;
    const auto& ids = table_.ids();
    for (std::size_t a = 0; a + 1 < m; ++a) {
      std::fill(acc.begin() + static_cast<std::ptrdiff_t>(a) + 1, acc.end(), 0.0);
      for (std::size_t k = 0; k < d; ++k) {
        const double q = block[k * m + a];
        const double* col = block.data() + k * m;
        for (std::size_t b = a + 1; b < m; ++b) acc[b] += q * col[b];
      }
      result_.pair_evaluations += m - a - 1;
      for (std::size_t b = a + 1; b < m; ++b) {
        if (acc[b] < threshold) continue;
        ++result_.candidate_edges;
        const double sim = std::clamp(acc[b], -1.0, 1.0);
        const std::uint32_t ra = rows[a], rb = rows[b];
        top_[ra].offer({sim, rb, ids[rb]}, cfg_.max_degree_cap);
        top_[rb].offer({sim, ra, ids[ra]}, cfg_.max_degree_cap);
      }
    }
  }

  SoftLinkResult finish() {
    for (auto& t : top_) t.finalize();
    const auto& ids = table_.ids();
    for (std::size_t i = 0; i < top_.size(); ++i) {
      for (const auto& c : top_[i].items()) {
        if (ids[i] >= c.id) continue;
        if (top_[c.row].contains(ids[i])) result_.edges.push_back({ids[i], c.id, EdgeKind::soft, c.sim});
      }
    }
    std::sort(result_.edges.begin(), result_.edges.end(), edge_less);
    return std::move(result_);
  }

  SoftLinkResult& result() { return result_; }

 private:
  const EmbeddingTable& table_;
  SoftLinkConfig cfg_;
  std::vector<double> normalized_;  // row-major n x d
  std::vector<bool> valid_;
  std::vector<TopK> top_;
  SoftLinkResult result_;
};

}  // namespace

SoftLinkResult soft_link_edges(const EmbeddingTable& embeddings, const cluster::FilterReport& filter,
                               const SoftLinkConfig& cfg) {
  SoftLinker linker(embeddings, cfg);
  auto rows_of = [&](const std::vector<TxnId>& ids) {
    std::vector<std::uint32_t> rows;
    rows.reserve(ids.size());
    for (TxnId id : ids) {
      auto r = embeddings.row_of(id);
      if (!r) throw ConsistencyError("soft links: no embedding for retained txn " + std::to_string(id));
      rows.push_back(static_cast<std::uint32_t>(*r));
    }
    return rows;
  };
  if (filter.retained.empty()) {
    linker.result().warnings.push_back("no soft links: the retained node set is empty");
    return linker.finish();
  }
  if (cfg.within_cluster_only) {
    for (const auto& [id, members] : filter.retained_clusters) linker.add_group(rows_of(members));
  } else {
    linker.add_group(rows_of(filter.retained));
  }
  return linker.finish();
}

SoftLinkResult all_pairs_soft_link_edges(const EmbeddingTable& embeddings, const SoftLinkConfig& cfg) {
  SoftLinker linker(embeddings, cfg);
  std::vector<std::uint32_t> rows(embeddings.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<std::uint32_t>(i);
  linker.add_group(std::move(rows));
  return linker.finish();
}

HardLinkResult hard_link_edges(const synth::Dataset& dataset, const HardLinkConfig& cfg) {
  cfg.validate();
  HardLinkResult r;
  std::vector<std::pair<TxnId, TxnId>> pairs;
  for (auto type : cfg.entity_types) {
    std::unordered_map<std::int64_t, std::vector<TxnId>> groups;
    for (const auto& t : dataset.transactions) groups[t.entity(type)].push_back(t.txn_id);
    std::vector<std::int64_t> values;
    values.reserve(groups.size());
    for (const auto& [v, members] : groups) values.push_back(v);
    std::sort(values.begin(), values.end());
    for (auto v : values) {
      auto& members = groups[v];
      if (members.size() < 2) continue;
      if (members.size() > cfg.entity_hub_cap) {
        ++r.skipped_hub_values;
        ++r.skipped_by_type[type];
        continue;
      }
      std::sort(members.begin(), members.end());
      for (std::size_t a = 0; a < members.size(); ++a)
        for (std::size_t b = a + 1; b < members.size(); ++b) pairs.emplace_back(members[a], members[b]);
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  r.edges.reserve(pairs.size());
  for (const auto& [a, b] : pairs) r.edges.push_back({a, b, EdgeKind::hard, 1.0});
  return r;
}

TxnGraph merge(std::vector<TxnId> nodes, const std::vector<Edge>& soft, const std::vector<Edge>& hard) {
  std::vector<Edge> all;
  all.reserve(soft.size() + hard.size());
  all.insert(all.end(), soft.begin(), soft.end());
  all.insert(all.end(), hard.begin(), hard.end());
  return TxnGraph::build(std::move(nodes), std::move(all));
}

GraphStats graph_stats(const TxnGraph& g) {
  GraphStats s;
  s.nodes = g.node_count();
  s.soft_edges = g.edge_count(EdgeKind::soft);
  s.hard_edges = g.edge_count(EdgeKind::hard);
  std::size_t total = 0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const std::size_t d = g.degree(i);
    total += d;
    if (d == 0) ++s.isolated;
    s.max_degree = std::max(s.max_degree, d);
    ++s.degree_histogram[d];
  }
  s.mean_degree = s.nodes ? static_cast<double>(total) / static_cast<double>(s.nodes) : 0.0;
  return s;
}

}  // namespace slg::graph
