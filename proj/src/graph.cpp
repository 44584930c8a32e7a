#include "slg/graph.hpp"

#include <algorithm>

#include "slg/csv.hpp"
#include "slg/error.hpp"

namespace slg::graph {

std::string_view to_string(EdgeKind k) { return k == EdgeKind::soft ? "soft" : "hard"; }

EdgeKind parse_edge_kind(std::string_view s) {
  if (s == "soft") return EdgeKind::soft;
  if (s == "hard") return EdgeKind::hard;
  throw ConsistencyError("unknown edge kind '" + std::string(s) + "'");
}

bool edge_less(const Edge& a, const Edge& b) {
  if (a.src != b.src) return a.src < b.src;
  if (a.dst != b.dst) return a.dst < b.dst;
  return a.kind < b.kind;
}

namespace {

Csr build_csr(std::size_t n, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
  Csr c;
  c.offsets.assign(n + 1, 0);
  for (const auto& [a, b] : pairs) {
    ++c.offsets[a + 1];
    ++c.offsets[b + 1];
  }
  for (std::size_t i = 0; i < n; ++i) c.offsets[i + 1] += c.offsets[i];
  c.targets.resize(c.offsets[n]);
  std::vector<std::size_t> fill(c.offsets.begin(), c.offsets.end() - 1);
  for (const auto& [a, b] : pairs) {
    c.targets[fill[a]++] = b;
    c.targets[fill[b]++] = a;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto first = c.targets.begin() + static_cast<std::ptrdiff_t>(c.offsets[i]);
    auto last = c.targets.begin() + static_cast<std::ptrdiff_t>(c.offsets[i + 1]);
    std::sort(first, last);
  }
  return c;
}

std::span<const std::uint32_t> row(const Csr& c, std::size_t pos) {
  return {c.targets.data() + c.offsets[pos], c.offsets[pos + 1] - c.offsets[pos]};
}

}  // namespace

TxnGraph TxnGraph::build(std::vector<TxnId> nodes, std::vector<Edge> edges) {
  TxnGraph g;
  for (auto& e : edges) {
    if (e.src == e.dst) throw ConsistencyError("self loop on node " + std::to_string(e.src));
    if (e.src > e.dst) std::swap(e.src, e.dst);
    nodes.push_back(e.src);
    nodes.push_back(e.dst);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  std::sort(edges.begin(), edges.end(), edge_less);
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const Edge& a, const Edge& b) { return a.src == b.src && a.dst == b.dst && a.kind == b.kind; }),
              edges.end());
  g.nodes_ = std::move(nodes);
  g.index_.reserve(g.nodes_.size());
  for (std::size_t i = 0; i < g.nodes_.size(); ++i) g.index_.emplace(g.nodes_[i], i);
  g.edges_ = std::move(edges);

  std::vector<std::pair<std::uint32_t, std::uint32_t>> soft, hard, all;
  for (const auto& e : g.edges_) {
    const auto a = static_cast<std::uint32_t>(g.index_.at(e.src));
    const auto b = static_cast<std::uint32_t>(g.index_.at(e.dst));
    (e.kind == EdgeKind::soft ? soft : hard).emplace_back(a, b);
    if (all.empty() || all.back() != std::make_pair(a, b)) all.emplace_back(a, b);
  }
  const std::size_t n = g.nodes_.size();
  g.soft_ = build_csr(n, soft);
  g.hard_ = build_csr(n, hard);
  g.combined_ = build_csr(n, all);
  return g;
}

std::size_t TxnGraph::edge_count(EdgeKind k) const noexcept {
  return (k == EdgeKind::soft ? soft_ : hard_).targets.size() / 2;
}

std::optional<std::size_t> TxnGraph::position(TxnId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::uint32_t> TxnGraph::neighbors(std::size_t pos) const { return row(combined_, pos); }
std::span<const std::uint32_t> TxnGraph::neighbors(std::size_t pos, EdgeKind kind) const {
  return row(kind == EdgeKind::soft ? soft_ : hard_, pos);
}

bool TxnGraph::adjacent(std::size_t a, std::size_t b) const {
  auto nb = neighbors(a);
  return std::binary_search(nb.begin(), nb.end(), static_cast<std::uint32_t>(b));
}

void TxnGraph::write_edges(const std::filesystem::path& path) const {
  csv::Writer w(path, {"src", "dst", "kind", "weight"});
  for (const auto& e : edges_) {
    w.field(e.src).field(e.dst).field(to_string(e.kind)).field(e.weight);
    w.end_row();
  }
  w.close();
}

std::vector<Edge> TxnGraph::read_edges(const std::filesystem::path& path) {
  csv::Reader r(path, {"src", "dst", "kind", "weight"});
  std::vector<Edge> edges;
  std::vector<std::string_view> f;
  while (r.next(f))
    edges.push_back({csv::parse_int(f[0]), csv::parse_int(f[1]), parse_edge_kind(f[2]), csv::parse_double(f[3])});
  return edges;
}

void TxnGraph::write_nodes(const std::filesystem::path& path) const {
  csv::Writer w(path, {"txn_id"});
  for (TxnId id : nodes_) {
    w.field(id);
    w.end_row();
  }
  w.close();
}

std::vector<TxnId> TxnGraph::read_nodes(const std::filesystem::path& path) {
  csv::Reader r(path, {"txn_id"});
  std::vector<TxnId> ids;
  std::vector<std::string_view> f;
  while (r.next(f)) ids.push_back(csv::parse_int(f[0]));
  return ids;
}

}  // namespace slg::graph
