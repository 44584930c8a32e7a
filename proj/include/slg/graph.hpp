#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "slg/types.hpp"

namespace slg::graph {

enum class EdgeKind : std::uint8_t { soft = 0, hard = 1 };
std::string_view to_string(EdgeKind k);
EdgeKind parse_edge_kind(std::string_view s);

/// Undirected edge stored once with src < dst.
struct Edge {
  TxnId src = 0;
  TxnId dst = 0;
  EdgeKind kind = EdgeKind::soft;
  double weight = 1.0;
  bool operator==(const Edge&) const = default;
};

/// Orders by (src, dst, kind).
bool edge_less(const Edge& a, const Edge& b);

/// Compressed adjacency over node positions.
struct Csr {
  std::vector<std::size_t> offsets;   // size node_count + 1, monotone
  std::vector<std::uint32_t> targets; // sorted within each row
};

/// Transaction graph. Nodes are kept sorted by txn id, so node positions and
/// neighbor order do not depend on the order inputs were supplied in.
class TxnGraph {
 public:
  TxnGraph() = default;

  /// Validates edges (no self loops), canonicalizes to src < dst, removes
  /// duplicate (src, dst, kind) triples and adds edge endpoints to the node set.
  static TxnGraph build(std::vector<TxnId> nodes, std::vector<Edge> edges);

  std::size_t node_count() const noexcept { return nodes_.size(); }
  std::size_t edge_count() const noexcept { return edges_.size(); }
  std::size_t edge_count(EdgeKind k) const noexcept;
  const std::vector<TxnId>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  TxnId id(std::size_t pos) const { return nodes_[pos]; }
  std::optional<std::size_t> position(TxnId id) const;

  /// Combined adjacency; a pair linked both softly and hard appears once.
  std::span<const std::uint32_t> neighbors(std::size_t pos) const;
  std::span<const std::uint32_t> neighbors(std::size_t pos, EdgeKind kind) const;
  std::size_t degree(std::size_t pos) const { return neighbors(pos).size(); }
  std::size_t degree(std::size_t pos, EdgeKind kind) const { return neighbors(pos, kind).size(); }
  bool adjacent(std::size_t a, std::size_t b) const;

  const Csr& csr() const noexcept { return combined_; }
  const Csr& csr(EdgeKind k) const noexcept { return k == EdgeKind::soft ? soft_ : hard_; }

  /// edges.csv: `src,dst,kind,weight`.
  void write_edges(const std::filesystem::path& path) const;
  static std::vector<Edge> read_edges(const std::filesystem::path& path);
  /// nodes.csv: `txn_id`.
  void write_nodes(const std::filesystem::path& path) const;
  static std::vector<TxnId> read_nodes(const std::filesystem::path& path);

 private:
  std::vector<TxnId> nodes_;
  std::unordered_map<TxnId, std::size_t> index_;
  std::vector<Edge> edges_;
  Csr combined_, soft_, hard_;
};

}  // namespace slg::graph
