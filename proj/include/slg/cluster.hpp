#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slg/types.hpp"

namespace slg::cluster {

struct ClusterConfig {
  std::size_t min_cluster_size = 5;
  std::size_t min_samples = 5;  // k for core distances
  std::optional<std::size_t> pca_dims = 20;
  std::size_t hub_size_threshold = 200;
  bool unit_rows = true;  // scale rows to unit length before PCA (zero rows stay zero)

  void validate(std::size_t input_dim) const;
};

struct PcaResult {
  Matrix projected;             // n x kept
  Matrix components;            // kept x d, unit rows
  Vector explained_variance;    // eigenvalues of the covariance, descending, kept entries
  Vector mean;
  std::size_t rank = 0;
  std::vector<std::string> warnings;
};

/// Projects mean-centered rows onto the leading principal components. Each
/// component is oriented so its largest-magnitude coordinate is positive (first
/// such coordinate on ties). Keeps min(target_dims, rank) components.
PcaResult pca_reduce(const Matrix& x, std::size_t target_dims);

/// Rows scaled to unit length (when configured) and PCA-reduced: the points
/// HDBSCAN sees.
Matrix prepare_points(const Matrix& x, const ClusterConfig& cfg, std::vector<std::string>* warnings = nullptr);

/// Euclidean distance accumulated over coordinates in ascending order.
double euclidean(const Matrix& x, std::size_t i, std::size_t j);

/// Distance from each point to its k-th nearest other point.
Vector core_distances(const Matrix& x, std::size_t k);

double mutual_reachability(std::size_t i, std::size_t j, const Vector& cores, const Matrix& x);

struct MstEdge {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  double weight = 0.0;
  bool operator==(const MstEdge&) const = default;
};

/// Strict total order on candidate edges: (weight, a, b).
bool mst_edge_less(const MstEdge& l, const MstEdge& r);

/// Exact minimum spanning tree of the complete mutual-reachability graph by
/// dense Prim. Ties are broken by the (weight, a, b) order, which makes the
/// tree unique. Edges are returned in the order they were added.
std::vector<MstEdge> build_mst(const Matrix& x, const Vector& cores);

inline constexpr int kNoise = -1;

struct ClusterLabeling {
  std::vector<int> labels;                 // per point, kNoise or cluster id
  std::map<int, std::size_t> cluster_sizes;
  std::map<int, double> stabilities;       // may be +inf for zero-distance clusters
};

/// Condensed single-linkage hierarchy plus excess-of-mass selection over
/// non-root clusters. When the hierarchy never splits into two clusters of at
/// least min_cluster_size the root is the single candidate; its members are the
/// points that stay until the final lambda. Cluster ids are assigned in order
/// of each cluster's smallest point index.
ClusterLabeling condense_and_extract(const std::vector<MstEdge>& mst, std::size_t n_points,
                                     std::size_t min_cluster_size);

/// core_distances -> build_mst -> condense_and_extract.
ClusterLabeling hdbscan(const Matrix& x, std::size_t min_cluster_size, std::size_t min_samples);

struct ClusterDecision {
  int cluster_id = 0;
  std::size_t size = 0;
  bool retained = false;
};

struct FilterReport {
  std::vector<TxnId> retained;                         // sorted
  std::map<int, std::vector<TxnId>> retained_clusters; // cluster id -> sorted members
  std::size_t dropped_noise = 0;
  std::size_t dropped_hub = 0;
  std::size_t hub_size_threshold = 0;
  std::vector<ClusterDecision> decisions;
};

/// Drops noise and clusters larger than the hub threshold.
FilterReport filter_nodes(const ClusterLabeling& labeling, const std::vector<TxnId>& ids,
                          std::size_t hub_size_threshold);

struct RiskyRule {
  std::size_t min_frauds = 2;
  double min_fraud_rate = 0.1;
};

struct RiskyMetrics {
  std::size_t n_risky = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  bool flagged = false;  // some ratio had a zero denominator
};

RiskyMetrics risky_cluster_metrics(const ClusterLabeling& labeling, const std::vector<bool>& is_fraud,
                                   const RiskyRule& rule);

/// clusters.csv: `txn_id,cluster_id`.
void write_clusters(const std::filesystem::path& path, const std::vector<TxnId>& ids, const ClusterLabeling& labeling);
/// Reads clusters.csv back (sizes recomputed, stabilities empty).
ClusterLabeling read_clusters(const std::filesystem::path& path, std::vector<TxnId>& ids);

}  // namespace slg::cluster
