#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "slg/cluster.hpp"
#include "slg/embedding_table.hpp"
#include "slg/graph.hpp"
#include "slg/synthgen.hpp"

namespace slg::graph {

/// Thrown by cosine_sim for a zero vector.
class UndefinedSimilarity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double cosine_sim(std::span<const double> u, std::span<const double> v);

/// Similarities within this distance of the threshold count as reaching it, so
/// exactly collinear vectors pass tau = 1 despite rounding in the normalization.
inline constexpr double kSimTolerance = 1e-12;

struct SoftLinkConfig {
  double tau = 0.90;
  bool within_cluster_only = true;
  std::size_t max_degree_cap = 50;
  void validate() const;
};

/// Named soft-link thresholds. Strict is the higher (sparser) tau.
struct ThresholdProfiles {
  double strict = 0.90;
  double loose = 0.80;
};

struct SoftLinkResult {
  std::vector<Edge> edges;  // canonical sorted
  std::size_t pair_evaluations = 0;
  std::size_t candidate_edges = 0;  // pairs at or above tau, before the degree cap
  std::size_t zero_vector_nodes = 0;
  std::vector<std::string> warnings;
};

/// Soft edges among retained nodes. Pairs are enumerated inside each retained
/// cluster (or across all retained nodes when within_cluster_only is false).
/// The degree cap keeps an edge only if it ranks in the top max_degree_cap of
/// both endpoints by (similarity desc, neighbor id asc).
SoftLinkResult soft_link_edges(const EmbeddingTable& embeddings, const cluster::FilterReport& filter,
                               const SoftLinkConfig& cfg);

/// Same rule over every pair of rows in the table; the unfiltered reference.
SoftLinkResult all_pairs_soft_link_edges(const EmbeddingTable& embeddings, const SoftLinkConfig& cfg);

struct HardLinkConfig {
  std::vector<synth::EntityType> entity_types = {synth::EntityType::device, synth::EntityType::card_token,
                                                 synth::EntityType::ship_addr, synth::EntityType::ip};
  std::size_t entity_hub_cap = 50;
  void validate() const;
};

struct HardLinkResult {
  std::vector<Edge> edges;
  std::size_t skipped_hub_values = 0;
  std::map<synth::EntityType, std::size_t> skipped_by_type;
};

/// Cliques over transactions sharing an entity value, skipping values shared
/// by more than entity_hub_cap transactions.
HardLinkResult hard_link_edges(const synth::Dataset& dataset, const HardLinkConfig& cfg);

/// Union of typed edges over `nodes` plus all edge endpoints.
TxnGraph merge(std::vector<TxnId> nodes, const std::vector<Edge>& soft, const std::vector<Edge>& hard);

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t soft_edges = 0;
  std::size_t hard_edges = 0;
  std::size_t isolated = 0;
  double mean_degree = 0.0;
  std::size_t max_degree = 0;
  std::map<std::size_t, std::size_t> degree_histogram;
};

GraphStats graph_stats(const TxnGraph& g);

}  // namespace slg::graph
