#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slg/embedding_table.hpp"
#include "slg/graph.hpp"
#include "slg/rng.hpp"
#include "slg/types.hpp"

namespace slg::sage {

using graph::TxnGraph;

enum class NegStrategy { uniform, distance_weighted };
std::string_view to_string(NegStrategy s);
NegStrategy parse_neg_strategy(std::string_view s);

struct SageConfig {
  std::size_t depth = 2;
  std::vector<std::size_t> fanouts = {10, 5};  // fanouts[0] is the hop next to the target
  std::size_t in_dim = 100;
  std::size_t hidden_dim = 64;
  std::size_t out_dim = 64;
  std::size_t walk_length = 3;  // steps per walk
  std::size_t walks_per_node = 2;
  std::size_t window = 2;
  std::size_t q = 5;  // negatives per positive pair
  NegStrategy neg_strategy = NegStrategy::distance_weighted;
  double beta = 1.0;
  std::size_t neg_pool = 200;  // uniform candidates scored per draw; 0 scores every eligible node
  double lr = 0.01;
  std::size_t batch = 512;
  std::size_t epochs = 5;
  std::size_t max_pairs_per_epoch = 25000;  // 0 keeps every walk pair
  std::uint64_t seed = 7;

  void validate() const;
};

struct Layer {
  Matrix w;  // 2 prev_dim x next_dim
  Matrix b;  // 1 x next_dim
};

struct SageParams {
  std::vector<Layer> layers;
  SageParams zeros_like() const;
  bool all_finite() const;
  bool operator==(const SageParams& o) const;
};

SageParams init_params(const SageConfig& cfg);

/// fanout draws: without replacement when degree >= fanout, otherwise every
/// neighbor once plus uniform draws with replacement up to fanout. Empty for
/// isolated nodes. Positions refer to the combined adjacency.
std::vector<std::uint32_t> sample_neighbors(const TxnGraph& g, std::size_t v, std::size_t fanout, Rng& rng);

/// Elementwise mean; zero vector of `dim` for empty input.
Vector aggregate_mean(const std::vector<Vector>& vectors, std::size_t dim);

/// Frozen computation graph for one set of targets. nodes[depth] are the
/// targets, nodes[k-1] holds nodes[k] plus their sampled neighbors.
struct SamplePlan {
  std::size_t depth = 0;
  std::vector<std::vector<std::uint32_t>> nodes;                   // graph positions per level
  std::vector<std::vector<std::uint32_t>> self;                    // [k][i] row of nodes[k][i] in level k-1
  std::vector<std::vector<std::vector<std::uint32_t>>> children;   // [k][i] rows in level k-1
};

enum class SampleMode {
  train,      // sample_neighbors at every hop
  inference,  // full neighborhood whenever degree <= fanout
};

/// Neighbor draws are seeded by (seed, level, txn id) so they do not depend on
/// array positions or on which other targets share the plan.
SamplePlan make_plan(const TxnGraph& g, std::vector<std::uint32_t> targets, const std::vector<std::size_t>& fanouts,
                     std::uint64_t seed, SampleMode mode);

/// Unit-norm outputs for plan.nodes[depth]. `features` rows are graph positions.
Matrix forward(const SageParams& params, const Matrix& features, const SamplePlan& plan);

/// Unsupervised objective for one pair with clamped log-sigmoids. With fewer than q
/// drawn negatives the negative term is q times their mean.
double pair_loss(const Vector& zu, const Vector& zv, const std::vector<Vector>& negatives, std::size_t q);

struct PairBatch {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;  // graph positions
  std::vector<std::vector<std::uint32_t>> negatives;           // per pair
};

/// Mean pair loss over the batch with the plan's sampling held fixed.
/// Accumulates the parameter gradient when `grad` is given.
double batch_loss_and_grad(const SageParams& params, const Matrix& features, const SamplePlan& plan,
                           const PairBatch& batch, std::size_t q, SageParams* grad);

/// Targets covering every node of a pair batch (sorted, unique).
std::vector<std::uint32_t> batch_targets(const PairBatch& batch);

/// Random-walk co-occurrence pairs (u, v), u != v, both orders.
std::vector<std::pair<std::uint32_t, std::uint32_t>> positive_pairs(const TxnGraph& g, const SageConfig& cfg,
                                                                     Rng& rng);

struct NegativeDraw {
  std::vector<std::uint32_t> nodes;
  bool flagged = false;  // fewer than q eligible nodes, or all weights vanished
};

/// Behavior vectors used for distance weighting, aligned with graph positions.
/// Rows of zeros are treated as cosine 0 to everything.
struct BehaviorIndex {
  Matrix unit;  // L2-normalized rows
  static BehaviorIndex build(const TxnGraph& g, const EmbeddingTable& embeddings);
};

/// q draws from nodes that are neither u nor adjacent to u.
NegativeDraw negative_sample(std::size_t u, const TxnGraph& g, const BehaviorIndex* behavior, const SageConfig& cfg,
                             Rng& rng);

struct EpochLog {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double wall_ms = 0.0;
  std::size_t pairs = 0;
};

struct TrainResult {
  SageParams params;
  std::vector<EpochLog> epochs;
  std::size_t negative_fallbacks = 0;
  bool diverged = false;
  std::string diagnostic;
};

/// Throws ConsistencyError when no positive pair exists.
TrainResult train(const TxnGraph& g, const Matrix& features, const BehaviorIndex* behavior, const SageConfig& cfg);

/// Embeddings for every graph node, isolated ones included.
EmbeddingTable embed_nodes(const SageParams& params, const TxnGraph& g, const Matrix& features,
                           const SageConfig& cfg, std::uint64_t seed);

/// Column z-scores; constant columns become 0.
Matrix standardize_columns(const Matrix& x);

/// Versioned JSON; doubles round-trip exactly.
void save_params(const SageParams& params, const std::filesystem::path& path);
SageParams load_params(const std::filesystem::path& path);

inline constexpr const char* kBoostFile = "boost_features.csv";
inline constexpr const char* kParamsFile = "sage_params.json";
inline constexpr const char* kTrainingLogFile = "training_log.jsonl";

}  // namespace slg::sage
