#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slg/embedding_table.hpp"
#include "slg/types.hpp"

namespace slg::gbdt {

struct GbdtConfig {
  std::size_t n_trees = 200;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  std::size_t min_leaf = 20;  // training rows per child
  double subsample = 1.0;
  double lambda = 1.0;
  std::uint64_t seed = 7;
  void validate() const;
};

/// Internal nodes send x[feature] < threshold left.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double eval(const double* row) const;
  std::size_t depth() const;
  bool operator==(const Tree&) const = default;
};

struct GbdtModel {
  double base_score = 0.0;  // log-odds
  double learning_rate = 0.1;
  std::size_t n_features = 0;
  std::vector<Tree> trees;
  std::vector<double> train_logloss;  // after each round; entry 0 is the base model
  std::vector<std::string> warnings;

  /// base + lr * sum of tree outputs.
  double margin(const double* row) const;
  bool operator==(const GbdtModel& o) const {
    return base_score == o.base_score && learning_rate == o.learning_rate && n_features == o.n_features &&
           trees == o.trees;
  }
};

/// Logistic-loss boosting with exact greedy, level-wise splits. Ties between
/// candidate splits go to the smaller feature index, then the smaller value.
GbdtModel train(const Matrix& x, const std::vector<int>& y, const GbdtConfig& cfg);

/// Sigmoid of the margin for each row.
std::vector<double> predict(const GbdtModel& model, const Matrix& x);

double log_loss(const std::vector<double>& p, const std::vector<int>& y);

void save_model(const GbdtModel& model, const std::filesystem::path& path);
GbdtModel load_model(const std::filesystem::path& path);

/// raw | boost | indicator. Rows whose id has no boost vector get zeros and a
/// 0 indicator. Width is raw.cols() + boost.dim() + 1.
Matrix boost_concat(const Matrix& raw, const std::vector<TxnId>& ids, const EmbeddingTable& boost);

inline constexpr const char* kModelFile = "gbdt_model.json";

}  // namespace slg::gbdt
