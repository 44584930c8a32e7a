#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "slg/types.hpp"

namespace slg {

/// Row-aligned table of per-transaction vectors (behavior embeddings, boost features).
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(std::vector<TxnId> ids, Matrix vectors);

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors_.cols()); }
  const std::vector<TxnId>& ids() const noexcept { return ids_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::optional<std::size_t> row_of(TxnId id) const;

  /// CSV with header `txn_id,<prefix>000..`.
  void write_csv(const std::filesystem::path& path, const std::string& prefix) const;
  static EmbeddingTable read_csv(const std::filesystem::path& path, const std::string& prefix);

  bool operator==(const EmbeddingTable& o) const { return ids_ == o.ids_ && vectors_ == o.vectors_; }

 private:
  std::vector<TxnId> ids_;
  Matrix vectors_;
  std::unordered_map<TxnId, std::size_t> index_;
};

}  // namespace slg
