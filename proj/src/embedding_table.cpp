#include "slg/embedding_table.hpp"

#include "slg/csv.hpp"
#include "slg/error.hpp"

namespace slg {

EmbeddingTable::EmbeddingTable(std::vector<TxnId> ids, Matrix vectors)
    : ids_(std::move(ids)), vectors_(std::move(vectors)) {
  if (static_cast<Eigen::Index>(ids_.size()) != vectors_.rows())
    throw ConsistencyError("embedding table: id count does not match row count");
  index_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i)
    if (!index_.emplace(ids_[i], i).second) throw ConsistencyError("embedding table: duplicate txn id " + std::to_string(ids_[i]));
}

std::optional<std::size_t> EmbeddingTable::row_of(TxnId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void EmbeddingTable::write_csv(const std::filesystem::path& path, const std::string& prefix) const {
  auto header = csv::numbered_columns(prefix, dim());
  header.insert(header.begin(), "txn_id");
  csv::Writer w(path, header);
  for (std::size_t i = 0; i < size(); ++i) {
    w.field(ids_[i]);
    for (Eigen::Index k = 0; k < vectors_.cols(); ++k) w.field(vectors_(static_cast<Eigen::Index>(i), k));
    w.end_row();
  }
  w.close();
}

EmbeddingTable EmbeddingTable::read_csv(const std::filesystem::path& path, const std::string& prefix) {
  csv::Reader r(path);
  const auto& header = r.header();
  if (header.empty() || header[0] != "txn_id") throw IoError("embedding file must start with txn_id", path.string());
  const std::size_t dim = header.size() - 1;
  if (csv::numbered_columns(prefix, dim) != std::vector<std::string>(header.begin() + 1, header.end()))
    throw IoError("unexpected embedding columns (want " + prefix + "000..)", path.string());
  std::vector<TxnId> ids;
  std::vector<double> values;
  std::vector<std::string_view> f;
  while (r.next(f)) {
    ids.push_back(csv::parse_int(f[0]));
    for (std::size_t k = 0; k < dim; ++k) values.push_back(csv::parse_double(f[k + 1]));
  }
  Matrix m(static_cast<Eigen::Index>(ids.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t k = 0; k < dim; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = values[i * dim + k];
  return EmbeddingTable(std::move(ids), std::move(m));
}

}  // namespace slg
