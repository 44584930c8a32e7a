#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string_view>
#include <vector>

#include "slg/graph.hpp"
#include "slg/synthgen.hpp"

namespace slg::synth {

/// Evaluation populations. Labels are non-exclusive.
///   group1  test transactions
///   group2  new or guest buyers
///   group3  at least one hard link
///   group4  ratepay-like payment
enum class Segment : int { group1 = 0, group2 = 1, group3 = 2, group4 = 3 };
inline constexpr std::array<Segment, 4> kSegments = {Segment::group1, Segment::group2, Segment::group3,
                                                    Segment::group4};
std::string_view to_string(Segment s);

/// Segment membership aligned with Dataset::transactions.
class SegmentTags {
 public:
  SegmentTags() = default;
  explicit SegmentTags(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {}

  std::size_t size() const noexcept { return bits_.size(); }
  bool has(std::size_t row, Segment s) const { return (bits_[row] >> static_cast<int>(s)) & 1U; }
  std::set<Segment> labels(std::size_t row) const;
  std::size_t count(Segment s) const;
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

 private:
  std::vector<std::uint8_t> bits_;
};

/// Tags every transaction. `hard_graph` supplies hard-link degrees; nodes it
/// does not contain have degree 0. Group1 is only ever set on test rows.
SegmentTags tag_segments(const Dataset& dataset, const graph::TxnGraph& hard_graph);

}  // namespace slg::synth
