#include "slg/segments.hpp"

#include <string>

#include "slg/error.hpp"

namespace slg::synth {

std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::group1: return "Group1";
    case Segment::group2: return "Group2";
    case Segment::group3: return "Group3";
    case Segment::group4: return "Group4";
  }
  return "?";
}

std::set<Segment> SegmentTags::labels(std::size_t row) const {
  std::set<Segment> out;
  for (auto s : kSegments)
    if (has(row, s)) out.insert(s);
  return out;
}

std::size_t SegmentTags::count(Segment s) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) n += has(i, s);
  return n;
}

SegmentTags tag_segments(const Dataset& dataset, const graph::TxnGraph& hard_graph) {
  for (TxnId id : hard_graph.nodes())
    if (!dataset.contains(id))
      throw ConsistencyError("tag_segments: graph node " + std::to_string(id) + " is not in the dataset");
  std::vector<std::uint8_t> bits(dataset.size(), 0);
  auto set = [&](std::size_t i, Segment s) { bits[i] |= static_cast<std::uint8_t>(1U << static_cast<int>(s)); };
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& t = dataset.transactions[i];
    if (t.split == Split::test) set(i, Segment::group1);
    if (t.is_new_buyer) set(i, Segment::group2);
    if (t.payment_kind == PaymentKind::ratepay) set(i, Segment::group4);
    if (auto pos = hard_graph.position(t.txn_id); pos && hard_graph.degree(*pos, graph::EdgeKind::hard) > 0)
      set(i, Segment::group3);
  }
  return SegmentTags(std::move(bits));
}

}  // namespace slg::synth
