#include <map>
#include <set>

#include "doctest.h"

#include "slg/csv.hpp"
#include "slg/error.hpp"
#include "slg/graphbuild.hpp"
#include "slg/segments.hpp"
#include "slg/synthgen.hpp"
#include "test_util.hpp"

using namespace slg;
using namespace slg::synth;

TEST_CASE("fraud count lands within 15% of the configured rate") {
  GeneratorConfig c;
  c.n_transactions = 10000;
  c.n_users = 4000;
  c.n_rings = 10;
  const auto d = generate(c);
  std::size_t frauds = 0;
  for (const auto& t : d.transactions) frauds += t.is_fraud;
  CHECK(frauds >= 265);
  CHECK(frauds <= 355);
}

TEST_CASE("generation is a pure function of the config") {
  const auto c = small_generator(5);
  const auto a = generate(c), b = generate(c);
  CHECK(a == b);
  TempDir d1, d2;
  write_dataset(a, d1.path());
  write_dataset(b, d2.path());
  for (const char* f : {kEventsFile, kFeaturesFile, kLabelsFile, kEntitiesFile})
    CHECK(sha256_equal(d1 / f, d2 / f));
  CHECK(!(generate(small_generator(6)) == a));
}

TEST_CASE("dataset invariants hold") {
  const auto d = generate(small_generator());
  std::set<TxnId> ids;
  bool seen_test = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& t = d.transactions[i];
    CHECK(t.amount > 0.0);
    CHECK(ids.insert(t.txn_id).second);
    // train strictly precedes test
    if (t.split == Split::test) seen_test = true;
    else CHECK(!seen_test);
    for (const auto& e : d.sequences[i]) {
      CHECK(e.page_id > kPadToken);
      CHECK(e.page_id < 40);
      CHECK(e.dwell_ms >= 0.0);
    }
  }
  CHECK(seen_test);
  CHECK(d.sequences.size() == d.size());
}

TEST_CASE("ring fraud dwells less on the view-item page than good traffic") {
  const auto d = generate(small_generator());
  double fs = 0, gs = 0;
  std::size_t fn = 0, gn = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (const auto& e : d.sequences[i]) {
      if (e.page_id != kViewItemPage) continue;
      if (d.transactions[i].ring_id >= 0) {
        fs += e.dwell_ms;
        ++fn;
      } else if (!d.transactions[i].is_fraud) {
        gs += e.dwell_ms;
        ++gn;
      }
    }
  REQUIRE(fn > 0);
  REQUIRE(gn > 0);
  CHECK(fs / double(fn) < gs / double(gn));
}

TEST_CASE("without rings no two frauds share an archetype") {
  auto c = small_generator();
  c.n_rings = 0;
  const auto d = generate(c);
  std::map<std::int64_t, int> fraud_archetypes;
  for (const auto& t : d.transactions) {
    CHECK(t.ring_id == -1);
    if (t.is_fraud) ++fraud_archetypes[t.archetype];
  }
  for (const auto& [a, n] : fraud_archetypes) CHECK(n == 1);
}

TEST_CASE("hub entity values attach to at least 30 transactions each") {
  auto c = small_generator();
  c.hub_entity_count = 3;
  c.hub_min_size = 30;
  c.hub_max_size = 50;
  const auto d = generate(c);
  std::map<std::pair<int, std::int64_t>, std::size_t> counts;
  for (const auto& t : d.transactions)
    for (auto et : kEntityTypes) ++counts[{int(et), t.entity(et)}];
  std::size_t big = 0;
  for (const auto& [k, n] : counts) big += n >= 30;
  CHECK(big >= 3);
}

TEST_CASE("inconsistent configs are rejected with the invariant named") {
  auto c = small_generator();
  c.n_rings = 100;
  c.ring_size = 100;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("n_rings"), ConfigError);
  c = small_generator();
  c.fraud_rate = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_generator();
  c.page_vocab_size = 2;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("dataset files round-trip and report row counts") {
  const auto d = generate(small_generator());
  TempDir dir;
  const auto manifest = write_dataset(d, dir.path());
  CHECK(read_dataset(dir.path()) == d);
  std::map<std::string, std::size_t> rows;
  for (const auto& e : manifest) rows[e.file] = e.rows;
  CHECK(rows[kLabelsFile] == d.size());
  CHECK(rows[kFeaturesFile] == d.size());
  std::size_t events = 0;
  for (const auto& s : d.sequences) events += s.size();
  CHECK(rows[kEventsFile] == events);
  csv::Reader labels(dir / kLabelsFile);
  CHECK(labels.header() == std::vector<std::string>{"txn_id", "user_id", "amount", "is_fraud", "is_new_buyer",
                                                    "payment_kind", "split"});
}

TEST_CASE("an empty dataset writes header-only files") {
  TempDir dir;
  const Dataset empty;
  write_dataset(empty, dir.path());
  CHECK(read_dataset(dir.path()).size() == 0);
  std::vector<std::string_view> f;
  csv::Reader r(dir / kEventsFile);
  CHECK(r.header() == std::vector<std::string>{"txn_id", "seq_idx", "page_id", "category", "dwell_ms"});
  CHECK(!r.next(f));
}

TEST_CASE("segment tags follow their definitions") {
  const auto d = generate(small_generator());
  const auto hard = graph::hard_link_edges(d, graph::HardLinkConfig{});
  const auto g = graph::merge({}, {}, hard.edges);
  const auto tags = tag_segments(d, g);
  std::size_t tests = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& t = d.transactions[i];
    const bool test = t.split == Split::test;
    tests += test;
    CHECK(tags.has(i, Segment::group1) == test);
    CHECK(tags.has(i, Segment::group2) == t.is_new_buyer);
    CHECK(tags.has(i, Segment::group4) == (t.payment_kind == PaymentKind::ratepay));
    const auto pos = g.position(t.txn_id);
    CHECK(tags.has(i, Segment::group3) == (pos && g.degree(*pos) > 0));
  }
  CHECK(tags.count(Segment::group1) == tests);

  const auto none = tag_segments(d, graph::TxnGraph{});
  CHECK(none.count(Segment::group3) == 0);

  const auto stray = graph::TxnGraph::build({}, {{d.transactions[0].txn_id, 999999999, graph::EdgeKind::hard, 1.0}});
  CHECK_THROWS_AS(tag_segments(d, stray), ConsistencyError);
}

TEST_CASE("a new buyer without hard links is tagged Group1 and Group2 only on the test split") {
  const auto d = generate(small_generator());
  const auto tags = tag_segments(d, graph::TxnGraph{});
  bool found = false;
  for (std::size_t i = 0; i < d.size() && !found; ++i) {
    const auto& t = d.transactions[i];
    if (t.split != Split::test || !t.is_new_buyer || t.payment_kind == PaymentKind::ratepay) continue;
    found = true;
    CHECK(tags.labels(i) == std::set<Segment>{Segment::group1, Segment::group2});
  }
  CHECK(found);
}
