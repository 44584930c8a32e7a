#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"

#include "slg/error.hpp"
#include "slg/hash.hpp"
#include "slg/pipeline.hpp"
#include "test_util.hpp"

using namespace slg;
using namespace slg::pipeline;
namespace fs = std::filesystem;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.generator = small_generator(11);
  c.seqembed.d_tok = 8;
  c.seqembed.d_h = 16;
  c.seqembed.d_att = 8;
  c.seqembed.d_b = 16;
  c.seqembed.epochs = 1;
  c.cluster.pca_dims = 8;
  c.cluster.hub_size_threshold = 100;
  c.sage.hidden_dim = 16;
  c.sage.epochs = 1;
  c.sage.max_pairs_per_epoch = 2000;
  c.out_dim = 16;
  c.gbdt.n_trees = 15;
  c.gbdt.min_leaf = 5;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SLG_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

json fake_report(const std::string& id, const std::string& method, int profile, std::size_t dim, std::uint64_t seed,
                 double g2) {
  json r = {{"run_id", id}, {"method", method}, {"dataset_seed", seed}};
  if (profile >= 0) {
    r["threshold_profile"] = profile == 0 ? "strict" : "loose";
    r["out_dim"] = dim;
  }
  json segs;
  for (const char* s : {"Group1", "Group2", "Group3", "Group4"})
    segs[s] = {{"n", 10}, {"positives", 2}, {"ap", g2}, {"auc", 0.5}, {"dollar_ap", g2},
               {"p_at_r", {{"0.27", g2}, {"0.35", g2}}}};
  segs["Group4"] = {{"n", 0}, {"positives", 0}, {"status", "n/a"}};
  r["segments"] = segs;
  return r;
}

}  // namespace

TEST_CASE("config round-trips through JSON") {
  auto c = tiny_config();
  c.method = Method::soft_hard;
  c.threshold_profile = Profile::loose;
  c.cluster.pca_dims = std::nullopt;
  const auto j = c.to_json();
  CHECK(RunConfig::from_json(j).to_json() == j);
  CHECK(RunConfig::from_json(json::object()).to_json() == RunConfig{}.to_json());
}

TEST_CASE("config rejects unknown keys and wrong types") {
  CHECK_THROWS_AS(RunConfig::from_json({{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"sage", {{"fanoutz", 1}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"gbdt", {{"n_trees", "many"}}}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"method", "quantum"}}), ConfigError);
  CHECK_THROWS_AS(RunConfig::from_json({{"generator", {{"fraud_rate", 1.5}}}}), ConfigError);
}

TEST_CASE("overrides set nested keys and fall back to strings") {
  json j = json::object();
  apply_override(j, "sage.epochs=3");
  apply_override(j, "method=hard");
  apply_override(j, "cluster.pca_dims=null");
  CHECK(j["sage"]["epochs"] == 3);
  CHECK(j["method"] == "hard");
  const auto c = RunConfig::from_json(j);
  CHECK(c.sage.epochs == 3);
  CHECK(c.method == Method::hard);
  CHECK(!c.cluster.pca_dims);
  CHECK_THROWS_AS(apply_override(j, "novalue"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "a..b=1"), ConfigError);
}

TEST_CASE("run ids follow method, profile and dimension") {
  RunConfig c;
  c.method = Method::baseline;
  CHECK(c.effective_run_id() == "baseline");
  c.method = Method::soft_hard;
  c.threshold_profile = Profile::loose;
  c.out_dim = 32;
  CHECK(c.effective_run_id() == "soft+hard-loose-32");
  c.run_id = "custom";
  CHECK(c.effective_run_id() == "custom");
  c.run_id.clear();
  c.threshold_profile = Profile::strict;
  CHECK(c.resolved_softlink().tau == c.thresholds.strict);
  CHECK(c.resolved_sage().out_dim == 32);
}

TEST_CASE("the experiment grid has thirteen distinct runs") {
  const auto grid = grid_configs(RunConfig{});
  REQUIRE(grid.size() == 13);
  std::set<std::string> ids;
  std::size_t baselines = 0;
  for (const auto& g : grid) {
    ids.insert(g.effective_run_id());
    baselines += g.method == Method::baseline;
  }
  CHECK(ids.size() == 13);
  CHECK(baselines == 1);
  CHECK(ids.count("soft-strict-64") == 1);
  CHECK(ids.count("hard-loose-32") == 1);
}

TEST_CASE("compare builds ordered tables and bolds column maxima") {
  const auto table = compare({fake_report("soft-strict-64", "soft", 0, 64, 7, 0.6),
                              fake_report("baseline", "baseline", -1, 0, 7, 0.5),
                              fake_report("soft-strict-32", "soft", 0, 32, 7, 0.4)});
  const auto b = table.find("| baseline"), s32 = table.find("| soft strict 32d"), s64 = table.find("| soft strict 64d");
  REQUIRE(b != std::string::npos);
  REQUIRE(s32 != std::string::npos);
  REQUIRE(s64 != std::string::npos);
  CHECK(b < s32);
  CHECK(s32 < s64);
  CHECK(table.find("**0.600**") != std::string::npos);
  CHECK(table.find("n/a") != std::string::npos);
  CHECK(table.find("0.27") != std::string::npos);

  const auto one = compare({fake_report("baseline", "baseline", -1, 0, 7, 0.5)});
  CHECK(one.find("| baseline") != std::string::npos);
  CHECK_THROWS_AS(compare({}), ConfigError);
  CHECK_THROWS_AS(compare({fake_report("baseline", "baseline", -1, 0, 7, 0.5),
                           fake_report("soft-strict-64", "soft", 0, 64, 8, 0.5)}),
                  ConfigError);
}

TEST_CASE("small end-to-end runs: caching, invariance and manifests") {
  TempDir root;
  auto base = tiny_config();
  base.method = Method::baseline;
  const auto b1 = run(base, root.path());
  const std::string baseline_bytes = slurp(b1.run_dir / kReportFile);

  CHECK(b1.report["boost_columns"] == 0);
  CHECK(b1.report["feature_columns"] == synth::kRawFeatureDim);
  CHECK(!b1.report.contains("threshold_profile"));
  const auto manifest = read_json(b1.run_dir / kManifestFile);
  std::set<std::string> skipped;
  for (const auto& s : manifest["skipped_stages"]) skipped.insert(s.get<std::string>());
  CHECK(skipped.count("embed-seq") == 1);
  CHECK(skipped.count("train-sage") == 1);
  // Every recorded output exists under the root with a sha256 digest.
  for (const auto& s : manifest["stages"]) {
    CHECK(s["key"].get<std::string>().size() == 16);
    CHECK(!s["outputs"].empty());
    for (const auto& [path, sha] : s["outputs"].items()) {
      CHECK(fs::exists(root.path() / path));
      CHECK(sha.get<std::string>().size() == 64);
    }
  }

  auto soft = tiny_config();
  soft.method = Method::soft;
  const auto s1 = run(soft, root.path());
  CHECK(s1.report["boost_columns"].get<std::size_t>() == soft.out_dim + 1);
  CHECK(s1.report["threshold_profile"] == "strict");
  // The dataset stage is shared through the cache.
  bool gen_cached = false;
  for (const auto& st : s1.stages)
    if (st.stage == "gen") gen_cached = st.cached;
  CHECK(gen_cached);

  // Re-running is fully cached and byte-identical.
  const auto s2 = run(soft, root.path());
  for (const auto& st : s2.stages) CHECK_MESSAGE(st.cached, st.stage);
  CHECK(s2.report == s1.report);

  // Adding graph runs leaves the baseline report untouched.
  const auto b2 = run(base, root.path());
  CHECK(slurp(b2.run_dir / kReportFile) == baseline_bytes);

  // A fresh root reproduces the same bytes.
  TempDir other;
  const auto s3 = run(soft, other.path());
  CHECK(slurp(s3.run_dir / kReportFile) == slurp(s1.run_dir / kReportFile));

  // Labels are identical across methods: same dataset for both.
  std::string labels_b, labels_s;
  for (const auto& st : b1.stages)
    if (st.stage == "gen")
      for (const auto& [p, h] : st.outputs)
        if (fs::path(p).filename() == synth::kLabelsFile) labels_b = h;
  for (const auto& st : s1.stages)
    if (st.stage == "gen")
      for (const auto& [p, h] : st.outputs)
        if (fs::path(p).filename() == synth::kLabelsFile) labels_s = h;
  CHECK(!labels_b.empty());
  CHECK(labels_b == labels_s);

  // Compare accepts both run directories.
  const auto table = compare({b1.report, s1.report});
  CHECK(table.find("| baseline") != std::string::npos);
  CHECK(table.find("| soft strict 16d") != std::string::npos);
}

TEST_CASE("ring members are behaviorally closer to each other than to good traffic") {
  TempDir dir;
  auto c = tiny_config();
  stages::gen(c, dir.path());
  stages::embed_seq(c, dir.path(), dir.path());
  const auto ds = synth::read_dataset(dir.path());
  const auto emb = EmbeddingTable::read_csv(dir / seq::kEmbeddingsFile, "e");
  auto unit = [&](std::size_t i) {
    Eigen::RowVectorXd v = emb.vectors().row(Eigen::Index(*emb.row_of(ds.transactions[i].txn_id)));
    return Eigen::RowVectorXd(v / v.norm());
  };
  double intra = 0, cross = 0;
  std::size_t ni = 0, nc = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.transactions[i].ring_id < 0) continue;
    for (std::size_t j = 0; j < ds.size(); ++j) {
      if (i == j) continue;
      if (ds.transactions[j].ring_id == ds.transactions[i].ring_id) {
        intra += unit(i).dot(unit(j));
        ++ni;
      } else if (!ds.transactions[j].is_fraud && j % 7 == 0) {
        cross += unit(i).dot(unit(j));
        ++nc;
      }
    }
  }
  CHECK(intra / double(ni) > cross / double(nc));
}

TEST_CASE("cli exit codes") {
  TempDir dir;
  CHECK(cli("--help") == 0);
  CHECK(cli("no-such-command") == 2);
  CHECK(cli("gen --out " + dir.path().string() + " --method quantum") == 2);
  CHECK(cli("gen --out " + dir.path().string() + " --set generator.bogus=1") == 2);
  CHECK(cli("gen --out " + dir.path().string() + " --set generator.n_transactions=300 --set generator.n_users=100 "
            "--set generator.n_rings=1 --set generator.ring_size=4 --set generator.hub_entity_count=0") == 0);
  CHECK(fs::exists(dir / synth::kLabelsFile));
  // Stage inputs missing: the stage fails.
  TempDir empty;
  CHECK(cli("train-model --out " + empty.path().string()) == 3);
  CHECK(cli("compare") == 2);
}
