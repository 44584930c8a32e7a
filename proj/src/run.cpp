#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "slg/csv.hpp"
#include "slg/error.hpp"
#include "slg/hash.hpp"
#include "slg/metrics.hpp"
#include "slg/parallel.hpp"
#include "slg/pipeline.hpp"
#include "slg/segments.hpp"

namespace slg::pipeline {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr const char* kCompleteMarker = ".complete";

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Timing fields change between identical runs, so they are left out of hashes.
json strip_timings(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) {
      if (k.size() >= 3 && k.compare(k.size() - 3, 3, "_ms") == 0) continue;
      out[k] = strip_timings(v);
    }
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(strip_timings(v));
    return out;
  }
  return j;
}

std::string content_hash(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".json") return sha256_hex(strip_timings(read_json(p)).dump());
  if (ext == ".jsonl") {
    std::ifstream in(p);
    if (!in) throw IoError("cannot read", p.string());
    std::string line, canon;
    while (std::getline(in, line))
      if (!line.empty()) canon += strip_timings(json::parse(line)).dump() + "\n";
    return sha256_hex(canon);
  }
  return sha256_file(p);
}

std::vector<std::pair<std::string, std::string>> hash_dir(const fs::path& dir, const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != kCompleteMarker) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : files) out.emplace_back(fs::relative(f, root).generic_string(), content_hash(f));
  return out;
}

struct Stage {
  std::string key;
  fs::path dir;
};

class Runner {
 public:
  explicit Runner(fs::path root) : root_(std::move(root)) {}

  Stage stage(const std::string& name, const json& material, const std::vector<const Stage*>& inputs,
              const std::function<void(const fs::path&)>& body) {
    json m = {{"stage", name}, {"params", material}};
    json up = json::array();
    for (const auto* s : inputs) up.push_back(s->key);
    m["inputs"] = up;
    const std::string key = sha256_hex(m.dump()).substr(0, 16);
    const fs::path dir = root_ / "cache" / (name + "-" + key);
    StageRecord rec;
    rec.stage = name;
    rec.key = key;
    if (fs::exists(dir / kCompleteMarker)) {
      rec.cached = true;
      rec.wall_ms = read_json(dir / kCompleteMarker).value("wall_ms", 0.0);
    } else {
      fs::path partial = dir;
      partial += ".partial";
      std::error_code ec;
      fs::remove_all(partial, ec);
      fs::remove_all(dir, ec);
      fs::create_directories(partial);
      const auto t0 = Clock::now();
      try {
        body(partial);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(name, e.what());
      }
      rec.wall_ms = ms_since(t0);
      write_json(partial / kCompleteMarker, {{"stage", name}, {"key", key}, {"wall_ms", rec.wall_ms}});
      fs::rename(partial, dir);
    }
    for (const auto* s : inputs) {
      auto h = hash_dir(s->dir, root_);
      rec.inputs.insert(rec.inputs.end(), h.begin(), h.end());
    }
    rec.outputs = hash_dir(dir, root_);
    records_.push_back(std::move(rec));
    return {key, dir};
  }

  std::vector<StageRecord> take() { return std::move(records_); }

 private:
  fs::path root_;
  std::vector<StageRecord> records_;
};

json record_json(const StageRecord& r) {
  json in = json::object(), out = json::object();
  for (const auto& [p, h] : r.inputs) in[p] = h;
  for (const auto& [p, h] : r.outputs) out[p] = h;
  return {{"stage", r.stage}, {"key", r.key}, {"cached", r.cached}, {"wall_ms", r.wall_ms}, {"inputs", in},
          {"outputs", out}};
}

void copy_over(const fs::path& from, const fs::path& to) {
  fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

}  // namespace

RunResult run(const RunConfig& cfg, const fs::path& root) {
  cfg.validate();
  set_thread_count(cfg.threads);
  const json c = cfg.to_json();
  Runner r(root);
  const bool graph = cfg.method != Method::baseline;
  const bool soft = cfg.method == Method::soft || cfg.method == Method::soft_hard;

  const Stage gen = r.stage("gen", c["generator"], {}, [&](const fs::path& o) { stages::gen(cfg, o); });
  const Stage hard = r.stage("hard-links", c["hardlink"], {&gen},
                             [&](const fs::path& o) { stages::hard_links(cfg, gen.dir, o); });
  std::optional<Stage> boost;
  std::vector<std::string> skipped;
  if (graph) {
    const Stage embed = r.stage("embed-seq", c["seqembed"], {&gen},
                                [&](const fs::path& o) { stages::embed_seq(cfg, gen.dir, o); });
    std::optional<Stage> clusters;
    if (soft)
      clusters = r.stage("cluster", c["cluster"], {&gen, &embed},
                         [&](const fs::path& o) { stages::cluster(cfg, gen.dir, embed.dir, o); });
    else
      skipped.push_back("cluster");
    json gm = {{"method", std::string(to_string(cfg.method))}};
    std::vector<const Stage*> gin = {&gen, &hard};
    if (soft) {
      const auto s = cfg.resolved_softlink();
      gm["tau"] = s.tau;
      gm["within_cluster_only"] = s.within_cluster_only;
      gm["max_degree_cap"] = s.max_degree_cap;
      gin.push_back(&embed);
      gin.push_back(&*clusters);
    }
    const fs::path cdir = clusters ? clusters->dir : fs::path();
    const Stage g = r.stage("build-graph", gm, gin, [&](const fs::path& o) {
      stages::build_graph(cfg, gen.dir, embed.dir, cdir, hard.dir, o);
    });
    json sm = c["sage"];
    sm["out_dim"] = cfg.out_dim;
    const Stage sage = r.stage("train-sage", sm, {&gen, &embed, &g},
                               [&](const fs::path& o) { stages::train_sage(cfg, gen.dir, embed.dir, g.dir, o); });
    boost = r.stage("embed-nodes", sm, {&gen, &g, &sage},
                    [&](const fs::path& o) { stages::embed_nodes(cfg, gen.dir, g.dir, sage.dir, o); });
  } else {
    skipped = {"embed-seq", "cluster", "build-graph", "train-sage", "embed-nodes"};
  }
  const std::optional<fs::path> bdir = boost ? std::optional<fs::path>(boost->dir) : std::nullopt;
  std::vector<const Stage*> min = {&gen};
  if (boost) min.push_back(&*boost);
  const Stage model = r.stage("train-model", c["gbdt"], min,
                              [&](const fs::path& o) { stages::train_model(cfg, gen.dir, bdir, o); });
  json em = {{"run_id", cfg.effective_run_id()}, {"method", std::string(to_string(cfg.method))}};
  if (graph) {
    em["threshold_profile"] = std::string(to_string(cfg.threshold_profile));
    em["out_dim"] = cfg.out_dim;
  }
  std::vector<const Stage*> ein = {&gen, &hard, &model};
  if (boost) ein.push_back(&*boost);
  const Stage eval = r.stage("evaluate", em, ein, [&](const fs::path& o) {
    stages::evaluate(cfg, gen.dir, hard.dir, bdir, model.dir, o);
  });

  RunResult result;
  result.run_id = cfg.effective_run_id();
  result.run_dir = root / "runs" / result.run_id;
  result.stages = r.take();
  fs::create_directories(result.run_dir);
  for (const char* f : {kReportFile, kCurveFile, kScoresFile}) copy_over(eval.dir / f, result.run_dir / f);
  write_json(result.run_dir / kConfigFile, c);
  json recs = json::array();
  for (const auto& s : result.stages) recs.push_back(record_json(s));
  write_json(result.run_dir / kManifestFile,
             {{"run_id", result.run_id}, {"config", c}, {"stages", recs}, {"skipped_stages", skipped}});
  result.report = read_json(result.run_dir / kReportFile);
  return result;
}

std::vector<RunConfig> grid_configs(const RunConfig& base) {
  std::vector<RunConfig> out;
  RunConfig b = base;
  b.run_id.clear();
  b.method = Method::baseline;
  out.push_back(b);
  for (auto m : {Method::soft, Method::hard, Method::soft_hard})
    for (auto p : {Profile::strict, Profile::loose})
      for (std::size_t d : {std::size_t{32}, std::size_t{64}}) {
        RunConfig c = base;
        c.run_id.clear();
        c.method = m;
        c.threshold_profile = p;
        c.out_dim = d;
        out.push_back(c);
      }
  return out;
}

GridOutcome run_grid(const RunConfig& base, const fs::path& root) {
  GridOutcome g;
  std::vector<json> reports;
  json summary = json::array();
  for (const auto& cfg : grid_configs(base)) {
    const std::string id = cfg.effective_run_id();
    try {
      g.runs.push_back(run(cfg, root));
      reports.push_back(g.runs.back().report);
      summary.push_back({{"run_id", id}, {"status", "ok"}});
    } catch (const StageError& e) {
      g.failures.emplace_back(id, e.what());
      summary.push_back({{"run_id", id}, {"status", "failed"}, {"stage", e.stage()}, {"error", e.what()}});
    }
  }
  write_json(root / "grid.json", summary);
  if (!reports.empty()) {
    std::ofstream out(root / "comparison.md", std::ios::trunc);
    out << compare(reports);
    if (!out) throw IoError("cannot write", (root / "comparison.md").string());
  }
  return g;
}

namespace {

int method_rank(const std::string& m) { return static_cast<int>(parse_method(m)); }

std::string row_label(const json& r) {
  std::string s = r.at("method").get<std::string>();
  if (r.contains("threshold_profile"))
    s += " " + r["threshold_profile"].get<std::string>() + " " + std::to_string(r["out_dim"].get<std::size_t>()) + "d";
  return s;
}

std::string fmt(double v) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(3) << v;
  return o.str();
}

std::optional<double> seg_value(const json& r, const std::string& seg, const std::string& field,
                                const std::string& sub = "") {
  const auto& s = r.at("segments");
  if (!s.contains(seg)) return std::nullopt;
  const auto& v = s[seg];
  if (!v.contains(field)) return std::nullopt;
  if (sub.empty()) return v[field].get<double>();
  if (!v[field].contains(sub)) return std::nullopt;
  return v[field][sub].get<double>();
}

// Bolds values equal to the column maximum at the printed precision.
std::string cell(std::optional<double> v, std::optional<double> best) {
  if (!v) return "n/a";
  const std::string t = fmt(*v);
  return best && fmt(*best) == t ? "**" + t + "**" : t;
}

}  // namespace

std::string compare(const std::vector<json>& reports) {
  if (reports.empty()) throw ConfigError("compare: no reports");
  const auto seed = reports.front().at("dataset_seed");
  for (const auto& r : reports)
    if (r.at("dataset_seed") != seed)
      throw ConfigError("compare: reports come from different dataset seeds (" + seed.dump() + " vs " +
                        r.at("dataset_seed").dump() + ")");
  std::vector<const json*> rows;
  for (const auto& r : reports) rows.push_back(&r);
  auto sort_key = [](const json* r) {
    const int prof = r->contains("threshold_profile") ? static_cast<int>(parse_profile((*r)["threshold_profile"].get<std::string>())) : -1;
    const std::size_t dim = r->contains("out_dim") ? (*r)["out_dim"].get<std::size_t>() : 0;
    return std::make_tuple(method_rank(r->at("method").get<std::string>()), prof, dim, r->at("run_id").get<std::string>());
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const json* a, const json* b) { return sort_key(a) < sort_key(b); });

  std::vector<std::string> groups;
  for (auto s : synth::kSegments) groups.emplace_back(synth::to_string(s));
  auto column_max = [&](const std::string& g, const std::string& f, const std::string& sub) {
    std::optional<double> m;
    for (const auto* r : rows)
      if (auto v = seg_value(*r, g, f, sub)) m = m ? std::max(*m, *v) : *v;
    return m;
  };

  std::ostringstream out;
  out << "Dataset seed " << seed.dump() << ", " << rows.size() << " run(s).\n\n";
  out << "AP / AUC\n\n| run |";
  for (const auto& g : groups) out << ' ' << g << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < groups.size(); ++i) out << "---|";
  out << '\n';
  for (const auto* r : rows) {
    out << "| " << row_label(*r) << " |";
    for (const auto& g : groups) {
      const auto ap = seg_value(*r, g, "ap"), auc = seg_value(*r, g, "auc");
      if (!ap) {
        out << " n/a |";
        continue;
      }
      out << ' ' << cell(ap, column_max(g, "ap", "")) << " / " << cell(auc, column_max(g, "auc", "")) << " |";
    }
    out << '\n';
  }
  for (double rp : metrics::kRecallPoints) {
    const std::string key = csv::format_double(rp);
    out << "\nPrecision at recall " << key << "\n\n| run |";
    for (const auto& g : groups) out << ' ' << g << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < groups.size(); ++i) out << "---|";
    out << '\n';
    for (const auto* r : rows) {
      out << "| " << row_label(*r) << " |";
      for (const auto& g : groups) out << ' ' << cell(seg_value(*r, g, "p_at_r", key), column_max(g, "p_at_r", key)) << " |";
      out << '\n';
    }
  }
  return out.str();
}

json BenchResult::to_json() const {
  json j = {{"n", n},
            {"cluster_ms", cluster_ms},
            {"prefiltered_ms", prefiltered_ms},
            {"allpairs_ms", allpairs_ms},
            {"ratio", ratio},
            {"ratio_including_clustering", ratio_including_clustering},
            {"prefiltered_pairs", prefiltered_pairs},
            {"allpairs_pairs", allpairs_pairs},
            {"prefiltered_edges", prefiltered_edges},
            {"allpairs_edges", allpairs_edges},
            {"warnings", warnings}};
  j["within_cluster_agree"] = within_cluster_agree ? json(*within_cluster_agree) : json();
  return j;
}

BenchResult bench_graph_build(const EmbeddingTable& embeddings, const cluster::ClusterConfig& ccfg,
                              const graph::SoftLinkConfig& scfg) {
  ccfg.validate(embeddings.dim());
  scfg.validate();
  BenchResult b;
  b.n = embeddings.size();
  if (b.n < 20000)
    b.warnings.push_back("only " + std::to_string(b.n) + " embeddings; the ratio is not meaningful below 20000");

  auto t0 = Clock::now();
  const Matrix x = cluster::prepare_points(embeddings.vectors(), ccfg);
  const auto labeling = cluster::hdbscan(x, ccfg.min_cluster_size, ccfg.min_samples);
  const auto filter = cluster::filter_nodes(labeling, embeddings.ids(), ccfg.hub_size_threshold);
  b.cluster_ms = ms_since(t0);

  t0 = Clock::now();
  const auto pre = graph::soft_link_edges(embeddings, filter, scfg);
  b.prefiltered_ms = ms_since(t0);
  t0 = Clock::now();
  const auto all = graph::all_pairs_soft_link_edges(embeddings, scfg);
  b.allpairs_ms = ms_since(t0);

  b.prefiltered_pairs = pre.pair_evaluations;
  b.allpairs_pairs = all.pair_evaluations;
  b.prefiltered_edges = pre.edges.size();
  b.allpairs_edges = all.edges.size();
  b.ratio = b.prefiltered_ms > 0.0 ? b.allpairs_ms / b.prefiltered_ms : 0.0;
  b.ratio_including_clustering = b.allpairs_ms / std::max(b.prefiltered_ms + b.cluster_ms, 1e-9);

  if (b.n <= 2000) {
    // Without a degree cap both builds apply the same threshold, so they must
    // agree on every pair the prefiltered build was allowed to consider.
    graph::SoftLinkConfig open = scfg;
    open.max_degree_cap = std::numeric_limits<std::size_t>::max();
    const auto p = graph::soft_link_edges(embeddings, filter, open);
    const auto a = graph::all_pairs_soft_link_edges(embeddings, open);
    std::map<TxnId, int> group;
    for (const auto& [cid, members] : filter.retained_clusters)
      for (TxnId id : members) group[id] = scfg.within_cluster_only ? cid : 0;
    std::vector<graph::Edge> expected;
    for (const auto& e : a.edges) {
      const auto gs = group.find(e.src), gd = group.find(e.dst);
      if (gs != group.end() && gd != group.end() && gs->second == gd->second) expected.push_back(e);
    }
    b.within_cluster_agree = expected == p.edges;
  }
  return b;
}

}  // namespace slg::pipeline
