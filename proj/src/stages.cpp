#include <chrono>
#include <fstream>

#include "slg/csv.hpp"
#include "slg/error.hpp"
#include "slg/metrics.hpp"
#include "slg/pipeline.hpp"
#include "slg/segments.hpp"

namespace slg::pipeline::stages {

namespace fs = std::filesystem;
using Idx = Eigen::Index;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory", dir.string());
}

Matrix raw_rows(const synth::Dataset& d, const std::vector<std::size_t>& rows) {
  Matrix x(static_cast<Idx>(rows.size()), static_cast<Idx>(synth::kRawFeatureDim));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t f = 0; f < synth::kRawFeatureDim; ++f)
      x(static_cast<Idx>(i), static_cast<Idx>(f)) = d.transactions[rows[i]].raw_features[f];
  return x;
}

std::vector<std::size_t> rows_of_split(const synth::Dataset& d, synth::Split s) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.transactions[i].split == s) rows.push_back(i);
  return rows;
}

graph::TxnGraph load_graph(const fs::path& dir) {
  return graph::TxnGraph::build(graph::TxnGraph::read_nodes(dir / kNodesFile),
                                graph::TxnGraph::read_edges(dir / kEdgesFile));
}

/// Standardized raw features for each graph node, rows by graph position.
Matrix node_features(const synth::Dataset& d, const graph::TxnGraph& g) {
  std::vector<std::size_t> rows;
  rows.reserve(g.node_count());
  for (TxnId id : g.nodes()) rows.push_back(d.index_of(id));
  return sage::standardize_columns(raw_rows(d, rows));
}

Matrix model_inputs(const synth::Dataset& d, const std::vector<std::size_t>& rows,
                    const std::optional<fs::path>& boost) {
  Matrix raw = raw_rows(d, rows);
  if (!boost) return raw;
  const auto table = EmbeddingTable::read_csv(*boost / sage::kBoostFile, "z");
  std::vector<TxnId> ids;
  ids.reserve(rows.size());
  for (auto r : rows) ids.push_back(d.transactions[r].txn_id);
  return gbdt::boost_concat(raw, ids, table);
}

std::string p_key(double r) { return csv::format_double(r); }

json metric_json(const metrics::Metric& m) { return m.value; }

}  // namespace

void gen(const RunConfig& cfg, const fs::path& out) {
  ensure_dir(out);
  const auto dataset = synth::generate(cfg.generator);
  const auto manifest = synth::write_dataset(dataset, out);
  std::size_t frauds = 0;
  for (const auto& t : dataset.transactions) frauds += t.is_fraud;
  json files = json::array();
  for (const auto& e : manifest) files.push_back({{"file", e.file}, {"rows", e.rows}});
  write_json(out / "dataset.json",
             {{"transactions", dataset.size()}, {"frauds", frauds}, {"seed", cfg.generator.seed}, {"files", files}});
}

void embed_seq(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
  ensure_dir(out);
  const auto dataset = synth::read_dataset(data);
  std::vector<seq::EncodedSequence> train_seqs, test_seqs;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto e = seq::encode(dataset.sequences[i]);
    if (!e) continue;
    (dataset.transactions[i].split == synth::Split::train ? train_seqs : test_seqs).push_back(std::move(*e));
  }
  const auto t0 = Clock::now();
  auto result = seq::train(train_seqs, cfg.resolved_seqembed());
  if (result.diverged) {
    seq::save_checkpoint(result.params, out / "seq_model.last_finite.bin");
    throw DivergenceError(result.diagnostic);
  }
  const double train_ms = ms_since(t0);
  seq::save_checkpoint(result.params, out / seq::kCheckpointFile);
  const auto emb = seq::embed_all(result.params, dataset);
  emb.table.write_csv(out / seq::kEmbeddingsFile, "e");
  write_json(out / kSeqTrainingFile, {{"train_sequences", train_seqs.size()},
                                      {"epoch_losses", result.epoch_losses},
                                      {"batches", result.batch_losses.size()},
                                      {"test_next_page_accuracy", seq::next_page_accuracy(result.params, test_seqs)},
                                      {"skipped", emb.skipped},
                                      {"train_wall_ms", train_ms}});
}

void cluster(const RunConfig& cfg, const fs::path& data, const fs::path& embed, const fs::path& out) {
  ensure_dir(out);
  const auto dataset = synth::read_dataset(data);
  const auto table = EmbeddingTable::read_csv(embed / seq::kEmbeddingsFile, "e");
  cfg.cluster.validate(table.dim());
  const auto t0 = Clock::now();
  std::vector<std::string> warnings;
  const Matrix x = cluster::prepare_points(table.vectors(), cfg.cluster, &warnings);
  const auto labeling = cluster::hdbscan(x, cfg.cluster.min_cluster_size, cfg.cluster.min_samples);
  const auto filter = cluster::filter_nodes(labeling, table.ids(), cfg.cluster.hub_size_threshold);
  const double wall = ms_since(t0);
  std::vector<bool> fraud(table.size());
  for (std::size_t i = 0; i < table.size(); ++i)
    fraud[i] = dataset.transactions[dataset.index_of(table.ids()[i])].is_fraud;
  const auto risky = cluster::risky_cluster_metrics(labeling, fraud, cluster::RiskyRule{});
  cluster::write_clusters(out / kClustersFile, table.ids(), labeling);
  std::size_t retained_clusters = 0;
  for (const auto& d : filter.decisions) retained_clusters += d.retained;
  write_json(out / kFilterReportFile, {{"points", table.size()},
                                       {"clusters", labeling.cluster_sizes.size()},
                                       {"retained_clusters", retained_clusters},
                                       {"retained", filter.retained.size()},
                                       {"dropped_noise", filter.dropped_noise},
                                       {"dropped_hub", filter.dropped_hub},
                                       {"hub_size_threshold", filter.hub_size_threshold},
                                       {"min_cluster_size", cfg.cluster.min_cluster_size},
                                       {"min_samples", cfg.cluster.min_samples},
                                       {"pca_dims", cfg.cluster.pca_dims ? json(*cfg.cluster.pca_dims) : json()},
                                       {"unit_rows", cfg.cluster.unit_rows},
                                       {"risky",
                                        {{"n_risky", risky.n_risky},
                                         {"precision", risky.precision},
                                         {"recall", risky.recall},
                                         {"f_score", risky.f_score},
                                         {"flagged", risky.flagged}}},
                                       {"warnings", warnings},
                                       {"wall_ms", wall}});
}

void hard_links(const RunConfig& cfg, const fs::path& data, const fs::path& out) {
  ensure_dir(out);
  const auto dataset = synth::read_dataset(data);
  const auto hard = graph::hard_link_edges(dataset, cfg.hardlink);
  const auto g = graph::merge({}, {}, hard.edges);
  g.write_edges(out / kHardEdgesFile);
  json by_type = json::object();
  for (const auto& [t, n] : hard.skipped_by_type) by_type[std::string(synth::to_string(t))] = n;
  write_json(out / kHardStatsFile,
             {{"edges", hard.edges.size()}, {"skipped_hub_values", hard.skipped_hub_values}, {"skipped_by_type", by_type}});
}

void build_graph(const RunConfig& cfg, const fs::path& data, const fs::path& embed, const fs::path& clusters,
                 const fs::path& hard, const fs::path& out) {
  if (cfg.method == Method::baseline) throw ConfigError("build-graph: the baseline method has no graph");
  ensure_dir(out);
  json stats;
  std::vector<TxnId> nodes;
  std::vector<graph::Edge> soft, hard_edges;
  const bool use_soft = cfg.method == Method::soft || cfg.method == Method::soft_hard;
  const bool use_hard = cfg.method == Method::hard || cfg.method == Method::soft_hard;
  if (use_soft) {
    const auto table = EmbeddingTable::read_csv(embed / seq::kEmbeddingsFile, "e");
    std::vector<TxnId> ids;
    const auto labeling = cluster::read_clusters(clusters / kClustersFile, ids);
    const auto filter = cluster::filter_nodes(labeling, ids, cfg.cluster.hub_size_threshold);
    const auto scfg = cfg.resolved_softlink();
    const auto t0 = Clock::now();
    auto result = graph::soft_link_edges(table, filter, scfg);
    stats["soft_build_wall_ms"] = ms_since(t0);
    stats["tau"] = scfg.tau;
    stats["pair_evaluations"] = result.pair_evaluations;
    stats["candidate_edges"] = result.candidate_edges;
    stats["zero_vector_nodes"] = result.zero_vector_nodes;
    stats["warnings"] = result.warnings;
    soft = std::move(result.edges);
    nodes = filter.retained;
  }
  const auto hard_all = graph::TxnGraph::read_edges(hard / kHardEdgesFile);
  if (use_hard) hard_edges = hard_all;
  const auto g = graph::merge(nodes, soft, hard_edges);
  // Validate against the dataset before anything is written.
  const auto dataset = synth::read_dataset(data);
  for (TxnId id : g.nodes())
    if (!dataset.contains(id)) throw ConsistencyError("graph node " + std::to_string(id) + " is not in the dataset");
  g.write_edges(out / kEdgesFile);
  g.write_nodes(out / kNodesFile);
  const auto s = graph::graph_stats(g);
  json hist = json::object();
  for (const auto& [deg, count] : s.degree_histogram) hist[std::to_string(deg)] = count;
  stats["method"] = std::string(to_string(cfg.method));
  stats["nodes"] = s.nodes;
  stats["soft_edges"] = s.soft_edges;
  stats["hard_edges"] = s.hard_edges;
  stats["isolated"] = s.isolated;
  stats["mean_degree"] = s.mean_degree;
  stats["max_degree"] = s.max_degree;
  stats["degree_histogram"] = hist;
  const json hard_stats = read_json(hard / kHardStatsFile);
  stats["skipped_hub_values"] = hard_stats.at("skipped_hub_values");
  if (!soft.empty()) stats["hard_to_soft_edge_ratio"] = static_cast<double>(hard_all.size()) / static_cast<double>(soft.size());
  write_json(out / kGraphStatsFile, stats);
}

void train_sage(const RunConfig& cfg, const fs::path& data, const fs::path& embed, const fs::path& graph_dir,
                const fs::path& out) {
  ensure_dir(out);
  const auto dataset = synth::read_dataset(data);
  const auto g = load_graph(graph_dir);
  if (g.edge_count() == 0) throw ConsistencyError("train-sage: the graph has no edges");
  const auto features = node_features(dataset, g);
  const auto table = EmbeddingTable::read_csv(embed / seq::kEmbeddingsFile, "e");
  const auto behavior = sage::BehaviorIndex::build(g, table);
  const auto scfg = cfg.resolved_sage();
  auto result = sage::train(g, features, &behavior, scfg);
  std::ofstream log(out / sage::kTrainingLogFile, std::ios::trunc);
  if (!log) throw IoError("cannot write", (out / sage::kTrainingLogFile).string());
  for (const auto& e : result.epochs)
    log << json{{"epoch", e.epoch}, {"mean_loss", e.mean_loss}, {"wall_ms", e.wall_ms}, {"pairs", e.pairs}}.dump()
        << '\n';
  log.close();
  if (result.diverged) {
    sage::save_params(result.params, out / "sage_params.last_finite.json");
    throw DivergenceError(result.diagnostic);
  }
  sage::save_params(result.params, out / sage::kParamsFile);
  write_json(out / "sage_train.json", {{"negative_fallbacks", result.negative_fallbacks},
                                       {"epochs", result.epochs.size()},
                                       {"nodes", g.node_count()}});
}

void embed_nodes(const RunConfig& cfg, const fs::path& data, const fs::path& graph_dir, const fs::path& sage_dir,
                 const fs::path& out) {
  ensure_dir(out);
  const auto dataset = synth::read_dataset(data);
  const auto g = load_graph(graph_dir);
  const auto params = sage::load_params(sage_dir / sage::kParamsFile);
  const auto scfg = cfg.resolved_sage();
  const auto table = sage::embed_nodes(params, g, node_features(dataset, g), scfg, scfg.seed);
  table.write_csv(out / sage::kBoostFile, "z");
}

void train_model(const RunConfig& cfg, const fs::path& data, const std::optional<fs::path>& boost,
                 const fs::path& out) {
  ensure_dir(out);
  const auto dataset = synth::read_dataset(data);
  const auto rows = rows_of_split(dataset, synth::Split::train);
  const Matrix x = model_inputs(dataset, rows, boost);
  std::vector<int> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(dataset.transactions[r].is_fraud ? 1 : 0);
  const auto model = gbdt::train(x, y, cfg.gbdt);
  gbdt::save_model(model, out / gbdt::kModelFile);
}

void evaluate(const RunConfig& cfg, const fs::path& data, const fs::path& hard,
              const std::optional<fs::path>& boost, const fs::path& model_dir, const fs::path& out) {
  ensure_dir(out);
  const auto dataset = synth::read_dataset(data);
  const auto model = gbdt::load_model(model_dir / gbdt::kModelFile);
  const auto rows = rows_of_split(dataset, synth::Split::test);
  const Matrix x = model_inputs(dataset, rows, boost);
  const auto scores = gbdt::predict(model, x);
  const auto hard_graph = graph::merge({}, {}, graph::TxnGraph::read_edges(hard / kHardEdgesFile));
  const auto tags = synth::tag_segments(dataset, hard_graph);
  std::vector<int> labels;
  std::vector<double> amounts;
  std::vector<metrics::SegmentSpec> segs;
  for (auto s : synth::kSegments) segs.push_back({std::string(synth::to_string(s)), {}});
  for (auto r : rows) {
    labels.push_back(dataset.transactions[r].is_fraud ? 1 : 0);
    amounts.push_back(dataset.transactions[r].amount);
    for (std::size_t k = 0; k < synth::kSegments.size(); ++k) segs[k].member.push_back(tags.has(r, synth::kSegments[k]));
  }
  const auto report = metrics::segment_report(scores, labels, amounts, segs);

  json segments = json::object();
  {
    csv::Writer curve(out / kCurveFile, {"segment", "recall", "precision"});
    for (const auto& m : report.segments) {
      json row;
      row["n"] = m.n;
      row["positives"] = m.positives;
      if (m.empty) {
        row["status"] = "n/a";
      } else {
        row["ap"] = metric_json(m.ap);
        row["auc"] = metric_json(m.auc);
        row["dollar_ap"] = metric_json(m.dollar_ap);
        json par = json::object();
        for (const auto& [r, v] : m.p_at_r) par[p_key(r)] = v.value;
        row["p_at_r"] = par;
        json flags = json::array();
        if (m.ap.flagged) flags.push_back("ap");
        if (m.auc.flagged) flags.push_back("auc");
        for (const auto& [r, v] : m.p_at_r)
          if (v.flagged) flags.push_back("p_at_r=" + p_key(r));
        if (!flags.empty()) row["flags"] = flags;
      }
      segments[m.name] = row;
      for (const auto& pt : m.curve) {
        curve.field(m.name).field(pt.recall).field(pt.precision);
        curve.end_row();
      }
    }
    curve.close();
  }
  {
    csv::Writer sc(out / kScoresFile, {"txn_id", "score", "is_fraud"});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      sc.field(dataset.transactions[rows[i]].txn_id).field(scores[i]).field(static_cast<std::int64_t>(labels[i]));
      sc.end_row();
    }
    sc.close();
  }
  json rep;
  rep["run_id"] = cfg.effective_run_id();
  rep["method"] = std::string(to_string(cfg.method));
  if (cfg.method != Method::baseline) {
    rep["threshold_profile"] = std::string(to_string(cfg.threshold_profile));
    rep["out_dim"] = cfg.out_dim;
  }
  rep["dataset_seed"] = cfg.dataset_seed();
  rep["feature_columns"] = static_cast<std::size_t>(x.cols());
  rep["boost_columns"] = boost ? static_cast<std::size_t>(x.cols()) - synth::kRawFeatureDim : 0;
  rep["test_rows"] = rows.size();
  rep["segments"] = segments;
  write_json(out / kReportFile, rep);
}

}  // namespace slg::pipeline::stages
