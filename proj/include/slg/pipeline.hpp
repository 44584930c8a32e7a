#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "slg/cluster.hpp"
#include "slg/gbdt.hpp"
#include "slg/graphbuild.hpp"
#include "slg/sage.hpp"
#include "slg/seqembed.hpp"
#include "slg/synthgen.hpp"

namespace slg::pipeline {

using nlohmann::json;

enum class Method { baseline, soft, hard, soft_hard };
std::string_view to_string(Method m);
Method parse_method(std::string_view s);

enum class Profile { strict, loose };
std::string_view to_string(Profile p);
Profile parse_profile(std::string_view s);

/// A stage threw; carries the stage name. Maps to CLI exit code 3.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct RunConfig {
  synth::GeneratorConfig generator;
  seq::SeqHyper seqembed;
  cluster::ClusterConfig cluster;
  graph::SoftLinkConfig softlink;
  graph::ThresholdProfiles thresholds;
  graph::HardLinkConfig hardlink;
  sage::SageConfig sage;
  gbdt::GbdtConfig gbdt;
  Method method = Method::soft;
  Profile threshold_profile = Profile::strict;
  std::size_t out_dim = 64;
  std::string run_id;  // empty: derived from method, profile and dimension
  std::size_t threads = 1;

  std::uint64_t dataset_seed() const noexcept { return generator.seed; }
  /// "baseline", or "<method>-<profile>-<dim>".
  std::string effective_run_id() const;
  /// Soft-link config with tau resolved from the threshold profile.
  graph::SoftLinkConfig resolved_softlink() const;
  /// Sage config with out_dim applied.
  sage::SageConfig resolved_sage() const;
  /// Sequence hyperparameters with vocabulary sizes taken from the generator.
  seq::SeqHyper resolved_seqembed() const;
  void validate() const;

  json to_json() const;
  /// Keys not present in the defaults are rejected with ConfigError.
  static RunConfig from_json(const json& j);
};

RunConfig load_config(const std::filesystem::path& path);

/// Applies `section.key=value` (value parsed as JSON, else taken as a string).
void apply_override(json& config, const std::string& assignment);

/// Stage entry points. Each reads its inputs from the given directories and
/// writes conventional file names into `out`. They may all share one directory.
namespace stages {

void gen(const RunConfig& cfg, const std::filesystem::path& out);
void embed_seq(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& out);
void cluster(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& embed,
             const std::filesystem::path& out);
void hard_links(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& out);
void build_graph(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& embed,
                 const std::filesystem::path& clusters, const std::filesystem::path& hard,
                 const std::filesystem::path& out);
void train_sage(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& embed,
                const std::filesystem::path& graph, const std::filesystem::path& out);
void embed_nodes(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& graph,
                 const std::filesystem::path& sage, const std::filesystem::path& out);
/// `boost` is empty for the baseline.
void train_model(const RunConfig& cfg, const std::filesystem::path& data, const std::optional<std::filesystem::path>& boost,
                 const std::filesystem::path& out);
void evaluate(const RunConfig& cfg, const std::filesystem::path& data, const std::filesystem::path& hard,
              const std::optional<std::filesystem::path>& boost, const std::filesystem::path& model,
              const std::filesystem::path& out);

}  // namespace stages

struct StageRecord {
  std::string stage;
  std::string key;
  bool cached = false;
  double wall_ms = 0.0;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
};

struct RunResult {
  std::string run_id;
  std::filesystem::path run_dir;
  std::vector<StageRecord> stages;
  json report;
};

/// Full pipeline under `root`. Stage outputs are cached in root/cache by input
/// hash; the run's report, curve and manifest go to root/runs/<run_id>.
RunResult run(const RunConfig& cfg, const std::filesystem::path& root);

struct GridOutcome {
  std::vector<RunResult> runs;
  std::vector<std::pair<std::string, std::string>> failures;  // run id, message
};

/// Baseline plus {soft, hard, soft+hard} x {strict, loose} x {32, 64}.
std::vector<RunConfig> grid_configs(const RunConfig& base);
GridOutcome run_grid(const RunConfig& base, const std::filesystem::path& root);

/// Markdown tables of AP/AUC and precision@recall per segment, one row per
/// run, column maxima in bold. Throws ConfigError on mixed dataset seeds.
std::string compare(const std::vector<json>& reports);

struct BenchResult {
  std::size_t n = 0;
  double cluster_ms = 0.0;
  double prefiltered_ms = 0.0;
  double allpairs_ms = 0.0;
  double ratio = 0.0;                     // allpairs / prefiltered soft-link build
  double ratio_including_clustering = 0.0;
  std::size_t prefiltered_pairs = 0, allpairs_pairs = 0;
  std::size_t prefiltered_edges = 0, allpairs_edges = 0;
  std::optional<bool> within_cluster_agree;  // checked for n <= 2000
  std::vector<std::string> warnings;
  json to_json() const;
};

BenchResult bench_graph_build(const EmbeddingTable& embeddings, const cluster::ClusterConfig& ccfg,
                              const graph::SoftLinkConfig& scfg);

// Conventional file names inside a stage directory.
inline constexpr const char* kSeqTrainingFile = "seq_training.json";
inline constexpr const char* kClustersFile = "clusters.csv";
inline constexpr const char* kFilterReportFile = "filter_report.json";
inline constexpr const char* kHardEdgesFile = "hard_edges.csv";
inline constexpr const char* kHardStatsFile = "hard_stats.json";
inline constexpr const char* kEdgesFile = "edges.csv";
inline constexpr const char* kNodesFile = "nodes.csv";
inline constexpr const char* kGraphStatsFile = "graph_stats.json";
inline constexpr const char* kReportFile = "report.json";
inline constexpr const char* kCurveFile = "pr_curve.csv";
inline constexpr const char* kScoresFile = "scores.csv";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigFile = "config.json";

/// Serializes with a trailing newline.
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

}  // namespace slg::pipeline
