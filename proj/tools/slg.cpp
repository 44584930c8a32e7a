// slg: command-line driver for the soft-link fraud pipeline.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"

#include "slg/embedding_table.hpp"
#include "slg/error.hpp"
#include "slg/parallel.hpp"
#include "slg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace slg;
using namespace slg::pipeline;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string method;
  std::optional<std::size_t> threads;
  std::vector<std::string> sets;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory (default: $SLG_OUT_DIR or ./slg_out)");
  app->add_option("--seed", c.seed, "dataset seed");
  app->add_option("--method", c.method, "baseline | soft | hard | soft+hard");
  app->add_option("--threads", c.threads, "worker threads; 1 is the deterministic mode");
  app->add_option("--set", c.sets, "override, e.g. --set sage.epochs=3")->allow_extra_args(false);
}

RunConfig resolve(const Common& c) {
  json j = c.config.empty() ? json::object() : read_json(c.config);
  for (const auto& s : c.sets) apply_override(j, s);
  if (c.seed) j["generator"]["seed"] = *c.seed;
  if (!c.method.empty()) j["method"] = c.method;
  if (c.threads) j["threads"] = *c.threads;
  auto cfg = RunConfig::from_json(j);
  set_thread_count(cfg.threads);
  return cfg;
}

fs::path out_dir(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv("SLG_OUT_DIR"); env && *env) return env;
  return "slg_out";
}

std::optional<fs::path> boost_dir(const RunConfig& cfg, const fs::path& dir) {
  if (cfg.method == Method::baseline) return std::nullopt;
  return dir;
}

// Stage subcommands run inside one working directory.
template <typename Fn>
void stage_command(CLI::App& app, const std::string& name, const std::string& help, Common& c, Fn fn) {
  auto* sub = app.add_subcommand(name, help);
  add_common(sub, c);
  sub->callback([&c, name, fn] {
    const auto cfg = resolve(c);
    const fs::path dir = out_dir(c);
    try {
      fn(cfg, dir);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
    std::cout << name << ": wrote " << dir.string() << '\n';
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Soft-link graph features for fraud detection"};
  app.require_subcommand(1);
  Common c;

  stage_command(app, "gen", "generate the synthetic dataset", c,
                [](const RunConfig& cfg, const fs::path& d) { stages::gen(cfg, d); });
  stage_command(app, "embed-seq", "train seq2item and write behavior embeddings", c,
                [](const RunConfig& cfg, const fs::path& d) { stages::embed_seq(cfg, d, d); });
  stage_command(app, "cluster", "cluster embeddings and filter nodes", c, [](const RunConfig& cfg, const fs::path& d) {
    stages::cluster(cfg, d, d, d);
  });
  stage_command(app, "build-graph", "build hard and soft links", c, [](const RunConfig& cfg, const fs::path& d) {
    stages::hard_links(cfg, d, d);
    if (cfg.method != Method::baseline) stages::build_graph(cfg, d, d, d, d, d);
  });
  stage_command(app, "train-sage", "train GraphSAGE on the graph", c,
                [](const RunConfig& cfg, const fs::path& d) { stages::train_sage(cfg, d, d, d, d); });
  stage_command(app, "embed-nodes", "write boosting features for graph nodes", c,
                [](const RunConfig& cfg, const fs::path& d) { stages::embed_nodes(cfg, d, d, d, d); });
  stage_command(app, "train-model", "train the GBDT classifier", c, [](const RunConfig& cfg, const fs::path& d) {
    stages::train_model(cfg, d, boost_dir(cfg, d), d);
  });
  stage_command(app, "evaluate", "score the test split per segment", c, [](const RunConfig& cfg, const fs::path& d) {
    if (!fs::exists(d / kHardEdgesFile)) stages::hard_links(cfg, d, d);
    stages::evaluate(cfg, d, d, boost_dir(cfg, d), d, d);
  });

  int status = 0;
  bool grid = false;
  auto* run_all = app.add_subcommand("run-all", "run the full pipeline with stage caching");
  add_common(run_all, c);
  run_all->add_flag("--grid", grid, "run the 13-run method x profile x dimension grid");
  run_all->callback([&] {
    const auto cfg = resolve(c);
    const fs::path root = out_dir(c);
    if (!grid) {
      const auto r = run(cfg, root);
      for (const auto& s : r.stages)
        std::cout << s.stage << (s.cached ? " (cached)" : "") << ' ' << s.wall_ms << " ms\n";
      std::cout << "report: " << (r.run_dir / kReportFile).string() << '\n';
      return;
    }
    const auto g = run_grid(cfg, root);
    for (const auto& r : g.runs) std::cout << "ok     " << r.run_id << '\n';
    for (const auto& [id, msg] : g.failures) std::cout << "failed " << id << ": " << msg << '\n';
    std::cout << "comparison: " << (root / "comparison.md").string() << '\n';
    if (!g.failures.empty()) status = 3;
  });

  std::vector<std::string> inputs;
  std::string compare_out;
  auto* cmp = app.add_subcommand("compare", "tabulate report.json files or run directories");
  cmp->add_option("reports", inputs, "report.json files or run directories")->required();
  cmp->add_option("--out", compare_out, "write markdown here instead of stdout");
  cmp->callback([&] {
    std::vector<json> reports;
    for (const auto& p : inputs) {
      fs::path f = p;
      if (fs::is_directory(f)) f /= kReportFile;
      reports.push_back(read_json(f));
    }
    const auto md = compare(reports);
    if (compare_out.empty()) {
      std::cout << md;
      return;
    }
    std::ofstream o(compare_out, std::ios::trunc);
    o << md;
    if (!o) throw IoError("cannot write", compare_out);
  });

  std::string emb_path;
  auto* bench = app.add_subcommand("bench-graph", "time prefiltered against all-pairs soft-link building");
  add_common(bench, c);
  bench->add_option("--embeddings", emb_path, "embeddings.csv (default: <out>/embeddings.csv)");
  bench->callback([&] {
    const auto cfg = resolve(c);
    const fs::path dir = out_dir(c);
    const fs::path path = emb_path.empty() ? dir / seq::kEmbeddingsFile : fs::path(emb_path);
    const auto table = EmbeddingTable::read_csv(path, "e");
    const auto b = bench_graph_build(table, cfg.cluster, cfg.resolved_softlink());
    for (const auto& w : b.warnings) std::cerr << "warning: " << w << '\n';
    fs::create_directories(dir);
    write_json(dir / "bench.json", b.to_json());
    std::cout << b.to_json().dump(2) << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    std::cerr << "stage failed: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return status;
}
