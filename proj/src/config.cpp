#include <fstream>

#include "slg/error.hpp"
#include "slg/pipeline.hpp"

namespace slg::pipeline {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::baseline: return "baseline";
    case Method::soft: return "soft";
    case Method::hard: return "hard";
    case Method::soft_hard: return "soft+hard";
  }
  return "?";
}

Method parse_method(std::string_view s) {
  if (s == "baseline") return Method::baseline;
  if (s == "soft") return Method::soft;
  if (s == "hard") return Method::hard;
  if (s == "soft+hard" || s == "combined") return Method::soft_hard;
  throw ConfigError("unknown method '" + std::string(s) + "' (baseline, soft, hard, soft+hard)");
}

std::string_view to_string(Profile p) { return p == Profile::strict ? "strict" : "loose"; }

Profile parse_profile(std::string_view s) {
  if (s == "strict") return Profile::strict;
  if (s == "loose") return Profile::loose;
  throw ConfigError("unknown threshold profile '" + std::string(s) + "' (strict, loose)");
}

std::string RunConfig::effective_run_id() const {
  if (!run_id.empty()) return run_id;
  if (method == Method::baseline) return "baseline";
  return std::string(to_string(method)) + "-" + std::string(to_string(threshold_profile)) + "-" +
         std::to_string(out_dim);
}

graph::SoftLinkConfig RunConfig::resolved_softlink() const {
  graph::SoftLinkConfig s = softlink;
  s.tau = threshold_profile == Profile::strict ? thresholds.strict : thresholds.loose;
  return s;
}

sage::SageConfig RunConfig::resolved_sage() const {
  sage::SageConfig s = sage;
  s.out_dim = out_dim;
  return s;
}

seq::SeqHyper RunConfig::resolved_seqembed() const {
  seq::SeqHyper h = seqembed;
  h.page_vocab = generator.page_vocab_size;
  h.n_categories = generator.n_categories;
  return h;
}

void RunConfig::validate() const {
  generator.validate();
  resolved_seqembed().validate();
  if (cluster.min_cluster_size < 2) throw ConfigError("cluster.min_cluster_size must be >= 2");
  if (cluster.min_samples < 1) throw ConfigError("cluster.min_samples must be >= 1");
  if (cluster.pca_dims && *cluster.pca_dims == 0) throw ConfigError("cluster.pca_dims must be positive");
  resolved_softlink().validate();
  if (!(thresholds.strict > thresholds.loose))
    throw ConfigError("softlink.strict_tau must be greater than softlink.loose_tau");
  hardlink.validate();
  resolved_sage().validate();
  if (sage.in_dim != synth::kRawFeatureDim)
    throw ConfigError("sage.in_dim must equal the raw feature dimension (" + std::to_string(synth::kRawFeatureDim) +
                      ")");
  gbdt.validate();
  if (out_dim == 0) throw ConfigError("out_dim must be positive");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (run_id.find('/') != std::string::npos || run_id == "." || run_id == "..")
    throw ConfigError("run_id must be a plain directory name");
}

json RunConfig::to_json() const {
  json j;
  const auto& g = generator;
  json probs = json::object();
  for (auto t : synth::kEntityTypes) probs[std::string(synth::to_string(t))] = g.entity_share_probs.at(t);
  j["generator"] = {{"n_users", g.n_users},
                    {"n_transactions", g.n_transactions},
                    {"fraud_rate", g.fraud_rate},
                    {"n_rings", g.n_rings},
                    {"ring_size", g.ring_size},
                    {"page_vocab_size", g.page_vocab_size},
                    {"n_categories", g.n_categories},
                    {"n_archetypes_good", g.n_archetypes_good},
                    {"entity_share_probs", probs},
                    {"new_buyer_rate", g.new_buyer_rate},
                    {"fraud_new_buyer_rate", g.fraud_new_buyer_rate},
                    {"ratepay_rate", g.ratepay_rate},
                    {"hub_entity_count", g.hub_entity_count},
                    {"hub_min_size", g.hub_min_size},
                    {"hub_max_size", g.hub_max_size},
                    {"crew_size", g.crew_size},
                    {"crew_share_prob", g.crew_share_prob},
                    {"min_events", g.min_events},
                    {"max_events", g.max_events},
                    {"train_fraction", g.train_fraction},
                    {"seed", g.seed}};
  const auto& s = seqembed;
  j["seqembed"] = {{"d_tok", s.d_tok},   {"d_h", s.d_h},     {"d_att", s.d_att},   {"d_b", s.d_b},
                   {"use_category", s.use_category},         {"lr", s.lr},         {"batch", s.batch},
                   {"epochs", s.epochs}, {"seed", s.seed}};
  j["cluster"] = {{"min_cluster_size", cluster.min_cluster_size},
                  {"min_samples", cluster.min_samples},
                  {"pca_dims", cluster.pca_dims ? json(*cluster.pca_dims) : json(nullptr)},
                  {"hub_size_threshold", cluster.hub_size_threshold},
                  {"unit_rows", cluster.unit_rows},
                  {"metric", "euclidean"}};
  j["softlink"] = {{"within_cluster_only", softlink.within_cluster_only},
                   {"max_degree_cap", softlink.max_degree_cap},
                   {"strict_tau", thresholds.strict},
                   {"loose_tau", thresholds.loose}};
  json types = json::array();
  for (auto t : hardlink.entity_types) types.push_back(std::string(synth::to_string(t)));
  j["hardlink"] = {{"entity_types", types}, {"entity_hub_cap", hardlink.entity_hub_cap}};
  const auto& a = sage;
  j["sage"] = {{"depth", a.depth},
               {"fanouts", a.fanouts},
               {"in_dim", a.in_dim},
               {"hidden_dim", a.hidden_dim},
               {"walk_length", a.walk_length},
               {"walks_per_node", a.walks_per_node},
               {"window", a.window},
               {"q", a.q},
               {"neg_strategy", std::string(sage::to_string(a.neg_strategy))},
               {"beta", a.beta},
               {"neg_pool", a.neg_pool},
               {"lr", a.lr},
               {"batch", a.batch},
               {"epochs", a.epochs},
               {"max_pairs_per_epoch", a.max_pairs_per_epoch},
               {"seed", a.seed}};
  j["gbdt"] = {{"n_trees", gbdt.n_trees},     {"max_depth", gbdt.max_depth}, {"learning_rate", gbdt.learning_rate},
               {"min_leaf", gbdt.min_leaf},   {"subsample", gbdt.subsample}, {"lambda", gbdt.lambda},
               {"seed", gbdt.seed}};
  j["method"] = std::string(to_string(method));
  j["threshold_profile"] = std::string(to_string(threshold_profile));
  j["out_dim"] = out_dim;
  j["run_id"] = run_id;
  j["threads"] = threads;
  return j;
}

namespace {

bool compatible(const json& def, const json& v) {
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (def.is_number()) return v.is_number();
  if (def.is_null()) return v.is_null() || v.is_number_unsigned();
  if (def.is_array()) return v.is_array();
  return def.type() == v.type();
}

// Overlays `user` onto `defaults`, rejecting unknown keys and wrong types.
void overlay(json& defaults, const json& user, const std::string& where) {
  if (!user.is_object()) throw ConfigError("config" + (where.empty() ? "" : " section '" + where + "'") +
                                           " must be a JSON object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = where.empty() ? it.key() : where + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = defaults[it.key()];
    if (slot.is_object()) {
      overlay(slot, it.value(), key);
      continue;
    }
    // pca_dims is the only nullable field; its default may be a number.
    const bool nullable = it.key() == "pca_dims";
    if (!(nullable && (it.value().is_null() || it.value().is_number_unsigned())) && !compatible(slot, it.value()))
      throw ConfigError("config key '" + key + "' has the wrong type");
    slot = it.value();
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& user) {
  RunConfig c;
  json j = c.to_json();
  overlay(j, user, "");
  try {
    const auto& g = j.at("generator");
    auto& G = c.generator;
    G.n_users = g.at("n_users").get<std::size_t>();
    G.n_transactions = g.at("n_transactions").get<std::size_t>();
    G.fraud_rate = g.at("fraud_rate").get<double>();
    G.n_rings = g.at("n_rings").get<std::size_t>();
    G.ring_size = g.at("ring_size").get<std::size_t>();
    G.page_vocab_size = g.at("page_vocab_size").get<std::size_t>();
    G.n_categories = g.at("n_categories").get<std::size_t>();
    G.n_archetypes_good = g.at("n_archetypes_good").get<std::size_t>();
    for (auto& [k, v] : g.at("entity_share_probs").items()) G.entity_share_probs[synth::parse_entity_type(k)] = v;
    G.new_buyer_rate = g.at("new_buyer_rate").get<double>();
    G.fraud_new_buyer_rate = g.at("fraud_new_buyer_rate").get<double>();
    G.ratepay_rate = g.at("ratepay_rate").get<double>();
    G.hub_entity_count = g.at("hub_entity_count").get<std::size_t>();
    G.hub_min_size = g.at("hub_min_size").get<std::size_t>();
    G.hub_max_size = g.at("hub_max_size").get<std::size_t>();
    G.crew_size = g.at("crew_size").get<std::size_t>();
    G.crew_share_prob = g.at("crew_share_prob").get<double>();
    G.min_events = g.at("min_events").get<std::size_t>();
    G.max_events = g.at("max_events").get<std::size_t>();
    G.train_fraction = g.at("train_fraction").get<double>();
    G.seed = g.at("seed").get<std::uint64_t>();

    const auto& s = j.at("seqembed");
    auto& S = c.seqembed;
    S.d_tok = s.at("d_tok").get<std::size_t>();
    S.d_h = s.at("d_h").get<std::size_t>();
    S.d_att = s.at("d_att").get<std::size_t>();
    S.d_b = s.at("d_b").get<std::size_t>();
    S.use_category = s.at("use_category").get<bool>();
    S.lr = s.at("lr").get<double>();
    S.batch = s.at("batch").get<std::size_t>();
    S.epochs = s.at("epochs").get<std::size_t>();
    S.seed = s.at("seed").get<std::uint64_t>();

    const auto& k = j.at("cluster");
    c.cluster.min_cluster_size = k.at("min_cluster_size").get<std::size_t>();
    c.cluster.min_samples = k.at("min_samples").get<std::size_t>();
    c.cluster.pca_dims = k.at("pca_dims").is_null() ? std::nullopt
                                                    : std::optional<std::size_t>(k.at("pca_dims").get<std::size_t>());
    c.cluster.hub_size_threshold = k.at("hub_size_threshold").get<std::size_t>();
    c.cluster.unit_rows = k.at("unit_rows").get<bool>();
    if (k.at("metric").get<std::string>() != "euclidean") throw ConfigError("cluster.metric must be 'euclidean'");

    const auto& l = j.at("softlink");
    c.softlink.within_cluster_only = l.at("within_cluster_only").get<bool>();
    c.softlink.max_degree_cap = l.at("max_degree_cap").get<std::size_t>();
    c.thresholds.strict = l.at("strict_tau").get<double>();
    c.thresholds.loose = l.at("loose_tau").get<double>();

    const auto& h = j.at("hardlink");
    c.hardlink.entity_types.clear();
    for (const auto& t : h.at("entity_types")) c.hardlink.entity_types.push_back(synth::parse_entity_type(t.get<std::string>()));
    c.hardlink.entity_hub_cap = h.at("entity_hub_cap").get<std::size_t>();

    const auto& a = j.at("sage");
    auto& A = c.sage;
    A.depth = a.at("depth").get<std::size_t>();
    A.fanouts = a.at("fanouts").get<std::vector<std::size_t>>();
    A.in_dim = a.at("in_dim").get<std::size_t>();
    A.hidden_dim = a.at("hidden_dim").get<std::size_t>();
    A.walk_length = a.at("walk_length").get<std::size_t>();
    A.walks_per_node = a.at("walks_per_node").get<std::size_t>();
    A.window = a.at("window").get<std::size_t>();
    A.q = a.at("q").get<std::size_t>();
    A.neg_strategy = sage::parse_neg_strategy(a.at("neg_strategy").get<std::string>());
    A.beta = a.at("beta").get<double>();
    A.neg_pool = a.at("neg_pool").get<std::size_t>();
    A.lr = a.at("lr").get<double>();
    A.batch = a.at("batch").get<std::size_t>();
    A.epochs = a.at("epochs").get<std::size_t>();
    A.max_pairs_per_epoch = a.at("max_pairs_per_epoch").get<std::size_t>();
    A.seed = a.at("seed").get<std::uint64_t>();

    const auto& b = j.at("gbdt");
    c.gbdt.n_trees = b.at("n_trees").get<std::size_t>();
    c.gbdt.max_depth = b.at("max_depth").get<std::size_t>();
    c.gbdt.learning_rate = b.at("learning_rate").get<double>();
    c.gbdt.min_leaf = b.at("min_leaf").get<std::size_t>();
    c.gbdt.subsample = b.at("subsample").get<double>();
    c.gbdt.lambda = b.at("lambda").get<double>();
    c.gbdt.seed = b.at("seed").get<std::uint64_t>();

    c.method = parse_method(j.at("method").get<std::string>());
    c.threshold_profile = parse_profile(j.at("threshold_profile").get<std::string>());
    c.out_dim = j.at("out_dim").get<std::size_t>();
    c.run_id = j.at("run_id").get<std::string>();
    c.threads = j.at("threads").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) { return RunConfig::from_json(read_json(path)); }

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  if (!config.is_object()) config = json::object();
  json* node = &config;
  std::size_t start = 0;
  for (;;) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("malformed --set key '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& next = (*node)[part];
    if (!next.is_object()) next = json::object();
    node = &next;
    start = dot + 1;
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write", path.string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing", path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open", path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

}  // namespace slg::pipeline
