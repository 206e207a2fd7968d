#include "fedgkd/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "fedgkd/dataset_io.hpp"
#include "fedgkd/error.hpp"
#include "fedgkd/partition.hpp"
#include "fedgkd/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fedgkd {
namespace {

SplitMode parse_split_mode(const std::string& s) {
  if (s == "non-overlapping" || s == "disjoint") return SplitMode::kNonOverlapping;
  if (s == "overlapping") return SplitMode::kOverlapping;
  if (s == "synthetic") return SplitMode::kSynthetic;
  throw InputError("unknown split mode '" + s + "' (expected non-overlapping, overlapping, synthetic)");
}

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw InputError("manifest: bad value for '" + key + "': " + v.dump());
  }
}

int get_int(const json& v, const std::string& key) {
  if (!v.is_number()) throw InputError("manifest: '" + key + "' must be a number");
  const double d = v.get<double>();
  if (d != std::floor(d)) throw InputError("manifest: '" + key + "' must be an integer");
  return static_cast<int>(d);
}

SbmSpec parse_sbm(const json& j, SyntheticRecipe& r) {
  SbmSpec s;
  for (auto& [key, v] : j.items()) {
    if (key == "blocks") s.blocks = get_int(v, key);
    else if (key == "nodes_per_block") s.nodes_per_block = get_int(v, key);
    else if (key == "p_in") s.p_in = get_as<double>(v, key);
    else if (key == "p_out") s.p_out = get_as<double>(v, key);
    else if (key == "feature_dim") s.feature_dim = get_int(v, key);
    else if (key == "num_classes") s.num_classes = get_int(v, key);
    else if (key == "class_separation") s.class_separation = get_as<double>(v, key);
    else if (key == "label_shift") s.label_shift = get_int(v, key);
    else if (key == "train_ratio") s.train_ratio = get_as<double>(v, key);
    else if (key == "val_ratio") s.val_ratio = get_as<double>(v, key);
    else if (key == "test_ratio") s.test_ratio = get_as<double>(v, key);
    else if (key == "groups") r.groups = get_int(v, key);
    else if (key == "clients_per_group") r.clients_per_group = get_int(v, key);
    else throw InputError("manifest: unknown synthetic key '" + key + "'");
  }
  return s;
}

double mean_soft_density(const FederationResult& r) {
  double s = 0.0;
  for (const auto& rec : r.records) s += rec.mean_soft_density;
  return r.records.empty() ? 0.0 : s / static_cast<double>(r.records.size());
}

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex mu;
  std::exception_ptr error;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < std::min(jobs, n); ++w) {
      pool.emplace_back([&] {
        for (int i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

void ExperimentManifest::validate() const {
  if (dataset.has_value() == synthetic.has_value()) {
    throw InputError("manifest: give exactly one of 'dataset' and 'synthetic'");
  }
  if (dataset && !fs::is_directory(*dataset)) throw InputError("dataset directory not found: " + dataset->string());
  if (partition_file && !fs::exists(*partition_file)) {
    throw InputError("partition file not found: " + partition_file->string());
  }
  if (partition_file && split_mode != SplitMode::kNonOverlapping) {
    throw InputError("manifest: a partition file needs the non-overlapping split");
  }
  if (synthetic && synthetic->clients_per_group > 0) {
    if (split_mode != SplitMode::kSynthetic) throw InputError("manifest: grouped synthetic data needs split mode 'synthetic'");
    if (synthetic->groups < 1) throw InputError("manifest: groups must be >= 1");
  } else if (split_mode == SplitMode::kSynthetic) {
    throw InputError("manifest: split mode 'synthetic' needs a synthetic recipe with clients_per_group > 0");
  }
  if (split_mode != SplitMode::kSynthetic && clients < 1) throw InputError("manifest: split n must be >= 1");
  if (methods.empty()) throw InputError("manifest: no methods");
  if (seeds.empty()) throw InputError("manifest: no seeds");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw InputError("manifest: seeds must be distinct");
  }
  config.validate();
  std::error_code ec;
  fs::create_directories(output, ec);
  if (ec || !fs::is_directory(output)) throw InputError("output directory not writable: " + output.string());
}

void apply_override(FedConfig& c, const std::string& key, const json& v) {
  if (key == "method") c.method = parse_method(get_as<std::string>(v, key));
  else if (key == "rounds" || key == "T") c.rounds = get_int(v, key);
  else if (key == "local_epochs" || key == "E_t") c.local_epochs = get_int(v, key);
  else if (key == "distill_steps" || key == "E_d") c.distill_steps = get_int(v, key);
  else if (key == "lr") c.lr = get_as<double>(v, key);
  else if (key == "lr_distill" || key == "lr_d") c.lr_distill = get_as<double>(v, key);
  else if (key == "lambda") c.lambda = get_as<double>(v, key);
  else if (key == "gamma") c.gamma = get_as<double>(v, key);
  else if (key == "tau_g") c.tau_g = get_as<double>(v, key);
  else if (key == "tau") c.tau = get_as<double>(v, key);
  else if (key == "tau_s") c.tau_s = get_as<double>(v, key);
  else if (key == "distill_per_class" || key == "m") c.distill_per_class = get_int(v, key);
  else if (key == "hidden_dim") c.hidden_dim = get_int(v, key);
  else if (key == "weight_decay") c.weight_decay = get_as<double>(v, key);
  else if (key == "patience") c.patience = get_int(v, key);
  else if (key == "feature_map") c.feature_map = parse_feature_map(get_as<std::string>(v, key));
  else if (key == "soft_final_adjacency") c.soft_final_adjacency = get_as<bool>(v, key);
  else if (key == "force_uniform_q") c.force_uniform_q = get_as<bool>(v, key);
  else if (key == "workers") c.workers = get_int(v, key);
  else if (key == "relation_dump_dir") c.relation_dump_dir = get_as<std::string>(v, key);
  else throw InputError("unknown override '" + key + "'");
}

ExperimentManifest parse_manifest(const json& j) {
  if (!j.is_object()) throw InputError("manifest must be a JSON object");
  ExperimentManifest m;
  for (auto& [key, v] : j.items()) {
    if (key == "dataset") {
      m.dataset = get_as<std::string>(v, key);
    } else if (key == "synthetic") {
      SyntheticRecipe r;
      r.sbm = parse_sbm(v, r);
      m.synthetic = r;
    } else if (key == "split") {
      for (auto& [sk, sv] : v.items()) {
        if (sk == "mode") m.split_mode = parse_split_mode(get_as<std::string>(sv, sk));
        else if (sk == "n") m.clients = get_int(sv, sk);
        else if (sk == "partition_file") m.partition_file = get_as<std::string>(sv, sk);
        else throw InputError("manifest: unknown split key '" + sk + "'");
      }
    } else if (key == "method") {
      m.methods = {parse_method(get_as<std::string>(v, key))};
    } else if (key == "methods") {
      m.methods.clear();
      for (const auto& x : v) m.methods.push_back(parse_method(get_as<std::string>(x, key)));
    } else if (key == "overrides") {
      if (!v.is_object()) throw InputError("manifest: 'overrides' must be an object");
      for (auto& [ok, ov] : v.items()) apply_override(m.config, ok, ov);
    } else if (key == "seeds") {
      m.seeds.clear();
      for (const auto& x : v) m.seeds.push_back(get_as<std::uint64_t>(x, key));
    } else if (key == "seed") {
      m.seeds = {get_as<std::uint64_t>(v, key)};
    } else if (key == "output") {
      m.output = get_as<std::string>(v, key);
    } else {
      throw InputError("manifest: unknown key '" + key + "'");
    }
  }
  if (m.synthetic && m.synthetic->clients_per_group > 0 && !j.contains("split")) m.split_mode = SplitMode::kSynthetic;
  return m;
}

ExperimentManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  json j = json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw InputError("manifest " + path.string() + " is not valid JSON");
  return parse_manifest(j);
}

FederatedSplit build_split(const ExperimentManifest& m, const Graph* base, std::uint64_t seed) {
  const std::uint64_t split_seed = derive_seed(seed, Stream::kSplit);
  if (m.synthetic && m.synthetic->clients_per_group > 0) {
    const auto& r = *m.synthetic;
    FederatedSplit s;
    s.mode = SplitMode::kSynthetic;
    s.n = r.groups * r.clients_per_group;
    s.seed = seed;
    for (int g = 0; g < r.groups; ++g) {
      SbmSpec spec = r.sbm;
      spec.label_shift = r.sbm.label_shift + g;
      for (int k = 0; k < r.clients_per_group; ++k) {
        const auto client = static_cast<std::uint64_t>(g * r.clients_per_group + k);
        s.client_graphs.push_back(generate_sbm(spec, derive_seed(split_seed, {client})));
      }
    }
    return s;
  }
  Graph generated;
  if (!base) {
    if (!m.synthetic) throw InputError("build_split: no dataset loaded");
    generated = generate_sbm(m.synthetic->sbm, split_seed);
    base = &generated;
  }
  if (m.split_mode == SplitMode::kOverlapping) return overlapping_split(*base, m.clients, split_seed);
  if (m.clients == 1) {
    FederatedSplit s;
    s.client_graphs.push_back(*base);
    s.node_maps.emplace_back(base->num_nodes());
    std::iota(s.node_maps[0].begin(), s.node_maps[0].end(), 0);
    s.n = 1;
    s.seed = seed;
    return s;
  }
  if (m.partition_file) {
    return split_by_parts(*base, load_partition_file(*m.partition_file, base->num_nodes()), m.clients, split_seed);
  }
  return partition(*base, m.clients, split_seed);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::vector<MethodSummary> run_experiment(const ExperimentManifest& m, bool write_files, std::ostream* log) {
  m.validate();
  std::optional<Graph> base;
  if (m.dataset) base = load_dataset(*m.dataset);

  std::vector<MethodSummary> out;
  for (Method method : m.methods) {
    MethodSummary summary;
    summary.method = method;
    FedConfig cfg = m.config;
    cfg.method = method;
    cfg.seed = 0;
    summary.config_hash = config_hash(cfg);
    for (std::uint64_t seed : m.seeds) {
      const FederatedSplit split = build_split(m, base ? &*base : nullptr, seed);
      FedConfig run_cfg = cfg;
      run_cfg.seed = seed;
      if (m.config.relation_dump_dir) run_cfg.relation_dump_dir = *m.config.relation_dump_dir / seed_tag(seed);
      SeedOutcome o{seed, run_federation(run_cfg, split)};
      if (log) {
        *log << to_string(method) << " " << seed_tag(seed) << ": best round " << o.result.best_round << ", test acc "
             << std::fixed << std::setprecision(4) << o.result.best_test_acc << std::defaultfloat << "\n";
      }
      if (write_files) {
        std::ofstream csv(m.output / (to_string(method) + "_" + seed_tag(seed) + ".csv"));
        write_round_csv_header(csv);
        const std::string hash = config_hash(run_cfg);
        for (const auto& rec : o.result.records) write_round_csv(csv, rec, hash, seed);
      }
      summary.runs.push_back(std::move(o));
    }
    std::vector<double> test, weighted, val, density;
    for (const auto& r : summary.runs) {
      test.push_back(r.result.best_test_acc);
      weighted.push_back(r.result.best_weighted_test_acc);
      val.push_back(r.result.best_val_acc);
      density.push_back(mean_soft_density(r.result));
    }
    std::tie(summary.test_mean, summary.test_std) = mean_std(test);
    std::tie(summary.weighted_test_mean, summary.weighted_test_std) = mean_std(weighted);
    summary.val_mean = mean_std(val).first;
    summary.soft_density_mean = mean_std(density).first;
    out.push_back(std::move(summary));
  }

  if (write_files) {
    std::ofstream js(m.output / "summary.json");
    js << summary_json(m, out).dump(2) << "\n";
    std::ofstream curve(m.output / "curve.tsv");
    curve << "method\tconfig_hash\tseed\tround\tmean_test_acc\tweighted_test_acc\n";
    curve << std::setprecision(17);
    for (const auto& s : out) {
      for (const auto& r : s.runs) {
        for (const auto& rec : r.result.records) {
          curve << to_string(s.method) << '\t' << s.config_hash << '\t' << r.seed << '\t' << rec.round << '\t'
                << rec.mean_test_acc << '\t' << rec.weighted_test_acc << '\n';
        }
      }
    }
  }
  return out;
}

nlohmann::ordered_json summary_json(const ExperimentManifest& m, const std::vector<MethodSummary>& summaries) {
  nlohmann::ordered_json j;
  j["seeds"] = m.seeds;
  const int n = m.synthetic && m.synthetic->clients_per_group > 0
                    ? m.synthetic->groups * m.synthetic->clients_per_group
                    : m.clients;
  j["split"] = {{"mode", to_string(m.split_mode)}, {"n", n}};
  j["methods"] = nlohmann::ordered_json::object();
  for (const auto& s : summaries) {
    nlohmann::ordered_json runs = nlohmann::ordered_json::array();
    for (const auto& r : s.runs) {
      runs.push_back({{"seed", r.seed},
                      {"best_round", r.result.best_round},
                      {"rounds_run", r.result.records.size()},
                      {"early_stopped", r.result.early_stopped},
                      {"val_acc", r.result.best_val_acc},
                      {"test_acc", r.result.best_test_acc},
                      {"weighted_test_acc", r.result.best_weighted_test_acc}});
    }
    j["methods"][to_string(s.method)] = {{"config_hash", s.config_hash},
                                         {"test_acc_mean", s.test_mean},
                                         {"test_acc_std", s.test_std},
                                         {"weighted_test_acc_mean", s.weighted_test_mean},
                                         {"weighted_test_acc_std", s.weighted_test_std},
                                         {"val_acc_mean", s.val_mean},
                                         {"soft_density_mean", s.soft_density_mean},
                                         {"runs", runs}};
  }
  return j;
}

GridSpec default_grid() {
  return {{"lr", {0.005, 0.01}},
          {"E_t", {1, 3, 5, 7}},
          {"gamma", {0.001, 0.75, 1.5, 2.5, 5.0}},
          {"tau_s", {1, 3, 5, 7, 9}},
          {"tau", {0.05, 0.1, 0.25, 0.5, 0.75, 1.0}},
          {"lambda", {1e-5, 1e-3}}};
}

GridSpec parse_grid(const json& j) {
  if (!j.is_object()) throw InputError("grid spec must be a JSON object of key -> list");
  GridSpec g;
  for (auto& [key, v] : j.items()) {
    if (std::find(grid_keys().begin(), grid_keys().end(), key) == grid_keys().end()) {
      throw InputError("unknown grid key '" + key + "' (allowed: lr, E_t, gamma, tau_s, tau, lambda)");
    }
    std::vector<double> values;
    if (v.is_array()) {
      for (const auto& x : v) values.push_back(get_as<double>(x, key));
    } else {
      values.push_back(get_as<double>(v, key));
    }
    if (values.empty()) throw InputError("grid key '" + key + "' has no values");
    g[key] = values;
  }
  return g;
}

std::vector<GridRow> run_grid(const ExperimentManifest& m, const GridSpec& grid, int jobs, std::ostream* log) {
  m.validate();
  for (const auto& [key, values] : grid) {
    if (std::find(grid_keys().begin(), grid_keys().end(), key) == grid_keys().end()) {
      throw InputError("unknown grid key '" + key + "'");
    }
  }
  std::optional<Graph> base;
  if (m.dataset) base = load_dataset(*m.dataset);
  std::vector<FederatedSplit> splits;
  for (std::uint64_t seed : m.seeds) splits.push_back(build_split(m, base ? &*base : nullptr, seed));

  // Cartesian product in key order, last key varying fastest.
  std::vector<std::map<std::string, double>> cells{{}};
  for (const auto& [key, values] : grid) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& cell : cells) {
      for (double v : values) {
        auto c = cell;
        c[key] = v;
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }

  std::vector<GridRow> rows(cells.size());
  std::mutex log_mu;
  parallel_for(static_cast<int>(cells.size()), jobs, [&](int i) {
    FedConfig cfg = m.config;
    cfg.method = m.methods.front();
    cfg.relation_dump_dir.reset();
    for (const auto& [key, v] : cells[i]) {
      if (key == "E_t") {
        apply_override(cfg, key, static_cast<int>(std::lround(v)));
      } else {
        apply_override(cfg, key, v);
      }
    }
    cfg.validate();
    std::vector<double> val, test, density;
    for (std::size_t s = 0; s < m.seeds.size(); ++s) {
      cfg.seed = m.seeds[s];
      auto r = run_federation(cfg, splits[s]);
      val.push_back(r.best_val_acc);
      test.push_back(r.best_test_acc);
      density.push_back(mean_soft_density(r));
    }
    cfg.seed = 0;
    GridRow& row = rows[i];
    row.values = cells[i];
    row.config_hash = config_hash(cfg);
    row.val_mean = mean_std(val).first;
    std::tie(row.test_mean, row.test_std) = mean_std(test);
    row.soft_density = mean_std(density).first;
    if (log) {
      std::lock_guard lock(log_mu);
      *log << "cell " << i + 1 << "/" << cells.size() << ":";
      for (const auto& [key, v] : row.values) *log << " " << key << "=" << v;
      *log << " val=" << row.val_mean << " density=" << row.soft_density << "\n";
    }
  });
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) { return a.val_mean > b.val_mean; });
  return rows;
}

void write_grid_csv(std::ostream& os, const std::vector<GridRow>& rows, const std::vector<std::uint64_t>& seeds) {
  std::string seed_list;
  for (std::size_t i = 0; i < seeds.size(); ++i) seed_list += (i ? ";" : "") + std::to_string(seeds[i]);
  os << "rank,config_hash,seeds";
  if (!rows.empty()) {
    for (const auto& [key, v] : rows.front().values) os << ',' << key;
  }
  os << ",val_acc_mean,test_acc_mean,test_acc_std,soft_density\n";
  os << std::setprecision(10);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << r + 1 << ',' << rows[r].config_hash << ',' << seed_list;
    for (const auto& [key, v] : rows[r].values) os << ',' << v;
    os << ',' << rows[r].val_mean << ',' << rows[r].test_mean << ',' << rows[r].test_std << ','
       << rows[r].soft_density << '\n';
  }
}

// ---- dataset conversion ---------------------------------------------------

SourceFormat parse_source_format(const std::string& s) {
  if (s == "planetoid-raw") return SourceFormat::kPlanetoidRaw;
  if (s == "edge-list") return SourceFormat::kEdgeList;
  throw InputError("unknown source format '" + s + "' (expected planetoid-raw, edge-list)");
}

namespace {

struct RawNode {
  std::string id;
  std::string label;
  std::vector<double> features;
};

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

double parse_real(const std::string& tok, const std::string& where) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) throw InputError(where + ": bad number '" + tok + "'");
  return v;
}

fs::path find_one(const fs::path& dir, const std::string& ext) {
  std::vector<fs::path> hits;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ext) hits.push_back(e.path());
  }
  if (hits.size() != 1) throw InputError("expected exactly one *" + ext + " file in " + dir.string());
  return hits.front();
}

Graph assemble(const std::vector<RawNode>& nodes, const std::vector<std::pair<std::string, std::string>>& raw_edges,
               std::uint64_t seed, bool largest_component) {
  if (nodes.empty()) throw InputError("no nodes found");
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!index.emplace(nodes[i].id, static_cast<int>(i)).second) throw InputError("duplicate node id " + nodes[i].id);
    if (nodes[i].features.size() != nodes.front().features.size()) {
      throw InputError("node " + nodes[i].id + " has a different feature count");
    }
  }
  // Integer labels sort numerically, anything else lexicographically.
  std::vector<std::string> classes;
  for (const auto& n : nodes) classes.push_back(n.label);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  const bool numeric = std::all_of(classes.begin(), classes.end(), [](const std::string& s) {
    long v;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc() && p == s.data() + s.size();
  });
  if (numeric) {
    std::sort(classes.begin(), classes.end(), [](const std::string& a, const std::string& b) { return std::stol(a) < std::stol(b); });
  }
  std::unordered_map<std::string, int> class_of;
  for (std::size_t c = 0; c < classes.size(); ++c) class_of[classes[c]] = static_cast<int>(c);

  std::vector<Edge> edges;
  for (const auto& [a, b] : raw_edges) {
    auto ia = index.find(a), ib = index.find(b);
    if (ia == index.end() || ib == index.end()) continue;  // dangling citation
    edges.emplace_back(ia->second, ib->second);
  }
  edges = canonical_edges(std::move(edges));

  std::vector<int> keep(nodes.size());
  std::iota(keep.begin(), keep.end(), 0);
  if (largest_component) {
    std::vector<std::vector<int>> adj(nodes.size());
    for (auto [u, v] : edges) {
      adj[u].push_back(v);
      adj[v].push_back(u);
    }
    std::vector<int> comp(nodes.size(), -1);
    int best = -1;
    std::size_t best_size = 0;
    for (std::size_t s = 0; s < nodes.size(); ++s) {
      if (comp[s] >= 0) continue;
      std::size_t size = 0;
      std::queue<int> q;
      q.push(static_cast<int>(s));
      comp[s] = static_cast<int>(s);
      while (!q.empty()) {
        int u = q.front();
        q.pop();
        ++size;
        for (int v : adj[u]) {
          if (comp[v] < 0) {
            comp[v] = static_cast<int>(s);
            q.push(v);
          }
        }
      }
      if (size > best_size) {
        best_size = size;
        best = static_cast<int>(s);
      }
    }
    keep.clear();
    for (std::size_t i = 0; i < nodes.size(); ++i)
      if (comp[i] == best) keep.push_back(static_cast<int>(i));
  }

  std::vector<int> local(nodes.size(), -1);
  for (std::size_t i = 0; i < keep.size(); ++i) local[keep[i]] = static_cast<int>(i);
  const int n = static_cast<int>(keep.size());
  const int D = static_cast<int>(nodes.front().features.size());
  Matrix x(n, D);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    const auto& node = nodes[keep[i]];
    for (int j = 0; j < D; ++j) x(i, j) = node.features[j];
    y[i] = class_of[node.label];
  }
  std::vector<Edge> kept;
  for (auto [u, v] : edges)
    if (local[u] >= 0 && local[v] >= 0) kept.emplace_back(local[u], local[v]);
  return Graph(n, std::move(kept), std::move(x), std::move(y), static_cast<int>(classes.size()),
               random_masks(n, 0.3, 0.35, 0.35, seed));
}

std::vector<std::pair<std::string, std::string>> read_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    auto t = tokens(line);
    if (t.empty() || t[0][0] == '#') continue;
    if (t.size() != 2) throw InputError(path.filename().string() + ":" + std::to_string(lineno) + ": expected two ids");
    out.emplace_back(t[0], t[1]);
  }
  return out;
}

}  // namespace

Graph convert_dataset(SourceFormat format, const fs::path& src, std::uint64_t seed, bool largest_component) {
  if (!fs::is_directory(src)) throw InputError("source directory not found: " + src.string());
  std::vector<RawNode> nodes;
  fs::path node_file, edge_file;
  if (format == SourceFormat::kPlanetoidRaw) {
    node_file = find_one(src, ".content");
    edge_file = find_one(src, ".cites");
  } else {
    node_file = src / "nodes.txt";
    edge_file = src / "edges.txt";
  }
  std::ifstream in(node_file);
  if (!in) throw InputError("cannot open " + node_file.string());
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    auto t = tokens(line);
    if (t.empty() || t[0][0] == '#') continue;
    const std::string where = node_file.filename().string() + ":" + std::to_string(lineno);
    if (t.size() < 3) throw InputError(where + ": expected an id, a label and at least one feature");
    RawNode n;
    n.id = t[0];
    if (format == SourceFormat::kPlanetoidRaw) {
      n.label = t.back();
      for (std::size_t k = 1; k + 1 < t.size(); ++k) n.features.push_back(parse_real(t[k], where));
    } else {
      n.label = t[1];
      for (std::size_t k = 2; k < t.size(); ++k) n.features.push_back(parse_real(t[k], where));
    }
    nodes.push_back(std::move(n));
  }
  return assemble(nodes, read_pairs(edge_file), seed, largest_component);
}

}  // namespace fedgkd
