#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedgkd/graph.hpp"
#include "fedgkd/runtime.hpp"
#include "fedgkd/sbm.hpp"

namespace fedgkd {

/// SBM recipe. With clients_per_group > 0 every client gets its own graph
/// and group g uses label_shift = g; otherwise one graph is generated and
/// then split like a dataset.
struct SyntheticRecipe {
  SbmSpec sbm;
  int groups = 1;
  int clients_per_group = 0;
};

struct ExperimentManifest {
  std::optional<std::filesystem::path> dataset;
  std::optional<SyntheticRecipe> synthetic;
  SplitMode split_mode = SplitMode::kNonOverlapping;
  int clients = 5;
  std::optional<std::filesystem::path> partition_file;
  std::vector<Method> methods{Method::kFedGKD};
  FedConfig config;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::filesystem::path output = "out";

  /// Throws InputError on a violated invariant.
  void validate() const;
};

/// Sets one FedConfig field from a manifest/CLI key such as "tau_s" or "E_t".
void apply_override(FedConfig& config, const std::string& key, const nlohmann::json& value);

/// Parses the manifest JSON. Relative paths resolve against the CWD.
ExperimentManifest parse_manifest(const nlohmann::json& j);
ExperimentManifest load_manifest(const std::filesystem::path& path);

/// Client graphs for one seed. `base` is the loaded dataset, if any.
FederatedSplit build_split(const ExperimentManifest& m, const Graph* base, std::uint64_t seed);

struct SeedOutcome {
  std::uint64_t seed = 0;
  FederationResult result;
};

struct MethodSummary {
  Method method = Method::kFedGKD;
  std::string config_hash;
  std::vector<SeedOutcome> runs;
  double test_mean = 0, test_std = 0;
  double weighted_test_mean = 0, weighted_test_std = 0;
  double val_mean = 0;
  double soft_density_mean = 0;  // over all recorded rounds, fedgkd only
};

/// Mean and sample standard deviation (n - 1); std is 0 for one value.
std::pair<double, double> mean_std(const std::vector<double>& v);

/// Runs every method for every seed. With write_files, emits per-seed round
/// CSVs, summary.json and curve.tsv under m.output.
std::vector<MethodSummary> run_experiment(const ExperimentManifest& m, bool write_files = true,
                                          std::ostream* log = nullptr);

nlohmann::ordered_json summary_json(const ExperimentManifest& m, const std::vector<MethodSummary>& summaries);

inline const std::vector<std::string>& grid_keys() {
  static const std::vector<std::string> keys{"lr", "E_t", "gamma", "tau_s", "tau", "lambda"};
  return keys;
}

/// Search space; every key must be one of grid_keys().
using GridSpec = std::map<std::string, std::vector<double>>;

GridSpec default_grid();
GridSpec parse_grid(const nlohmann::json& j);

struct GridRow {
  std::map<std::string, double> values;
  std::string config_hash;
  double val_mean = 0, test_mean = 0, test_std = 0, soft_density = 0;
};

/// Cartesian sweep of the manifest's first method; rows ranked by mean
/// validation accuracy (ties keep sweep order). Cells run on `jobs` threads.
std::vector<GridRow> run_grid(const ExperimentManifest& m, const GridSpec& grid, int jobs = 1,
                              std::ostream* log = nullptr);

void write_grid_csv(std::ostream& os, const std::vector<GridRow>& rows, const std::vector<std::uint64_t>& seeds);

enum class SourceFormat { kPlanetoidRaw, kEdgeList };

SourceFormat parse_source_format(const std::string& s);

/// planetoid-raw: a directory holding one *.content ("id feat... label")
/// and one *.cites ("cited citing") file. edge-list: a directory holding
/// nodes.txt ("id label feat...") and edges.txt ("id id"). Node ids may be
/// arbitrary tokens. Masks are drawn with ratios 0.3/0.35/0.35.
Graph convert_dataset(SourceFormat format, const std::filesystem::path& src, std::uint64_t seed = 0,
                      bool largest_component = false);

}  // namespace fedgkd
