// fedgkd: command-line harness.
//
// Precedence for run/grid settings, lowest first: manifest file, the
// FEDGKD_SEED environment variable (seeds only), command-line flags.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "acceptance.hpp"
#include "fedgkd/bench.hpp"
#include "fedgkd/dataset_io.hpp"
#include "fedgkd/error.hpp"

namespace fs = std::filesystem;
using namespace fedgkd;

namespace {

constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

struct ManifestFlags {
  std::string manifest;
  std::string output;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> methods;
  std::vector<std::string> overrides;  // key=value
  int workers = 0;
};

void add_manifest_flags(CLI::App* cmd, ManifestFlags& f) {
  cmd->add_option("manifest", f.manifest, "experiment manifest (JSON)")->required();
  cmd->add_option("-o,--out", f.output, "output directory");
  cmd->add_option("--seeds", f.seeds, "seeds, replacing the manifest's")->delimiter(',');
  cmd->add_option("--methods", f.methods, "methods, replacing the manifest's")->delimiter(',');
  cmd->add_option("--set", f.overrides, "config override key=value (repeatable)");
  cmd->add_option("--workers", f.workers, "client threads per round");
}

nlohmann::json parse_value(const std::string& text) {
  auto v = nlohmann::json::parse(text, nullptr, false);
  return v.is_discarded() ? nlohmann::json(text) : v;
}

ExperimentManifest resolve_manifest(const ManifestFlags& f) {
  ExperimentManifest m = load_manifest(f.manifest);
  if (const char* env = std::getenv("FEDGKD_SEED"); env && *env) {
    try {
      m.seeds = {std::stoull(env)};
    } catch (const std::exception&) {
      throw InputError(std::string("FEDGKD_SEED is not an unsigned integer: ") + env);
    }
  }
  if (!f.seeds.empty()) m.seeds = f.seeds;
  if (!f.methods.empty()) {
    m.methods.clear();
    for (const auto& s : f.methods) m.methods.push_back(parse_method(s));
  }
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
    apply_override(m.config, kv.substr(0, eq), parse_value(kv.substr(eq + 1)));
  }
  if (f.workers > 0) m.config.workers = f.workers;
  if (!f.output.empty()) m.output = f.output;
  m.validate();
  return m;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const InputError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

int cmd_run(const ManifestFlags& f) {
  ExperimentManifest m;
  if (int rc = guarded([&] {
        m = resolve_manifest(f);
        return 0;
      })) {
    return rc;
  }
  return guarded([&] {
    try {
      auto res = run_experiment(m, true, &std::cerr);
      for (const auto& s : res) {
        std::cout << std::left << std::setw(8) << to_string(s.method) << std::right << std::fixed << std::setprecision(2)
                  << " test acc " << 100 * s.test_mean << " +- " << 100 * s.test_std << "  (node-weighted "
                  << 100 * s.weighted_test_mean << " +- " << 100 * s.weighted_test_std << ")\n";
      }
      std::cout << "wrote " << (m.output / "summary.json").string() << "\n";
      return 0;
    } catch (const InputError& e) {
      // Anything thrown past validation is a failed run, not a bad config.
      std::cerr << "runtime error: " << e.what() << "\n";
      return kRuntimeError;
    }
  });
}

int cmd_grid(const ManifestFlags& f, const std::string& grid_file, const std::vector<std::string>& grid_sets, int jobs) {
  ExperimentManifest m;
  GridSpec grid;
  if (int rc = guarded([&] {
        m = resolve_manifest(f);
        grid = default_grid();
        if (!grid_file.empty()) {
          std::ifstream in(grid_file);
          if (!in) throw InputError("cannot open grid file " + grid_file);
          grid = parse_grid(nlohmann::json::parse(in));
        }
        if (!grid_sets.empty()) {
          nlohmann::json j = nlohmann::json::object();
          for (const auto& kv : grid_sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw InputError("--grid-set expects key=v1,v2,..., got '" + kv + "'");
            j[kv.substr(0, eq)] = parse_value("[" + kv.substr(eq + 1) + "]");
          }
          if (grid_file.empty()) grid.clear();
          for (auto& [k, v] : parse_grid(j)) grid[k] = v;
        }
        return 0;
      })) {
    return rc;
  }
  return guarded([&] {
    auto rows = run_grid(m, grid, jobs, &std::cerr);
    std::ofstream csv(m.output / "grid.csv");
    write_grid_csv(csv, rows, m.seeds);
    write_grid_csv(std::cout, rows, m.seeds);
    return 0;
  });
}

int cmd_convert(const std::string& format, const std::string& src, const std::string& dst, std::uint64_t seed,
                bool lcc) {
  return guarded([&] {
    Graph g = convert_dataset(parse_source_format(format), src, seed, lcc);
    save_dataset(g, dst);
    std::cout << "wrote " << dst << ": " << g.num_nodes() << " nodes, " << g.edges().size() << " edges, "
              << g.feature_dim() << " features, " << g.num_classes() << " classes\n";
    return 0;
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized federated graph learning harness"};
  app.require_subcommand(1);

  ManifestFlags run_flags;
  auto* run = app.add_subcommand("run", "run every method and seed of a manifest");
  add_manifest_flags(run, run_flags);

  ManifestFlags grid_flags;
  std::string grid_file;
  std::vector<std::string> grid_sets;
  int jobs = 1;
  auto* grid = app.add_subcommand("grid", "grid search; ranked by mean validation accuracy");
  add_manifest_flags(grid, grid_flags);
  grid->add_option("--grid", grid_file, "grid spec JSON {key: [values]} (default: full search grid)");
  grid->add_option("--grid-set", grid_sets, "key=v1,v2,... (repeatable)");
  grid->add_option("--jobs", jobs, "grid cells run in parallel")->check(CLI::PositiveNumber);

  std::string format, src, dst;
  std::uint64_t convert_seed = 0;
  bool lcc = false;
  auto* convert = app.add_subcommand("convert", "convert a raw dataset to the canonical directory layout");
  convert->add_option("--format", format, "planetoid-raw | edge-list")->required();
  convert->add_option("src", src, "source directory")->required();
  convert->add_option("dst", dst, "destination directory")->required();
  convert->add_option("--seed", convert_seed, "mask sampling seed");
  convert->add_flag("--lcc", lcc, "keep only the largest connected component");

  verify::AcceptanceOptions vopts;
  std::string cora;
  std::vector<int> only;
  auto* ver = app.add_subcommand("verify", "run the acceptance suite");
  ver->add_option("--cora", cora, "canonical Cora dataset directory");
  ver->add_option("--only", only, "criterion ids")->delimiter(',');
  ver->add_option("--workers", vopts.workers, "client threads per round")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigError;
  }

  if (*run) return cmd_run(run_flags);
  if (*grid) return cmd_grid(grid_flags, grid_file, grid_sets, jobs);
  if (*convert) return cmd_convert(format, src, dst, convert_seed, lcc);
  if (!cora.empty()) vopts.cora_dir = cora;
  vopts.log = &std::cerr;
  auto results = verify::run_acceptance(vopts, only);
  std::cout << "\n";
  verify::print_results(std::cout, results);
  return verify::exit_code(results);
}
