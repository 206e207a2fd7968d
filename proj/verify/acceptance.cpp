#include "acceptance.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "fedgkd/bench.hpp"
#include "fedgkd/dataset_io.hpp"
#include "fedgkd/distiller.hpp"
#include "fedgkd/error.hpp"
#include "fedgkd/model.hpp"
#include "fedgkd/relator.hpp"
#include "fedgkd/runtime.hpp"
#include "fedgkd/sbm.hpp"

namespace fs = std::filesystem;

namespace fedgkd::verify {
namespace {

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

CriterionResult timed(int id, std::string name, double budget, const std::function<bool(std::string&)>& body) {
  CriterionResult r;
  r.id = id;
  r.name = std::move(name);
  r.budget_seconds = budget;
  const auto start = std::chrono::steady_clock::now();
  bool ok = false;
  try {
    ok = body(r.detail);
  } catch (const std::exception& e) {
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  r.status = ok ? Status::kPass : Status::kFail;
  if (ok && budget > 0 && r.seconds > budget) {
    r.status = Status::kFail;
    r.detail += "; over the " + fmt(budget) + " s budget";
  }
  return r;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

Graph random_instance(std::mt19937_64& rng, int n, int D, int C) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (u(rng) < 0.4) edges.emplace_back(a, b);
  Matrix x(n, D);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < D; ++j) x(i, j) = normal(rng);
  std::vector<int> y(n);
  Masks m;
  for (int i = 0; i < n; ++i) {
    y[i] = static_cast<int>(rng() % C);
    m.train.push_back(i == 0 || u(rng) < 0.6);
    m.val.push_back(!m.train.back());
    m.test.push_back(false);
  }
  return Graph(n, std::move(edges), std::move(x), std::move(y), C, std::move(m));
}

ModelParams random_model(std::mt19937_64& rng, int D, int d, int C, double scale) {
  std::normal_distribution<double> normal(0.0, scale);
  ModelParams p(D, d, C);
  Vector v(static_cast<Eigen::Index>(p.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
  p.unflatten(v);
  return p;
}

// The two-group scenario used for heterogeneity recovery and gamma sweeps.
ExperimentManifest group_scenario(int rounds, int workers) {
  ExperimentManifest m;
  SyntheticRecipe r;
  r.sbm = SbmSpec{.blocks = 3,
                  .nodes_per_block = 40,
                  .p_in = 0.15,
                  .p_out = 0.02,
                  .feature_dim = 16,
                  .num_classes = 3,
                  .class_separation = 0.7};
  r.groups = 2;
  r.clients_per_group = 3;
  m.synthetic = r;
  m.split_mode = SplitMode::kSynthetic;
  m.config.rounds = rounds;
  m.config.hidden_dim = 64;
  m.config.distill_per_class = 20;
  m.config.workers = workers;
  m.seeds = {0, 1, 2};
  m.output = fs::temp_directory_path() / "fedgkd_acceptance_groups";
  return m;
}

std::string drop_column(const std::string& csv, const std::string& column) {
  std::istringstream in(csv);
  std::string line, out;
  int drop = -1;
  for (bool header = true; std::getline(in, line); header = false) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (header) {
      for (std::size_t i = 0; i < cells.size(); ++i)
        if (cells[i] == column) drop = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (static_cast<int>(i) == drop) continue;
      out += cells[i] + ",";
    }
    out += "\n";
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

CriterionResult check_gradients() {
  return timed(1, "gradient exactness", 10.0, [](std::string& detail) {
    const double eps = 1e-5;
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
      std::mt19937_64 rng(1000 + inst);
      const int n = 3 + static_cast<int>(rng() % 6);  // 3..8
      const int D = 2 + static_cast<int>(rng() % 5);
      const int d = 2 + static_cast<int>(rng() % 7);  // <= 8
      const int C = 2 + static_cast<int>(rng() % 3);
      Graph g = random_instance(rng, n, D, C);
      ModelParams p = random_model(rng, D, d, C, 0.6);
      ModelParams anchor = random_model(rng, D, d, C, 0.6);
      const ProximalTerm prox{1e-2, &anchor};
      const auto& mask = g.masks().train;

      // Dense, soft adjacency so that P is differentiable.
      std::uniform_real_distribution<double> u(0.05, 0.95);
      DenseAdjacency P{Matrix::Zero(n, n)};
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) P.P(a, b) = P.P(b, a) = u(rng);

      auto full_loss = [&](const ModelParams& w, const DenseAdjacency& adj, const Matrix& X) {
        return loss_ce(forward(w, adj, X).logits, g.labels(), mask).value + prox.value(w);
      };
      const Matrix& X = g.features();
      auto trace = forward(p, P, X);
      auto loss = loss_ce(trace.logits, g.labels(), mask);
      auto grads = backward(trace, p, X, loss.dlogits, prox, {.input = true, .adjacency = true});

      const Vector theta = p.flatten(), analytic = grads.params.flatten();
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        ModelParams hi = p, lo = p;
        Vector t = theta;
        t[k] += eps;
        hi.unflatten(t);
        t[k] -= 2 * eps;
        lo.unflatten(t);
        worst = std::max(worst, rel_err(analytic[k], (full_loss(hi, P, X) - full_loss(lo, P, X)) / (2 * eps)));
      }
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < D; ++j) {
          Matrix xh = X, xl = X;
          xh(i, j) += eps;
          xl(i, j) -= eps;
          worst = std::max(worst, rel_err((*grads.dX)(i, j), (full_loss(p, P, xh) - full_loss(p, P, xl)) / (2 * eps)));
        }
        for (int j = 0; j < n; ++j) {
          DenseAdjacency ph = P, pl = P;
          ph.P(i, j) += eps;
          pl.P(i, j) -= eps;
          worst = std::max(worst, rel_err((*grads.dP)(i, j), (full_loss(p, ph, X) - full_loss(p, pl, X)) / (2 * eps)));
        }
      }

      // Sparse path: parameters and X on the normalized 0/1 graph.
      const auto sparse = normalize(g);
      auto st = forward(p, sparse, X);
      auto sl = loss_ce(st.logits, g.labels(), mask);
      auto sg = backward(st, p, X, sl.dlogits, prox, {.input = true});
      auto sparse_loss = [&](const ModelParams& w, const Matrix& Xv) {
        return loss_ce(forward(w, sparse, Xv).logits, g.labels(), mask).value + prox.value(w);
      };
      const Vector sa = sg.params.flatten();
      for (Eigen::Index k = 0; k < theta.size(); ++k) {
        ModelParams hi = p, lo = p;
        Vector t = theta;
        t[k] += eps;
        hi.unflatten(t);
        t[k] -= 2 * eps;
        lo.unflatten(t);
        worst = std::max(worst, rel_err(sa[k], (sparse_loss(hi, X) - sparse_loss(lo, X)) / (2 * eps)));
      }
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < D; ++j) {
          Matrix xh = X, xl = X;
          xh(i, j) += eps;
          xl(i, j) -= eps;
          worst = std::max(worst, rel_err((*sg.dX)(i, j), (sparse_loss(p, xh) - sparse_loss(p, xl)) / (2 * eps)));
        }
      }
    }
    detail = "20 instances, max relative error " + fmt(worst, 3) + " (< 1e-4)";
    return worst < 1e-4;
  });
}

CriterionResult check_matrix_exp() {
  return timed(2, "matrix exponential vs Taylor oracle", 5.0, [](std::string& detail) {
    const std::vector<double> taus{0.05, 0.1, 0.25, 0.5, 0.75, 1.0};
    double worst = 0.0, min_eig = 1e300;
    for (int inst = 0; inst < 100; ++inst) {
      std::mt19937_64 rng(2000 + inst);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      const int n = 1 + static_cast<int>(rng() % 20);
      Matrix R(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) R(i, j) = R(j, i) = u(rng);
      for (double tau : taus) {
        const Matrix S = matrix_exp(R, tau);
        // 50-term Taylor series with plain loops.
        std::vector<double> term(n * n, 0.0), sum(n * n, 0.0), next(n * n);
        for (int i = 0; i < n; ++i) term[i * n + i] = sum[i * n + i] = 1.0;
        for (int k = 1; k < 50; ++k) {
          for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
              double acc = 0.0;
              for (int l = 0; l < n; ++l) acc += term[i * n + l] * R(l, j);
              next[i * n + j] = acc * tau / k;
            }
          }
          term.swap(next);
          for (int e = 0; e < n * n; ++e) sum[e] += term[e];
        }
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(S(i, j) - sum[i * n + j]));
        Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
        min_eig = std::min(min_eig, eig.eigenvalues().minCoeff());
      }
    }
    detail = "max |S - Taylor| " + fmt(worst, 3) + " (<= 1e-8), min eigenvalue " + fmt(min_eig, 3) + " (>= -1e-8)";
    return worst <= 1e-8 && min_eig >= -1e-8;
  });
}

CriterionResult check_gumbel_limit() {
  return timed(3, "Gumbel edge frequency", 10.0, [](std::string& detail) {
    const double gamma = 1.5, tau_g = 0.1;
    std::mt19937_64 gen(3000);
    std::normal_distribution<double> normal(0.0, 0.8);
    const int nodes = 10, draws = 100000;
    Matrix Xs = Matrix::NullaryExpr(nodes, 3, [&] { return normal(gen); });
    // Five disjoint pairs (0,1), (2,3), ... each with its own two-node graph.
    double worst = 0.0;
    for (int p = 0; p < 5; ++p) {
      Matrix pair = Xs.middleRows(2 * p, 2);
      Rng rng(derive_seed(3001, {static_cast<std::uint64_t>(p)}));
      int hits = 0;
      for (int k = 0; k < draws; ++k) hits += sample_soft_adjacency(pair, gamma, tau_g, rng).hard(0, 1) > 0.0;
      const double expected = 1.0 / (1.0 + std::exp(-(pair.row(0).dot(pair.row(1)) - gamma)));
      worst = std::max(worst, std::abs(static_cast<double>(hits) / draws - expected));
    }
    detail = "5 pairs x 1e5 draws, max |freq - sigmoid(<x_u,x_v> - gamma)| " + fmt(worst, 3) + " (< 0.01)";
    return worst < 0.01;
  });
}

CriterionResult check_fedavg_reduction() {
  return timed(4, "uniform Q reduces to FedAvg", 0.0, [](std::string& detail) {
    FederatedSplit split;
    split.mode = SplitMode::kSynthetic;
    for (int i = 0; i < 3; ++i) {
      SbmSpec spec{.blocks = 2, .nodes_per_block = 15, .p_in = 0.3, .p_out = 0.05, .feature_dim = 6, .num_classes = 2};
      split.client_graphs.push_back(generate_sbm(spec, 40 + i));
    }
    FedConfig gkd;
    gkd.method = Method::kFedGKD;
    gkd.force_uniform_q = true;
    gkd.lambda = 0.0;
    gkd.hidden_dim = 8;
    gkd.seed = 4;
    FedConfig avg = gkd;
    avg.method = Method::kFedAvg;
    auto a = init_federation(gkd, split);
    auto b = init_federation(avg, split);
    for (int t = 1; t <= 3; ++t) {
      run_round(a);
      run_round(b);
      for (std::size_t i = 0; i < a.clients.size(); ++i) {
        const Vector va = a.clients[i].anchor.flatten(), vb = b.clients[i].anchor.flatten();
        if (va.size() != vb.size() ||
            std::memcmp(va.data(), vb.data(), sizeof(double) * static_cast<std::size_t>(va.size())) != 0) {
          detail = "aggregated weights differ at round " + std::to_string(t) + ", client " + std::to_string(i);
          return false;
        }
      }
    }
    detail = "3 clients x 3 rounds, aggregated weights byte-equal";
    return true;
  });
}

CriterionResult check_heterogeneity(const AcceptanceOptions& opts) {
  return timed(5, "heterogeneity recovery on shifted-label SBM", 300.0, [&](std::string& detail) {
    ExperimentManifest m = group_scenario(30, opts.workers);
    m.methods = {Method::kFedGKD, Method::kFedAvg};
    auto res = run_experiment(m, false, opts.log);
    const auto& gkd = res[0];
    const auto& avg = res[1];
    bool relations_ok = true;
    std::string rel;
    for (const auto& run : gkd.runs) {
      const Matrix& R = run.result.final_relations->R;
      const int n = static_cast<int>(R.rows()), per = n / 2;
      double intra = 0, inter = 0;
      int ni = 0, ne = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          if (i / per == j / per) {
            intra += R(i, j);
            ++ni;
          } else {
            inter += R(i, j);
            ++ne;
          }
        }
      }
      intra /= ni;
      inter /= ne;
      relations_ok = relations_ok && intra > inter;
      rel += (rel.empty() ? "" : ", ") + fmt(intra, 3) + ">" + fmt(inter, 3);
    }
    const double gap = gkd.test_mean - avg.test_mean;
    detail = "R intra>inter per seed [" + rel + "]; test acc FedGKD " + fmt(100 * gkd.test_mean) + " vs FedAvg " +
             fmt(100 * avg.test_mean) + " (gap " + fmt(100 * gap, 3) + " >= 5 points)";
    return relations_ok && gap >= 0.05;
  });
}

CriterionResult check_cora(const AcceptanceOptions& opts) {
  std::optional<fs::path> dir = opts.cora_dir;
  if (!dir) {
    if (const char* env = std::getenv("FEDGKD_CORA_DIR"); env && *env) dir = fs::path(env);
  }
  if (!dir) {
    CriterionResult r;
    r.id = 6;
    r.name = "Cora reproduction (n=5, non-overlapping)";
    r.status = Status::kSkip;
    r.detail = "no dataset directory (set FEDGKD_CORA_DIR or pass --cora)";
    r.budget_seconds = 1800.0;
    return r;
  }
  return timed(6, "Cora reproduction (n=5, non-overlapping)", 1800.0, [&](std::string& detail) {
    ExperimentManifest m;
    m.dataset = *dir;
    m.split_mode = SplitMode::kNonOverlapping;
    m.clients = 5;
    m.seeds = {0, 1, 2};
    m.config.workers = opts.workers;
    m.output = fs::temp_directory_path() / "fedgkd_acceptance_cora";

    // Reduced selection over the search grid, by mean validation accuracy.
    m.methods = {Method::kFedGKD};
    auto gkd_rows = run_grid(m, {{"tau_s", {1, 5, 9}}, {"lambda", {1e-5, 1e-3}}}, 1, opts.log);
    m.methods = {Method::kLocal};
    auto local_rows = run_grid(m, {{"lr", {0.005, 0.01}}}, 1, opts.log);

    const double gkd_acc = gkd_rows.front().test_mean, local_acc = local_rows.front().test_mean;
    detail = "FedGKD " + fmt(100 * gkd_acc) + " +- " + fmt(100 * gkd_rows.front().test_std) + " vs Local " +
             fmt(100 * local_acc) + " +- " + fmt(100 * local_rows.front().test_std) + " (need >= 80 and >= Local)";
    return gkd_acc >= 0.80 && gkd_acc >= local_acc;
  });
}

CriterionResult check_gamma_monotone() {
  return timed(7, "soft edge density non-increasing in gamma", 120.0, [](std::string& detail) {
    std::vector<double> densities;
    for (double gamma : {0.001, 0.75, 1.5, 2.5, 5.0}) {
      ExperimentManifest m = group_scenario(5, 1);
      m.config.gamma = gamma;
      m.config.patience = 100;
      auto res = run_experiment(m, false);
      densities.push_back(res.front().soft_density_mean);
    }
    bool ok = true;
    detail = "densities";
    for (std::size_t i = 0; i < densities.size(); ++i) {
      detail += " " + fmt(densities[i], 4);
      if (i > 0 && densities[i] > densities[i - 1]) ok = false;
    }
    return ok;
  });
}

CriterionResult check_determinism() {
  return timed(8, "identical round CSVs for equal seeds", 0.0, [](std::string& detail) {
    const fs::path root = fs::temp_directory_path() / "fedgkd_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    // A dataset-backed manifest (partitioned) and a grouped synthetic one.
    SbmSpec spec{.blocks = 3, .nodes_per_block = 30, .p_in = 0.2, .p_out = 0.02, .feature_dim = 8, .num_classes = 3};
    save_dataset(generate_sbm(spec, 8), root / "data");
    const std::vector<nlohmann::json> manifests{
        {{"dataset", (root / "data").string()},
         {"split", {{"mode", "non-overlapping"}, {"n", 3}}},
         {"methods", {"fedgkd", "fedavg", "fedper"}},
         {"seeds", {1, 2}},
         {"overrides", {{"T", 4}, {"hidden_dim", 16}}}},
        {{"synthetic",
          {{"blocks", 3}, {"nodes_per_block", 20}, {"feature_dim", 8}, {"num_classes", 3}, {"groups", 2},
           {"clients_per_group", 2}}},
         {"methods", {"fedgkd", "local"}},
         {"seeds", {5}},
         {"overrides", {{"T", 4}, {"hidden_dim", 16}, {"workers", 4}}}}};
    int compared = 0;
    for (std::size_t k = 0; k < manifests.size(); ++k) {
      std::vector<fs::path> outs;
      for (int rep = 0; rep < 2; ++rep) {
        auto j = manifests[k];
        j["output"] = (root / ("m" + std::to_string(k) + "_run" + std::to_string(rep))).string();
        run_experiment(parse_manifest(j));
        outs.push_back(j["output"].get<std::string>());
      }
      for (const auto& e : fs::directory_iterator(outs[0])) {
        const auto name = e.path().filename();
        if (!fs::exists(outs[1] / name)) {
          detail = "missing " + name.string() + " in second run";
          return false;
        }
        std::string a = slurp(e.path()), b = slurp(outs[1] / name);
        if (e.path().extension() == ".csv") {
          a = drop_column(a, "wall_ms");
          b = drop_column(b, "wall_ms");
        }
        if (a != b) {
          detail = name.string() + " differs between runs";
          return false;
        }
        ++compared;
      }
    }
    detail = std::to_string(compared) + " output files identical across repeated runs (timing excluded)";
    return compared > 0;
  });
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts, const std::vector<int>& only) {
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  std::vector<CriterionResult> out;
  auto step = [&](int id, const std::function<CriterionResult()>& fn) {
    if (!wanted(id)) return;
    out.push_back(fn());
    if (opts.log) print_results(*opts.log, {out.back()});
  };
  step(1, check_gradients);
  step(2, check_matrix_exp);
  step(3, check_gumbel_limit);
  step(4, check_fedavg_reduction);
  step(5, [&] { return check_heterogeneity(opts); });
  step(6, [&] { return check_cora(opts); });
  step(7, check_gamma_monotone);
  step(8, check_determinism);
  return out;
}

void print_results(std::ostream& os, const std::vector<CriterionResult>& results) {
  for (const auto& r : results) {
    const char* tag = r.status == Status::kPass ? "PASS" : r.status == Status::kSkip ? "SKIP" : "FAIL";
    os << tag << "  [" << r.id << "] " << r.name << ": " << r.detail << " (" << std::fixed << std::setprecision(2)
       << r.seconds << " s)" << std::defaultfloat << "\n";
  }
}

int exit_code(const std::vector<CriterionResult>& results) {
  for (const auto& r : results)
    if (r.status == Status::kFail) return 1;
  return 0;
}

}  // namespace fedgkd::verify
