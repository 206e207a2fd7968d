#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "fedgkd/graph.hpp"
#include "fedgkd/model.hpp"

namespace fedgkd::testing {

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("fedgkd_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  out << text;
}

/// Erdos-Renyi graph with Gaussian features, uniform labels, every node in
/// some mask.
inline Graph random_graph(int n, int D, int C, double p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      if (u(rng) < p) edges.emplace_back(a, b);
  Matrix x(n, D);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < D; ++j) x(i, j) = normal(rng);
  std::vector<int> y(n);
  Masks m;
  for (int i = 0; i < n; ++i) {
    y[i] = static_cast<int>(rng() % C);
    m.train.push_back(i % 3 == 0);
    m.val.push_back(i % 3 == 1);
    m.test.push_back(i % 3 == 2);
  }
  m.train[0] = true;
  m.val[0] = m.test[0] = false;
  return Graph(n, std::move(edges), std::move(x), std::move(y), C, std::move(m));
}

inline ModelParams random_params(int D, int d, int C, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  ModelParams p(D, d, C);
  for (auto* m : {&p.W1, &p.W2, &p.W_out})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < p.b_out.size(); ++i) p.b_out[i] = normal(rng);
  return p;
}

/// Plain-loop GCN forward used as an oracle: builds the dense normalized
/// adjacency from an explicit 0/1 (or soft) matrix and multiplies with
/// triple loops.
struct DenseOracle {
  static std::vector<std::vector<double>> matmul(const std::vector<std::vector<double>>& a,
                                                 const std::vector<std::vector<double>>& b) {
    const std::size_t n = a.size(), k = b.size(), m = b.empty() ? 0 : b[0].size();
    std::vector<std::vector<double>> c(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t l = 0; l < k; ++l)
        for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][l] * b[l][j];
    return c;
  }
  static std::vector<std::vector<double>> to_rows(const Matrix& m) {
    std::vector<std::vector<double>> r(m.rows(), std::vector<double>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) r[i][j] = m(i, j);
    return r;
  }
  static void relu(std::vector<std::vector<double>>& m) {
    for (auto& row : m)
      for (auto& v : row) v = v > 0.0 ? v : 0.0;
  }

  /// Returns logits.
  static std::vector<std::vector<double>> logits(const ModelParams& p, const std::vector<std::vector<double>>& adj,
                                                 const Matrix& X) {
    const std::size_t n = adj.size();
    std::vector<double> deg(n, 0.0);
    std::vector<std::vector<double>> a = adj;
    for (std::size_t i = 0; i < n; ++i) a[i][i] += 1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) a[i][j] /= std::sqrt(deg[i]) * std::sqrt(deg[j]);
    auto h = matmul(matmul(a, to_rows(X)), to_rows(p.W1));
    relu(h);
    h = matmul(matmul(a, h), to_rows(p.W2));
    relu(h);
    auto out = matmul(h, to_rows(p.W_out));
    for (auto& row : out)
      for (std::size_t c = 0; c < row.size(); ++c) row[c] += p.b_out[c];
    return out;
  }
};

inline std::vector<std::vector<double>> adjacency_01(const Graph& g) {
  std::vector<std::vector<double>> a(g.num_nodes(), std::vector<double>(g.num_nodes(), 0.0));
  for (auto [u, v] : g.edges()) a[u][v] = a[v][u] = 1.0;
  return a;
}

/// |a - b| / max(|a|, |b|, floor): relative error with an absolute floor for
/// entries whose true gradient is ~0.
inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

}  // namespace fedgkd::testing
