#include "doctest.h"

#include <cmath>

#include "fedgkd/distiller.hpp"
#include "fedgkd/error.hpp"
#include "fedgkd/runtime.hpp"
#include "test_support.hpp"

using namespace fedgkd;
using fedgkd::testing::random_graph;
using fedgkd::testing::random_params;
using fedgkd::testing::rel_error;

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Distillation objective on a hard sample drawn from a fixed noise seed.
double hard_objective(const ModelParams& p, const Matrix& Xs, const Matrix& y_logits, double gamma,
                      double tau_g, std::uint64_t noise_seed) {
  Rng rng(noise_seed);
  auto s = sample_soft_adjacency(Xs, gamma, tau_g, rng);
  return loss_ce_soft(forward(p, DenseAdjacency{s.hard}, Xs).logits, softmax(y_logits)).value;
}

// Same objective, but forwarding the relaxed adjacency so it is smooth in Xs.
double soft_objective(const ModelParams& p, const Matrix& Xs, const Matrix& targets, double gamma,
                      double tau_g, std::uint64_t noise_seed) {
  Rng rng(noise_seed);
  auto s = sample_soft_adjacency(Xs, gamma, tau_g, rng);
  return loss_ce_soft(forward(p, DenseAdjacency{s.soft}, Xs).logits, targets).value;
}

Matrix one_hot(const std::vector<int>& y, int C) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(y.size()), C);
  for (std::size_t i = 0; i < y.size(); ++i) m(static_cast<Eigen::Index>(i), y[i]) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("server_init_distill labels and determinism") {
  auto a = server_init_distill(1, 3, 4, 5);
  CHECK(a.y0 == std::vector<int>{0, 1, 2});
  auto b = server_init_distill(2, 3, 4, 5);
  CHECK(b.y0 == std::vector<int>{0, 0, 1, 1, 2, 2});
  CHECK(b.X0.rows() == 6);
  CHECK(server_init_distill(2, 3, 4, 5).X0 == b.X0);
  CHECK_FALSE(server_init_distill(2, 3, 4, 6).X0 == b.X0);
  CHECK(b.wire_bytes() == 8 * 24 + 4 * 6);
  CHECK_THROWS_AS(server_init_distill(0, 3, 4, 5), InputError);
}

TEST_CASE("server_init_distill features are standard normal") {
  auto init = server_init_distill(50, 2, 1000, 17);
  const double n = static_cast<double>(init.X0.size());
  const double mean = init.X0.sum() / n;
  const double var = (init.X0.array() - mean).square().sum() / (n - 1);
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("sampled adjacency is symmetric, zero-diagonal and consistent") {
  Rng rng(3);
  Matrix Xs = Matrix::Random(7, 4);
  auto s = sample_soft_adjacency(Xs, 0.5, 0.7, rng);
  CHECK((s.hard - s.hard.transpose()).isZero());
  CHECK((s.soft - s.soft.transpose()).isZero());
  CHECK(s.hard.diagonal().isZero());
  CHECK(s.soft.diagonal().isZero());
  for (int u = 0; u < 7; ++u) {
    for (int v = 0; v < 7; ++v) {
      CHECK((s.hard(u, v) == 0.0 || s.hard(u, v) == 1.0));
      if (u != v) {
        CHECK(s.soft(u, v) == doctest::Approx(logistic(s.logit(u, v))).epsilon(1e-14));
        CHECK(s.hard(u, v) == (s.soft(u, v) > 0.5 ? 1.0 : 0.0));
      }
    }
  }
  Rng again(3);
  CHECK(sample_soft_adjacency(Xs, 0.5, 0.7, again).soft == s.soft);
  CHECK_THROWS_AS(sample_soft_adjacency(Xs, 0.5, 0.0, rng), InputError);
}

TEST_CASE("edge frequency follows the logistic law of the Gumbel difference") {
  // w - w' is standard logistic, so P(edge) = sigmoid(<x_u, x_v> - gamma)
  // whatever tau_g is.
  const double gamma = 1.5;
  for (double offset : {0.0, -1.0, 0.8}) {
    for (double tau_g : {1.0, 0.5}) {
      Matrix Xs(2, 1);
      const double dot = gamma + offset;
      Xs << 1.0, dot;
      Rng rng(42);
      const int draws = 40000;
      int edges = 0;
      for (int k = 0; k < draws; ++k) edges += sample_soft_adjacency(Xs, gamma, tau_g, rng).hard(0, 1) > 0.0;
      const double freq = static_cast<double>(edges) / draws;
      CHECK(std::abs(freq - logistic(offset)) < 0.01);
    }
  }
}

TEST_CASE("adjacency limits in gamma and tau_g") {
  Matrix Xs = Matrix::Random(6, 3);
  SUBCASE("very large gamma empties the graph") {
    Rng rng(1);
    auto s = sample_soft_adjacency(Xs, 1e3, 1.0, rng);
    CHECK(s.soft.maxCoeff() < 1e-100);
    CHECK(s.hard.isZero());
  }
  SUBCASE("small tau_g makes the relaxation nearly hard") {
    Rng rng(2);
    int far = 0, pairs = 0;
    for (int k = 0; k < 200; ++k) {
      auto s = sample_soft_adjacency(Xs, 0.2, 1e-6, rng);
      for (int u = 0; u < 6; ++u)
        for (int v = u + 1; v < 6; ++v, ++pairs) far += std::abs(s.soft(u, v) - s.hard(u, v)) > 1e-3;
    }
    CHECK(far < 0.01 * pairs);
  }
  SUBCASE("density decreases strictly in gamma under common noise") {
    double prev = 2.0;
    for (double gamma : {-2.0, -1.0, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0}) {
      Rng rng(9);
      const double d = sample_soft_adjacency(Xs, gamma, 1.0, rng).soft_density();
      CHECK(d < prev);
      prev = d;
    }
  }
}

TEST_CASE("straight-through chain rule matches central differences on the relaxed graph") {
  const double eps = 1e-5;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 0.5);
    Matrix Xs = Matrix::NullaryExpr(5, 3, [&] { return normal(gen); });
    ModelParams p = random_params(3, 4, 2, seed + 30);
    Matrix targets = softmax(Matrix::NullaryExpr(5, 2, [&] { return normal(gen); }));
    const double gamma = 0.3, tau_g = 0.8;
    const std::uint64_t noise = 100 + seed;

    Rng rng(noise);
    auto s = sample_soft_adjacency(Xs, gamma, tau_g, rng);
    auto trace = forward(p, DenseAdjacency{s.soft}, Xs);
    auto loss = loss_ce_soft(trace.logits, targets);
    auto grads = backward(trace, p, Xs, loss.dlogits, {}, {.input = true, .adjacency = true});
    Matrix analytic = *grads.dX + straight_through_backward(s, Xs, *grads.dP, tau_g);

    double worst = 0.0;
    for (int i = 0; i < Xs.rows(); ++i) {
      for (int j = 0; j < Xs.cols(); ++j) {
        Matrix hi = Xs, lo = Xs;
        hi(i, j) += eps;
        lo(i, j) -= eps;
        const double numeric =
            (soft_objective(p, hi, targets, gamma, tau_g, noise) - soft_objective(p, lo, targets, gamma, tau_g, noise)) /
            (2 * eps);
        worst = std::max(worst, rel_error(analytic(i, j), numeric));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("distill_round with zero steps returns the initialization") {
  auto init = server_init_distill(2, 3, 4, 8);
  ModelParams p = random_params(4, 5, 3, 1);
  DistillConfig cfg;
  cfg.steps = 0;
  auto out = distill_round(init, p, cfg, 77);
  CHECK(out.graph.Xs == init.X0);
  CHECK(out.graph.y_logits == one_hot(init.y0, 3));
  CHECK(out.losses.empty());
  CHECK(out.soft_densities.size() == 1);
  CHECK(out.feature.M.rows() == 6);
  CHECK(out.feature.M.cols() == 4 + 5);
}

TEST_CASE("distill_round does not touch params and is deterministic") {
  auto init = server_init_distill(2, 3, 4, 8);
  ModelParams p = random_params(4, 5, 3, 2);
  const ModelParams before = p;
  DistillConfig cfg;
  auto a = distill_round(init, p, cfg, 5, 1, 3);
  auto b = distill_round(init, p, cfg, 5, 1, 3);
  CHECK(p == before);
  CHECK(a.feature.M == b.feature.M);
  CHECK(a.graph.y_logits == b.graph.y_logits);
  CHECK(a.feature.client_id == 1);
  CHECK(a.feature.round == 3);
  CHECK(a.losses.size() == 10);
}

TEST_CASE("identical clients distilled with identical seeds give identical task features") {
  auto init = server_init_distill(2, 2, 3, 4);
  ModelParams p = random_params(3, 4, 2, 6);
  DistillConfig cfg;
  cfg.final_sample_seed = 99;
  auto a = distill_round(init, p, cfg, 11, 0);
  auto b = distill_round(init, p, cfg, 11, 1);
  CHECK(a.feature.M == b.feature.M);
}

TEST_CASE("distillation on a trained toy model lowers its objective under common noise") {
  int decreased = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Graph g = random_graph(30, 4, 3, 0.15, seed);
    auto adj = normalize(g);
    ModelParams start = random_params(4, 6, 3, seed + 40);
    ModelParams p = local_train(g, adj, start, start, 50, 0.01, 0.0);
    auto init = server_init_distill(2, 3, 4, seed);
    DistillConfig cfg;
    cfg.steps = 50;
    auto out = distill_round(init, p, cfg, seed + 1);
    const std::uint64_t noise = 1000 + seed;
    const double before = hard_objective(p, init.X0, one_hot(init.y0, 3), cfg.gamma, cfg.tau_g, noise);
    const double after = hard_objective(p, out.graph.Xs, out.graph.y_logits, cfg.gamma, cfg.tau_g, noise);
    decreased += after <= before;
  }
  CHECK(decreased == 10);
}

TEST_CASE("feature maps select the right blocks") {
  auto init = server_init_distill(1, 2, 3, 4);
  ModelParams p = random_params(3, 5, 2, 6);
  DistillConfig cfg;
  cfg.steps = 2;
  cfg.feature_map = FeatureMap::kXH;
  auto xh = distill_round(init, p, cfg, 1);
  cfg.feature_map = FeatureMap::kX;
  auto x = distill_round(init, p, cfg, 1);
  cfg.feature_map = FeatureMap::kH;
  auto h = distill_round(init, p, cfg, 1);
  cfg.feature_map = FeatureMap::kYSoft;
  auto y = distill_round(init, p, cfg, 1);
  CHECK(xh.feature.M.leftCols(3) == x.feature.M);
  CHECK(xh.feature.M.rightCols(5) == h.feature.M);
  CHECK(y.feature.M == y.graph.soft_labels());
  CHECK(parse_feature_map(to_string(FeatureMap::kYSoft)) == FeatureMap::kYSoft);
  CHECK_THROWS_AS(parse_feature_map("z"), InputError);
}

TEST_CASE("TaskFeature wire format round-trips") {
  TaskFeature f;
  f.client_id = 3;
  f.round = 17;
  f.M = Matrix::Random(4, 6);
  const std::string bytes = f.serialize();
  CHECK(bytes.size() == f.wire_bytes());
  CHECK(bytes.size() == 16 + 8 * 24);
  auto g = TaskFeature::deserialize(bytes);
  CHECK(g.client_id == 3);
  CHECK(g.round == 17);
  CHECK(g.M == f.M);
  CHECK_THROWS_AS(TaskFeature::deserialize(bytes.substr(0, bytes.size() - 1)), InputError);
}
