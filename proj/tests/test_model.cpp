#include "doctest.h"

#include <cmath>
#include <cstring>

#include "fedgkd/adam.hpp"
#include "fedgkd/checkpoint.hpp"
#include "fedgkd/error.hpp"
#include "fedgkd/model.hpp"
#include "test_support.hpp"

using namespace fedgkd;
using fedgkd::testing::DenseOracle;
using fedgkd::testing::random_graph;
using fedgkd::testing::random_params;
using fedgkd::testing::rel_error;

namespace {

// Full objective for finite differences: masked CE + proximal term.
double objective(const ModelParams& p, const NormalizedAdjacency& adj, const Graph& g, const ProximalTerm& prox) {
  return loss_ce(forward(p, adj, g.features()).logits, g.labels(), g.masks().train).value + prox.value(p);
}

double soft_objective(const ModelParams& p, const DenseAdjacency& adj, const Matrix& X, const Matrix& targets) {
  return loss_ce_soft(forward(p, adj, X).logits, targets).value;
}

Matrix random_probs(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Matrix t(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) t(i, j) = u(rng);
    t.row(i) /= t.row(i).sum();
  }
  return t;
}

}  // namespace

TEST_CASE("forward: zero weights give bias logits") {
  Graph g = random_graph(5, 3, 2, 0.5, 1);
  auto adj = normalize(g);
  ModelParams p(3, 4, 2);
  p.b_out << 0.25, -1.5;
  auto t = forward(p, adj, g.features());
  for (int i = 0; i < 5; ++i) {
    CHECK(t.logits(i, 0) == 0.25);
    CHECK(t.logits(i, 1) == -1.5);
  }
}

TEST_CASE("forward: isolated node with identity weights echoes positive features") {
  Matrix x(1, 3);
  x << 0.5, 2.0, 1.25;
  Graph g(1, {}, x, {0}, 3, {});
  ModelParams p(3, 3, 3);
  p.W1.setIdentity();
  p.W2.setIdentity();
  p.W_out.setIdentity();
  auto t = forward(p, normalize(g), g.features());
  CHECK((t.logits - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward: sparse path matches plain-loop oracle and dense path") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Graph g = random_graph(5, 3, 3, 0.5, seed);
    ModelParams p = random_params(3, 4, 3, seed + 100);
    auto adj = normalize(g);
    auto sparse = forward(p, adj, g.features());
    auto oracle = DenseOracle::logits(p, fedgkd::testing::adjacency_01(g), g.features());
    for (int i = 0; i < 5; ++i)
      for (int c = 0; c < 3; ++c) CHECK(std::abs(sparse.logits(i, c) - oracle[i][c]) <= 1e-12);

    DenseAdjacency dense;
    dense.P = Matrix::Zero(5, 5);
    for (auto [u, v] : g.edges()) dense.P(u, v) = dense.P(v, u) = 1.0;
    auto dt = forward(p, dense, g.features());
    CHECK((dt.logits - sparse.logits).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((dt.H - sparse.H).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("forward: shape mismatch throws") {
  Graph g = random_graph(4, 3, 2, 0.5, 2);
  ModelParams p(5, 4, 2);
  CHECK_THROWS_AS(forward(p, normalize(g), g.features()), InputError);
}

TEST_CASE("loss_ce examples") {
  SUBCASE("uniform logits") {
    Matrix z = Matrix::Zero(3, 4);
    auto r = loss_ce(z, {0, 1, 3}, {true, true, true});
    CHECK(r.value == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }
  SUBCASE("huge correct logit") {
    Matrix z = Matrix::Zero(1, 3);
    z(0, 2) = 800.0;
    auto r = loss_ce(z, {2}, {true});
    CHECK(r.value < 1e-300);
    CHECK(std::isfinite(r.value));
  }
  SUBCASE("3-row hand calculation, masked") {
    Matrix z(3, 2);
    z << 1.0, 2.0,   //
        0.0, 0.0,    //
        3.0, -1.0;
    // Row 0, label 1: -log(e^2/(e^1+e^2)) = log(1 + e^-1)
    // Row 2, label 0: -log(e^3/(e^3+e^-1)) = log(1 + e^-4)
    const double expected = 0.5 * (std::log(1.0 + std::exp(-1.0)) + std::log(1.0 + std::exp(-4.0)));
    auto r = loss_ce(z, {1, 0, 0}, {true, false, true});
    CHECK(r.value == doctest::Approx(expected).epsilon(1e-14));
    CHECK(r.dlogits.row(1).isZero());
  }
  SUBCASE("errors") {
    Matrix z = Matrix::Zero(2, 2);
    CHECK_THROWS_AS(loss_ce(z, {0, 1}, {false, false}), InputError);
    CHECK_THROWS_AS(loss_ce(z, {0, 2}, {true, true}), InputError);
  }
}

TEST_CASE("loss_ce_soft examples") {
  Matrix z(2, 3);
  z << 0.3, -1.2, 2.0,  //
      1.0, 0.5, -0.5;
  SUBCASE("target equal to prediction gives its entropy") {
    Matrix t = softmax(z);
    const double entropy = -(t.array() * t.array().log()).sum() / 2.0;
    CHECK(loss_ce_soft(z, t).value == doctest::Approx(entropy).epsilon(1e-13));
  }
  SUBCASE("one-hot targets reduce to loss_ce") {
    Matrix t = Matrix::Zero(2, 3);
    t(0, 2) = 1.0;
    t(1, 0) = 1.0;
    CHECK(std::abs(loss_ce_soft(z, t).value - loss_ce(z, {2, 0}, {true, true}).value) <= 1e-12);
  }
  SUBCASE("direct formula") {
    Matrix t(2, 3);
    t << 0.2, 0.3, 0.5,  //
        0.6, 0.1, 0.3;
    double expected = 0.0;
    for (int i = 0; i < 2; ++i) {
      double lse = 0.0;
      for (int c = 0; c < 3; ++c) lse += std::exp(z(i, c));
      lse = std::log(lse);
      for (int c = 0; c < 3; ++c) expected -= t(i, c) * (z(i, c) - lse);
    }
    expected /= 2.0;
    CHECK(loss_ce_soft(z, t).value == doctest::Approx(expected).epsilon(1e-14));
  }
  SUBCASE("errors") {
    Matrix bad(2, 3);
    bad << 1.2, -0.2, 0.0,  //
        0.3, 0.3, 0.4;
    CHECK_THROWS_AS(loss_ce_soft(z, bad), InputError);
    Matrix unnorm = Matrix::Constant(2, 3, 0.5);
    CHECK_THROWS_AS(loss_ce_soft(z, unnorm), InputError);
  }
}

TEST_CASE("backward: proximal term vanishes at the anchor") {
  Graph g = random_graph(6, 3, 2, 0.4, 3);
  ModelParams p = random_params(3, 4, 2, 5);
  auto adj = normalize(g);
  auto t = forward(p, adj, g.features());
  auto loss = loss_ce(t.logits, g.labels(), g.masks().train);
  auto plain = backward(t, p, g.features(), loss.dlogits);
  auto with_self = backward(t, p, g.features(), loss.dlogits, ProximalTerm{0.7, &p});
  CHECK(plain.params == with_self.params);
  auto zero_lambda = backward(t, p, g.features(), loss.dlogits, ProximalTerm{0.0, nullptr});
  CHECK(plain.params == zero_lambda.params);
}

TEST_CASE("backward: parameter and input gradients match central differences") {
  const double eps = 1e-4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Graph g = random_graph(6, 3, 3, 0.4, seed);
    ModelParams p = random_params(3, 4, 3, seed + 50);
    ModelParams anchor = random_params(3, 4, 3, seed + 900, 0.3);
    const ProximalTerm prox{0.05, &anchor};
    auto adj = normalize(g);
    auto t = forward(p, adj, g.features());
    auto loss = loss_ce(t.logits, g.labels(), g.masks().train);
    auto grads = backward(t, p, g.features(), loss.dlogits, prox, {.input = true});

    const Vector theta = p.flatten();
    const Vector analytic = grads.params.flatten();
    double worst = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      ModelParams hi = p, lo = p;
      Vector th = theta;
      th[k] += eps;
      hi.unflatten(th);
      th[k] -= 2 * eps;
      lo.unflatten(th);
      const double numeric = (objective(hi, adj, g, prox) - objective(lo, adj, g, prox)) / (2 * eps);
      worst = std::max(worst, rel_error(analytic[k], numeric));
    }
    CHECK(worst < 1e-4);

    // Input features: the loss depends on X only through A_hat X W1.
    double worst_x = 0.0;
    for (int i = 0; i < g.num_nodes(); ++i) {
      for (int j = 0; j < g.feature_dim(); ++j) {
        Matrix xh = g.features(), xl = g.features();
        xh(i, j) += eps;
        xl(i, j) -= eps;
        const double fh = loss_ce(forward(p, adj, xh).logits, g.labels(), g.masks().train).value;
        const double fl = loss_ce(forward(p, adj, xl).logits, g.labels(), g.masks().train).value;
        worst_x = std::max(worst_x, rel_error((*grads.dX)(i, j), (fh - fl) / (2 * eps)));
      }
    }
    CHECK(worst_x < 1e-4);
  }
}

TEST_CASE("backward: dense adjacency gradient matches central differences") {
  const double eps = 1e-4;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    const int n = 4;
    DenseAdjacency adj;
    adj.P = Matrix::Zero(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) adj.P(a, b) = adj.P(b, a) = u(rng);
    Matrix X = Matrix::NullaryExpr(n, 3, [&] { return u(rng) - 0.3; });
    ModelParams p = random_params(3, 4, 2, seed + 7);
    Matrix targets = random_probs(n, 2, seed + 11);

    auto t = forward(p, adj, X);
    auto loss = loss_ce_soft(t.logits, targets);
    auto grads = backward(t, p, X, loss.dlogits, {}, {.input = true, .adjacency = true});
    double worst = 0.0;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        DenseAdjacency hi = adj, lo = adj;
        hi.P(a, b) += eps;
        lo.P(a, b) -= eps;
        const double numeric = (soft_objective(p, hi, X, targets) - soft_objective(p, lo, X, targets)) / (2 * eps);
        worst = std::max(worst, rel_error((*grads.dP)(a, b), numeric));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("backward: adjacency gradient requires the dense path") {
  Graph g = random_graph(4, 2, 2, 0.5, 1);
  ModelParams p = random_params(2, 3, 2, 1);
  auto adj = normalize(g);
  auto t = forward(p, adj, g.features());
  Matrix dl = Matrix::Ones(4, 2);
  CHECK_THROWS_AS(backward(t, p, g.features(), dl, {}, {.adjacency = true}), InputError);
}

TEST_CASE("flatten/unflatten round-trips exactly") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const int D = 1 + rng() % 6, d = 1 + rng() % 6, C = 1 + rng() % 4;
    ModelParams p(D, d, C);
    Vector v = Vector::NullaryExpr(static_cast<Eigen::Index>(p.size()),
                                   [&] { return std::ldexp(static_cast<double>(rng() >> 11), -40) - 1.0; });
    p.unflatten(v);
    CHECK(p.flatten() == v);
  }
  ModelParams p(2, 2, 2);
  CHECK_THROWS_AS(p.unflatten(Vector::Zero(3)), InputError);
}

TEST_CASE("glorot init is seeded and bounded") {
  auto a = ModelParams::glorot(10, 8, 3, 42);
  auto b = ModelParams::glorot(10, 8, 3, 42);
  CHECK(a == b);
  CHECK(a.W1.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 18.0));
  CHECK(a.b_out.isZero());
  CHECK_FALSE(a == ModelParams::glorot(10, 8, 3, 43));
}

TEST_CASE("adam: zero gradient without decay leaves params unchanged") {
  AdamState adam(AdamConfig{.lr = 0.1, .weight_decay = 0.0});
  Vector x(3);
  x << 1.0, -2.0, 0.5;
  Vector before = x;
  for (int i = 0; i < 5; ++i) adam.step(x, Vector::Zero(3));
  CHECK(x == before);
}

TEST_CASE("adam: first step moves each coordinate by about lr against the gradient sign") {
  const double lr = 0.01;
  AdamState adam(AdamConfig{.lr = lr, .weight_decay = 0.0});
  Vector x = Vector::Zero(3);
  Vector g(3);
  g << 3.0, -0.002, 1e-3;
  adam.step(x, g);
  for (int i = 0; i < 3; ++i) {
    const double expected = -lr * g[i] / (std::abs(g[i]) + 1e-8);
    CHECK(x[i] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("adam: decoupled weight decay shrinks parameters") {
  AdamState adam(AdamConfig{.lr = 0.1, .weight_decay = 0.5});
  Vector x = Vector::Constant(2, 4.0);
  adam.step(x, Vector::Zero(2));
  CHECK(x[0] == doctest::Approx(4.0 * (1.0 - 0.05)));
}

TEST_CASE("adam: quadratic bowl loss decreases monotonically") {
  // f(x) = 0.5 * sum(c_i x_i^2) with x far from the optimum.
  Vector c(3);
  c << 1.0, 4.0, 0.25;
  Vector x = Vector::Constant(3, 5.0);
  AdamState adam(AdamConfig{.lr = 0.1, .weight_decay = 0.0});
  double prev = 0.5 * (c.array() * x.array().square()).sum();
  for (int i = 0; i < 10; ++i) {
    adam.step(x, c.cwiseProduct(x));
    const double f = 0.5 * (c.array() * x.array().square()).sum();
    CHECK(f < prev);
    prev = f;
  }
}

TEST_CASE("checkpoint round-trips and detects corruption") {
  ModelParams p = random_params(4, 3, 2, 9);
  std::string bytes = encode_checkpoint(p);
  CHECK(decode_checkpoint(bytes) == p);
  const auto header_end = bytes.find('\n');
  CHECK(bytes.size() - header_end - 1 == 8 * p.size());
  bytes.back() ^= 0x01;
  CHECK_THROWS_AS(decode_checkpoint(bytes), InputError);

  auto dir = fedgkd::testing::temp_dir("ckpt");
  save_checkpoint(p, dir / "m.bin");
  CHECK(load_checkpoint(dir / "m.bin") == p);
}
