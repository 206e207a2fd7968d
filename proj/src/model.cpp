#include "fedgkd/model.hpp"

#include <cmath>

#include "fedgkd/error.hpp"
#include "fedgkd/rng.hpp"

namespace fedgkd {

ModelParams::ModelParams(int input_dim, int hidden_dim, int num_classes)
    : W1(Matrix::Zero(input_dim, hidden_dim)),
      W2(Matrix::Zero(hidden_dim, hidden_dim)),
      W_out(Matrix::Zero(hidden_dim, num_classes)),
      b_out(Vector::Zero(num_classes)) {}

ModelParams ModelParams::glorot(int input_dim, int hidden_dim, int num_classes, std::uint64_t seed) {
  ModelParams p(input_dim, hidden_dim, num_classes);
  Rng rng(seed);
  auto fill = [&](Matrix& w) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> dist(-a, a);
    for (Eigen::Index j = 0; j < w.cols(); ++j)
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = dist(rng);
  };
  fill(p.W1);
  fill(p.W2);
  fill(p.W_out);
  return p;
}

std::size_t ModelParams::size() const {
  return static_cast<std::size_t>(W1.size() + W2.size() + W_out.size() + b_out.size());
}

bool ModelParams::same_shape(const ModelParams& o) const {
  return W1.rows() == o.W1.rows() && W1.cols() == o.W1.cols() && W2.rows() == o.W2.rows() &&
         W2.cols() == o.W2.cols() && W_out.rows() == o.W_out.rows() && W_out.cols() == o.W_out.cols() &&
         b_out.size() == o.b_out.size();
}

bool ModelParams::all_finite() const {
  return W1.allFinite() && W2.allFinite() && W_out.allFinite() && b_out.allFinite();
}

Vector ModelParams::flatten() const {
  Vector v(static_cast<Eigen::Index>(size()));
  Eigen::Index at = 0;
  auto put = [&](const auto& m) {
    v.segment(at, m.size()) = Eigen::Map<const Vector>(m.data(), m.size());
    at += m.size();
  };
  put(W1);
  put(W2);
  put(W_out);
  put(b_out);
  return v;
}

void ModelParams::unflatten(const Vector& v) {
  if (static_cast<std::size_t>(v.size()) != size()) {
    throw InputError("unflatten: expected " + std::to_string(size()) + " values, got " + std::to_string(v.size()));
  }
  Eigen::Index at = 0;
  auto take = [&](auto& m) {
    Eigen::Map<Vector>(m.data(), m.size()) = v.segment(at, m.size());
    at += m.size();
  };
  take(W1);
  take(W2);
  take(W_out);
  take(b_out);
}

ModelParams& ModelParams::operator+=(const ModelParams& o) {
  W1 += o.W1;
  W2 += o.W2;
  W_out += o.W_out;
  b_out += o.b_out;
  return *this;
}

ModelParams& ModelParams::operator*=(double s) {
  W1 *= s;
  W2 *= s;
  W_out *= s;
  b_out *= s;
  return *this;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  return a.same_shape(b) && a.W1 == b.W1 && a.W2 == b.W2 && a.W_out == b.W_out && a.b_out == b.b_out;
}

double squared_distance(const ModelParams& a, const ModelParams& b) {
  return (a.W1 - b.W1).squaredNorm() + (a.W2 - b.W2).squaredNorm() + (a.W_out - b.W_out).squaredNorm() +
         (a.b_out - b.b_out).squaredNorm();
}

Matrix normalize_dense(const Matrix& P, Vector* degree_out) {
  if (P.rows() != P.cols()) throw InputError("dense adjacency must be square");
  Matrix Pt = P;
  Pt.diagonal().array() += 1.0;
  Vector deg = Pt.rowwise().sum();
  if ((deg.array() <= 0.0).any()) throw NumericError("dense adjacency has a non-positive degree");
  Vector s = deg.array().rsqrt();
  Matrix A = s.asDiagonal() * Pt * s.asDiagonal();
  if (degree_out) *degree_out = std::move(deg);
  return A;
}

namespace {

void check_shapes(const ModelParams& params, Eigen::Index nodes, const Matrix& X) {
  if (X.cols() != params.W1.rows()) {
    throw InputError("feature dimension " + std::to_string(X.cols()) + " does not match W1 rows " +
                     std::to_string(params.W1.rows()));
  }
  if (X.rows() != nodes) {
    throw InputError("feature rows " + std::to_string(X.rows()) + " do not match adjacency size " +
                     std::to_string(nodes));
  }
  if (params.W2.rows() != params.W1.cols() || params.W_out.rows() != params.W2.cols() ||
      params.b_out.size() != params.W_out.cols()) {
    throw InputError("inconsistent parameter shapes");
  }
}

template <typename Adj>
void propagate(ForwardTrace& t, const ModelParams& params, const Adj& A, const Matrix& X) {
  t.AX = A * X;
  t.Z1 = t.AX * params.W1;
  t.A1 = t.Z1.cwiseMax(0.0);
  t.AA1 = A * t.A1;
  t.Z2 = t.AA1 * params.W2;
  t.H = t.Z2.cwiseMax(0.0);
  t.logits = (t.H * params.W_out).rowwise() + params.b_out.transpose();
}

}  // namespace

ForwardTrace forward(const ModelParams& params, const NormalizedAdjacency& adj, const Matrix& X) {
  check_shapes(params, adj.matrix.rows(), X);
  ForwardTrace t;
  t.adjacency = &adj;
  propagate(t, params, adj.matrix, X);
  return t;
}

ForwardTrace forward(const ModelParams& params, const DenseAdjacency& adj, const Matrix& X) {
  check_shapes(params, adj.P.rows(), X);
  ForwardTrace t;
  t.adjacency = &adj;
  t.A_hat = normalize_dense(adj.P, &t.degree);
  propagate(t, params, t.A_hat, X);
  return t;
}

Matrix log_softmax(const Matrix& logits) {
  Vector mx = logits.rowwise().maxCoeff();
  Matrix shifted = logits.colwise() - mx;
  Vector lse = shifted.array().exp().rowwise().sum().log();
  return shifted.colwise() - lse;
}

Matrix softmax(const Matrix& logits) { return log_softmax(logits).array().exp(); }

LossResult loss_ce(const Matrix& logits, const std::vector<int>& targets, const std::vector<bool>& mask) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows() ||
      static_cast<Eigen::Index>(mask.size()) != logits.rows()) {
    throw InputError("loss_ce: targets/mask length mismatch");
  }
  int count = 0;
  for (bool b : mask) count += b;
  if (count == 0) throw InputError("loss_ce: empty mask");
  const Matrix lsm = log_softmax(logits);
  LossResult r;
  r.dlogits = Matrix::Zero(logits.rows(), logits.cols());
  const double inv = 1.0 / count;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    const int y = targets[i];
    if (y < 0 || y >= logits.cols()) throw InputError("loss_ce: target outside [0, C)");
    r.value -= lsm(i, y);
    r.dlogits.row(i) = lsm.row(i).array().exp() * inv;
    r.dlogits(i, y) -= inv;
  }
  r.value *= inv;
  return r;
}

LossResult loss_ce_soft(const Matrix& logits, const Matrix& target_probs) {
  if (target_probs.rows() != logits.rows() || target_probs.cols() != logits.cols()) {
    throw InputError("loss_ce_soft: shape mismatch");
  }
  if (logits.rows() == 0) throw InputError("loss_ce_soft: no rows");
  if ((target_probs.array() < 0.0).any()) throw InputError("loss_ce_soft: negative target probability");
  Vector sums = target_probs.rowwise().sum();
  if (((sums.array() - 1.0).abs() > 1e-6).any()) throw InputError("loss_ce_soft: target rows must sum to 1");

  const double inv = 1.0 / static_cast<double>(logits.rows());
  const Matrix lsm = log_softmax(logits);
  LossResult r;
  r.value = -(target_probs.array() * lsm.array()).sum() * inv;
  // d/dz of -sum p log softmax(z) = softmax(z) * sum(p) - p.
  r.dlogits = (lsm.array().exp().colwise() * sums.array() - target_probs.array()) * inv;
  r.dtargets = -lsm * inv;
  return r;
}

double ProximalTerm::value(const ModelParams& params) const {
  if (lambda == 0.0 || anchor == nullptr) return 0.0;
  return lambda * squared_distance(params, *anchor);
}

Gradients backward(const ForwardTrace& t, const ModelParams& params, const Matrix& X, const Matrix& dlogits,
                   const ProximalTerm& prox, BackwardRequest request) {
  const bool dense = std::holds_alternative<const DenseAdjacency*>(t.adjacency);
  if (request.adjacency && !dense) throw InputError("adjacency gradient needs a dense adjacency");

  auto A_mul = [&](const Matrix& m) -> Matrix {
    // A_hat is symmetric on the sparse path; the dense path may not be.
    if (dense) return t.A_hat.transpose() * m;
    return std::get<const NormalizedAdjacency*>(t.adjacency)->matrix.transpose() * m;
  };

  Gradients g;
  g.params.W_out = t.H.transpose() * dlogits;
  g.params.b_out = dlogits.colwise().sum().transpose();
  Matrix dZ2 = (dlogits * params.W_out.transpose()).cwiseProduct((t.Z2.array() > 0.0).cast<double>().matrix());
  g.params.W2 = t.AA1.transpose() * dZ2;
  Matrix dAA1 = dZ2 * params.W2.transpose();
  Matrix dZ1 = A_mul(dAA1).cwiseProduct((t.Z1.array() > 0.0).cast<double>().matrix());
  g.params.W1 = t.AX.transpose() * dZ1;
  Matrix dAX = dZ1 * params.W1.transpose();

  if (request.input) g.dX = A_mul(dAX);

  if (request.adjacency) {
    // A_hat = diag(s) (P + I) diag(s), s_i = deg_i^{-1/2}, deg = rowsum(P + I).
    Matrix dA = dAA1 * t.A1.transpose() + dAX * X.transpose();
    const Vector s = t.degree.array().rsqrt();
    Matrix dP = s.asDiagonal() * dA * s.asDiagonal();
    const Matrix GA = dA.cwiseProduct(t.A_hat);
    const Vector ddeg = -0.5 * (GA.rowwise().sum() + GA.colwise().sum().transpose()).array() /
                        t.degree.array();
    dP.colwise() += ddeg;
    g.dP = std::move(dP);
  }

  if (prox.lambda != 0.0 && prox.anchor != nullptr) {
    if (!params.same_shape(*prox.anchor)) throw InputError("proximal anchor shape mismatch");
    const double c = 2.0 * prox.lambda;
    g.params.W1 += c * (params.W1 - prox.anchor->W1);
    g.params.W2 += c * (params.W2 - prox.anchor->W2);
    g.params.W_out += c * (params.W_out - prox.anchor->W_out);
    g.params.b_out += c * (params.b_out - prox.anchor->b_out);
  }
  return g;
}

double accuracy(const Matrix& logits, const std::vector<int>& labels, const std::vector<bool>& mask) {
  int total = 0, correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (!mask[i]) continue;
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    ++total;
    correct += static_cast<int>(arg) == labels[i];
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

}  // namespace fedgkd
