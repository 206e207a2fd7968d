#include "fedgkd/relator.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include <Eigen/Eigenvalues>

#include "fedgkd/error.hpp"

namespace fedgkd {

double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b) {
  const Vector da = a.array() - a.mean();
  const Vector db = b.array() - b.mean();
  const double va = da.squaredNorm(), vb = db.squaredNorm();
  if (va == 0.0 || vb == 0.0) return 0.0;
  const double r = da.dot(db) / std::sqrt(va * vb);
  return std::clamp(r, -1.0, 1.0);
}

RelationMatrix compute_relations(const std::vector<TaskFeature>& features) {
  const int n = static_cast<int>(features.size());
  if (n == 0) throw InputError("compute_relations: no task features");
  const auto rows = features.front().M.rows(), cols = features.front().M.cols();
  if (rows < 2) throw InputError("compute_relations: task features need at least 2 rows");
  for (const auto& f : features) {
    if (f.M.rows() != rows || f.M.cols() != cols) throw InputError("compute_relations: task feature shape mismatch");
    if (f.round != features.front().round) throw InputError("compute_relations: task features from different rounds");
  }

  // Center and scale every column once; a constant column becomes all zero
  // and so contributes 0 to every dot product.
  std::vector<Matrix> z(n);
  for (int i = 0; i < n; ++i) {
    z[i] = features[i].M.rowwise() - features[i].M.colwise().mean();
    for (Eigen::Index k = 0; k < cols; ++k) {
      const double norm = z[i].col(k).norm();
      if (norm == 0.0) {
        z[i].col(k).setZero();
      } else {
        z[i].col(k) /= norm;
      }
    }
  }

  RelationMatrix out;
  out.round = features.front().round;
  out.R = Matrix::Identity(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double sum = 0.0;
      for (Eigen::Index k = 0; k < cols; ++k) sum += std::clamp(z[i].col(k).dot(z[j].col(k)), -1.0, 1.0);
      out.R(i, j) = out.R(j, i) = sum / static_cast<double>(cols);
    }
  }
  return out;
}

Matrix matrix_exp(const Matrix& R, double tau) {
  if (R.rows() != R.cols()) throw InputError("matrix_exp: matrix must be square");
  if (!R.allFinite()) throw InputError("matrix_exp: non-finite input");
  const double asym = (R - R.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8) throw InputError("matrix_exp: input is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  const Matrix sym = 0.5 * (R + R.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericError("matrix_exp: eigendecomposition failed");
  const Vector e = (tau * eig.eigenvalues()).array().exp();
  const Matrix& V = eig.eigenvectors();
  Matrix S = V * e.asDiagonal() * V.transpose();
  return 0.5 * (S + S.transpose());
}

KernelState kernelize(const Matrix& S, double tau_s) {
  if (!S.allFinite()) throw InputError("kernelize: non-finite input");
  KernelState k;
  k.S = S;
  k.tau_s = tau_s;
  const Matrix scaled = tau_s * S;
  const Vector mx = scaled.rowwise().maxCoeff();
  k.K = (scaled.colwise() - mx).array().exp();
  const Vector sums = k.K.rowwise().sum();
  k.Q = sums.cwiseInverse().asDiagonal() * k.K;
  return k;
}

KernelState relate(const RelationMatrix& relations, double tau, double tau_s) {
  KernelState k = kernelize(matrix_exp(relations.R, tau), tau_s);
  k.tau = tau;
  return k;
}

std::vector<ModelParams> aggregate(const std::vector<ModelParams>& weights, const Matrix& Q, AggregateScope scope) {
  const int n = static_cast<int>(weights.size());
  if (n == 0) throw InputError("aggregate: no client weights");
  if (Q.rows() != n || Q.cols() != n) throw InputError("aggregate: Q has wrong dimensions");
  for (const auto& w : weights) {
    if (!w.same_shape(weights.front())) throw InputError("aggregate: client parameter shapes differ");
  }
  const auto dim = static_cast<Eigen::Index>(weights.front().size());
  const auto gcn = static_cast<Eigen::Index>(weights.front().gcn_size());
  Matrix stacked(dim, n);
  for (int j = 0; j < n; ++j) stacked.col(j) = weights[j].flatten();

  std::vector<ModelParams> out(n, weights.front());
  for (int i = 0; i < n; ++i) {
    // Explicit left-to-right sum keeps the result bit-reproducible.
    Vector acc = Vector::Zero(dim);
    for (int j = 0; j < n; ++j) acc += Q(i, j) * stacked.col(j);
    if (scope == AggregateScope::kGcnOnly) acc.tail(dim - gcn) = stacked.col(i).tail(dim - gcn);
    out[i].unflatten(acc);
  }
  return out;
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out.imbue(std::locale::classic());
  out << std::setprecision(17);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << m(i, j);
    }
    out << '\n';
  }
}

void dump_relations(const RelationMatrix& relations, const KernelState& kernel, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix_csv(relations.R, dir / "R.csv");
  write_matrix_csv(kernel.S, dir / "S.csv");
  write_matrix_csv(kernel.Q, dir / "Q.csv");
}

}  // namespace fedgkd
