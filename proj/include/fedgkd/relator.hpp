#pragma once

#include <filesystem>
#include <vector>

#include "fedgkd/distiller.hpp"
#include "fedgkd/graph.hpp"
#include "fedgkd/model.hpp"

namespace fedgkd {

struct RelationMatrix {
  Matrix R;
  int round = 0;
};

/// Column-wise Pearson correlation averaged over columns. A column that is
/// constant in either operand contributes 0. Diagonal fixed at 1.
RelationMatrix compute_relations(const std::vector<TaskFeature>& features);

/// Pearson correlation of two equal-length vectors; 0 if either is constant.
double pearson(const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& b);

/// e^{tau R} for symmetric R via eigendecomposition. Throws InputError if R
/// departs from symmetry by more than 1e-8.
Matrix matrix_exp(const Matrix& R, double tau);

struct KernelState {
  Matrix S;
  Matrix K;  // e^{tau_s (S_ij - max_j S_ij)}; row-scaled kernel
  Matrix Q;  // row-stochastic aggregation weights
  double tau = 0.0;
  double tau_s = 0.0;
};

/// Row-wise softmax of tau_s S. K is stored with each row shifted by its
/// max exponent, which leaves Q unchanged.
KernelState kernelize(const Matrix& S, double tau_s);

KernelState relate(const RelationMatrix& relations, double tau, double tau_s);

enum class AggregateScope { kAll, kGcnOnly };

/// W_bar_i = sum_j Q_ij W_j, computed on flattened vectors. With kGcnOnly,
/// W_out and b_out of each output are copied from the matching input.
std::vector<ModelParams> aggregate(const std::vector<ModelParams>& weights, const Matrix& Q,
                                   AggregateScope scope = AggregateScope::kAll);

/// Writes R.csv, S.csv and Q.csv for one round into `dir`.
void dump_relations(const RelationMatrix& relations, const KernelState& kernel,
                    const std::filesystem::path& dir);

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);

}  // namespace fedgkd
