#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "fedgkd/graph.hpp"

namespace fedgkd {

/// Two GCN layers (h) followed by a linear READOUT (g).
struct ModelParams {
  Matrix W1;     // D x d
  Matrix W2;     // d x d
  Matrix W_out;  // d x C
  Vector b_out;  // C

  ModelParams() = default;
  ModelParams(int input_dim, int hidden_dim, int num_classes);

  /// Glorot-uniform weights, zero bias.
  static ModelParams glorot(int input_dim, int hidden_dim, int num_classes, std::uint64_t seed);

  int input_dim() const { return static_cast<int>(W1.rows()); }
  int hidden_dim() const { return static_cast<int>(W1.cols()); }
  int num_classes() const { return static_cast<int>(W_out.cols()); }
  std::size_t size() const;
  bool same_shape(const ModelParams& other) const;
  bool all_finite() const;

  /// Concatenation W1 | W2 | W_out | b_out, each in column-major order.
  Vector flatten() const;
  /// Inverse of flatten for a vector of exactly size() entries.
  void unflatten(const Vector& v);

  /// Number of flattened entries belonging to the GCN layers (W1, W2).
  std::size_t gcn_size() const { return static_cast<std::size_t>(W1.size() + W2.size()); }

  ModelParams& operator+=(const ModelParams& o);
  ModelParams& operator*=(double s);
  friend bool operator==(const ModelParams& a, const ModelParams& b);
};

double squared_distance(const ModelParams& a, const ModelParams& b);

/// A dense (possibly soft) adjacency with zero or arbitrary diagonal. The
/// forward pass normalizes it as D^{-1/2} (P + I) D^{-1/2}, D the row sums.
struct DenseAdjacency {
  Matrix P;
};

using Adjacency = std::variant<const NormalizedAdjacency*, const DenseAdjacency*>;

struct ForwardTrace {
  Adjacency adjacency;
  // Dense path only.
  Matrix A_hat;
  Vector degree;

  Matrix AX;      // A_hat X
  Matrix Z1;      // AX W1
  Matrix A1;      // relu(Z1)
  Matrix AA1;     // A_hat A1
  Matrix Z2;      // AA1 W2
  Matrix H;       // relu(Z2), node embeddings
  Matrix logits;  // H W_out + b_out
};

/// H = relu(A relu(A X W1) W2); logits = H W_out + b_out. The trace keeps
/// a non-owning view of the adjacency, and X must stay alive for backward.
ForwardTrace forward(const ModelParams& params, const NormalizedAdjacency& adj, const Matrix& X);
ForwardTrace forward(const ModelParams& params, const DenseAdjacency& adj, const Matrix& X);

/// Symmetric normalization of a dense adjacency with self-loops added.
Matrix normalize_dense(const Matrix& P, Vector* degree_out = nullptr);

struct LossResult {
  double value = 0.0;
  Matrix dlogits;           // d value / d logits
  std::optional<Matrix> dtargets;  // d value / d target probabilities (soft CE only)
};

/// Row-wise log-softmax with max subtraction.
Matrix log_softmax(const Matrix& logits);
Matrix softmax(const Matrix& logits);

/// Mean cross-entropy over rows where mask is true. Throws InputError on an
/// empty mask or labels outside [0, C).
LossResult loss_ce(const Matrix& logits, const std::vector<int>& targets, const std::vector<bool>& mask);

/// Mean over rows of -sum_c p_c log softmax(logits)_c. Rows of target_probs
/// must be non-negative and sum to 1 within 1e-6.
LossResult loss_ce_soft(const Matrix& logits, const Matrix& target_probs);

/// lambda * ||W - anchor||^2 over every parameter.
struct ProximalTerm {
  double lambda = 0.0;
  const ModelParams* anchor = nullptr;

  double value(const ModelParams& params) const;
};

struct BackwardRequest {
  bool input = false;      // d/dX
  bool adjacency = false;  // d/dP, dense path only
};

struct Gradients {
  ModelParams params;
  std::optional<Matrix> dX;
  std::optional<Matrix> dP;
};

/// Exact reverse-mode gradients of (loss + proximal) given dloss/dlogits.
Gradients backward(const ForwardTrace& trace, const ModelParams& params, const Matrix& X,
                   const Matrix& dlogits, const ProximalTerm& prox = {},
                   BackwardRequest request = {});

/// Fraction of masked rows whose argmax equals the label; 0 for empty masks.
double accuracy(const Matrix& logits, const std::vector<int>& labels, const std::vector<bool>& mask);

}  // namespace fedgkd
