#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedgkd/graph.hpp"
#include "fedgkd/model.hpp"
#include "fedgkd/rng.hpp"

namespace fedgkd {

/// Server-broadcast starting point of every client's synthetic graph.
struct DistillInit {
  Matrix X0;               // (m C) x D, i.i.d. N(0, 1)
  std::vector<int> y0;     // m nodes per class, class-block order
  std::uint64_t seed = 0;

  int num_nodes() const { return static_cast<int>(X0.rows()); }
  std::size_t wire_bytes() const;
};

DistillInit server_init_distill(int m, int num_classes, int feature_dim, std::uint64_t seed);

struct DistilledGraph {
  Matrix Xs;        // (m C) x D
  Matrix y_logits;  // (m C) x C, soft labels are softmax(y_logits)
  double gamma = 1.0;
  double tau_g = 1.0;

  Matrix soft_labels() const { return softmax(y_logits); }
};

enum class FeatureMap { kXH, kX, kH, kYSoft };

FeatureMap parse_feature_map(const std::string& s);
std::string to_string(FeatureMap f);

struct TaskFeature {
  Matrix M;
  int client_id = 0;
  int round = 0;

  /// client_id, round, rows, cols as uint32 LE, then row-major float64 LE.
  std::string serialize() const;
  static TaskFeature deserialize(const std::string& bytes);
  std::size_t wire_bytes() const { return 16 + 8 * static_cast<std::size_t>(M.size()); }
};

/// One relaxed draw of the synthetic adjacency. `soft` holds p_uv, `hard`
/// holds 1[p_uv > 0.5]; both symmetric with zero diagonal. `logit` keeps
/// the pre-sigmoid value (<x_u, x_v> - gamma + w - w') / tau_g.
struct AdjacencySample {
  Matrix hard;
  Matrix soft;
  Matrix logit;

  /// Mean soft probability over off-diagonal pairs.
  double soft_density() const;
  double hard_density() const;
};

/// One (w, w') pair of standard Gumbels per unordered node pair, drawn in
/// row-major upper-triangle order. Throws InputError unless tau_g > 0.
AdjacencySample sample_soft_adjacency(const Matrix& Xs, double gamma, double tau_g, Rng& rng);

/// Chains d loss / d hard through the straight-through estimator
/// (d hard ~ d soft) into d loss / d Xs.
Matrix straight_through_backward(const AdjacencySample& sample, const Matrix& Xs,
                                 const Matrix& d_hard, double tau_g);

struct DistillConfig {
  int steps = 10;  // E_d
  double lr = 0.01;
  double gamma = 1.5;
  double tau_g = 1.0;
  FeatureMap feature_map = FeatureMap::kXH;
  // Use the soft expectation instead of a hard draw for the final H pass.
  bool soft_final_adjacency = false;
  // Noise seed for the final adjacency draw. The runtime shares one per
  // round across clients; defaults to a stream derived from the call seed.
  std::optional<std::uint64_t> final_sample_seed;
};

struct DistillOutcome {
  DistilledGraph graph;
  TaskFeature feature;
  std::vector<double> losses;          // loss before each update step
  std::vector<double> soft_densities;  // per sampled adjacency, incl. the final one
};

/// Dynamic distillation against frozen `params`: E_d Adam steps on
/// (Xs, y_logits) minimizing soft CE of the model's predictions on the
/// sampled synthetic graph. Throws NumericError on a non-finite loss.
DistillOutcome distill_round(const DistillInit& init, const ModelParams& params,
                             const DistillConfig& config, std::uint64_t seed, int client_id = 0,
                             int round = 0);

}  // namespace fedgkd
