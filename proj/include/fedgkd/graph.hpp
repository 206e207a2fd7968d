#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace fedgkd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

using Edge = std::pair<int, int>;

struct Masks {
  std::vector<bool> train, val, test;
};

/// Undirected node-classification graph. Edges are stored once as (u, v)
/// with u < v, sorted, without self-loops.
class Graph {
 public:
  Graph() = default;

  /// Canonicalizes `edges` (orientation, dedup, self-loop removal) and
  /// validates every field against `num_nodes`. Throws InputError.
  Graph(int num_nodes, std::vector<Edge> edges, Matrix features, std::vector<int> labels,
        int num_classes, Masks masks);

  int num_nodes() const { return num_nodes_; }
  int num_classes() const { return num_classes_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const Masks& masks() const { return masks_; }

  std::vector<std::vector<int>> adjacency_lists() const;

  /// Subgraph induced by `nodes` (global ids, in the given order).
  Graph induced(const std::vector<int>& nodes) const;

 private:
  int num_nodes_ = 0;
  int num_classes_ = 0;
  std::vector<Edge> edges_;
  Matrix features_;
  std::vector<int> labels_;
  Masks masks_;
};

/// Sorted unique (u < v) edges with self-loops dropped.
std::vector<Edge> canonical_edges(std::vector<Edge> edges);

/// D^{-1/2} (A + I) D^{-1/2} in CSR form.
struct NormalizedAdjacency {
  SparseMatrix matrix;
  int size() const { return static_cast<int>(matrix.rows()); }
};

NormalizedAdjacency normalize(const Graph& g);

/// Draws train/val/test membership independently per node with the given
/// ratios (remaining mass, if any, is left unassigned).
Masks random_masks(int num_nodes, double train, double val, double test, std::uint64_t seed);

enum class SplitMode { kNonOverlapping, kOverlapping, kSynthetic };

std::string to_string(SplitMode mode);

struct FederatedSplit {
  std::vector<Graph> client_graphs;
  // Global node id of each local node, per client. Empty for synthetic splits.
  std::vector<std::vector<int>> node_maps;
  SplitMode mode = SplitMode::kNonOverlapping;
  int n = 0;
  std::uint64_t seed = 0;
};

}  // namespace fedgkd
