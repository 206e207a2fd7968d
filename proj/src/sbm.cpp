#include "fedgkd/sbm.hpp"

#include <cmath>

#include "fedgkd/error.hpp"
#include "fedgkd/rng.hpp"

namespace fedgkd {

std::vector<int> sbm_blocks(const SbmSpec& spec) {
  std::vector<int> blocks(static_cast<std::size_t>(spec.blocks) * spec.nodes_per_block);
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] = static_cast<int>(i) / spec.nodes_per_block;
  return blocks;
}

Graph generate_sbm(const SbmSpec& spec, std::uint64_t seed) {
  if (!(spec.p_in > spec.p_out)) throw InputError("SBM requires p_in > p_out");
  if (spec.blocks < 1 || spec.nodes_per_block < 1 || spec.num_classes < 1 || spec.feature_dim < 1) {
    throw InputError("SBM sizes must be positive");
  }
  const int n = spec.blocks * spec.nodes_per_block;
  const int C = spec.num_classes;
  const int D = spec.feature_dim;
  const auto block = sbm_blocks(spec);

  Rng edge_rng(derive_seed(seed, {0x5b1ULL}));
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      const double p = block[u] == block[v] ? spec.p_in : spec.p_out;
      if (open_uniform(edge_rng) < p) edges.emplace_back(u, v);
    }
  }

  // Class means at pairwise distance class_separation: scaled basis
  // vectors when D >= C, random unit directions otherwise.
  Rng feat_rng(derive_seed(seed, {0x5b2ULL}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix means = Matrix::Zero(C, D);
  const double scale = spec.class_separation / std::sqrt(2.0);
  if (D >= C) {
    for (int c = 0; c < C; ++c) means(c, c) = scale;
  } else {
    for (int c = 0; c < C; ++c) {
      for (int j = 0; j < D; ++j) means(c, j) = normal(feat_rng);
      means.row(c) *= scale / means.row(c).norm();
    }
  }

  Matrix x(n, D);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const int cls = block[i] % C;
    for (int j = 0; j < D; ++j) x(i, j) = means(cls, j) + normal(feat_rng);
    labels[i] = ((cls + spec.label_shift) % C + C) % C;
  }
  Masks masks = random_masks(n, spec.train_ratio, spec.val_ratio, spec.test_ratio, derive_seed(seed, {0x5b3ULL}));
  return Graph(n, std::move(edges), std::move(x), std::move(labels), C, std::move(masks));
}

}  // namespace fedgkd
