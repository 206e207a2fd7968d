#pragma once

#include <cstdint>

#include "fedgkd/graph.hpp"

namespace fedgkd {

struct SbmSpec {
  int blocks = 2;
  int nodes_per_block = 50;
  double p_in = 0.2;
  double p_out = 0.01;
  int feature_dim = 16;
  int num_classes = 2;
  // Euclidean distance between any two class means.
  double class_separation = 2.0;
  // Cyclic label shift: label = (block mod C + shift) mod C. Zero is aligned.
  int label_shift = 0;
  double train_ratio = 0.3;
  double val_ratio = 0.35;
  double test_ratio = 0.35;
};

/// Block b's nodes occupy ids [b * nodes_per_block, (b + 1) * nodes_per_block).
/// Features follow the unshifted class, so a shifted graph differs from an
/// aligned one only in its labels. Throws InputError unless p_in > p_out.
Graph generate_sbm(const SbmSpec& spec, std::uint64_t seed);

/// Block index of every node of a graph from generate_sbm.
std::vector<int> sbm_blocks(const SbmSpec& spec);

}  // namespace fedgkd
