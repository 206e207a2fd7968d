#pragma once

#include <cstdint>
#include <vector>

#include "fedgkd/graph.hpp"

namespace fedgkd {

/// Multilevel k-way partition: heavy-edge matching coarsening, greedy
/// graph growing at the coarsest level, boundary refinement on the way
/// back up. Every part holds at most ceil(1.1 * N / k) nodes.
/// Deterministic in (g, k, seed).
std::vector<int> multilevel_partition(const Graph& g, int k, std::uint64_t seed);

/// Number of edges whose endpoints lie in different parts.
std::size_t edge_cut(const Graph& g, const std::vector<int>& parts);

/// Builds one client graph per part id in [0, k); inter-part edges dropped.
FederatedSplit split_by_parts(const Graph& g, const std::vector<int>& parts, int k,
                              std::uint64_t seed);

/// Non-overlapping split into n clients. Requires 2 <= n <= num_nodes.
FederatedSplit partition(const Graph& g, int n, std::uint64_t seed);

/// Overlapping split: floor(n/5) parts, then 5 independent half-samples
/// (induced subgraphs) per part. Requires n to be a positive multiple of 5.
FederatedSplit overlapping_split(const Graph& g, int n, std::uint64_t seed);

}  // namespace fedgkd
