#pragma once

#include <filesystem>
#include <vector>

#include "fedgkd/graph.hpp"

namespace fedgkd {

// Canonical dataset directory:
//   edges.tsv     "u<TAB>v" per line, 0-based node ids (any whitespace accepted)
//   features.csv  one row of D comma-separated reals per node
//   labels.csv    one integer label per line
//   masks.csv     "train,val,test" header (optional) then 0/1 triples per node
//   meta.json     optional {"num_classes": C}; otherwise C = max label + 1
Graph load_dataset(const std::filesystem::path& dir);
void save_dataset(const Graph& g, const std::filesystem::path& dir);

/// Newline-separated part ids, one per node.
std::vector<int> load_partition_file(const std::filesystem::path& path, int num_nodes);
void save_partition_file(const std::vector<int>& parts, const std::filesystem::path& path);

}  // namespace fedgkd
