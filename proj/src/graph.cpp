#include "fedgkd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "fedgkd/error.hpp"
#include "fedgkd/rng.hpp"

namespace fedgkd {

std::vector<Edge> canonical_edges(std::vector<Edge> edges) {
  std::vector<Edge> out;
  out.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    out.emplace_back(u, v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Graph::Graph(int num_nodes, std::vector<Edge> edges, Matrix features, std::vector<int> labels,
             int num_classes, Masks masks)
    : num_nodes_(num_nodes),
      num_classes_(num_classes),
      edges_(canonical_edges(std::move(edges))),
      features_(std::move(features)),
      labels_(std::move(labels)),
      masks_(std::move(masks)) {
  if (num_nodes_ < 0) throw InputError("negative node count");
  for (const auto& [u, v] : edges_) {
    if (u < 0 || v >= num_nodes_) {
      throw InputError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                       ") out of range for " + std::to_string(num_nodes_) + " nodes");
    }
  }
  if (features_.rows() != num_nodes_) {
    throw InputError("features have " + std::to_string(features_.rows()) + " rows, expected " +
                     std::to_string(num_nodes_));
  }
  if (static_cast<int>(labels_.size()) != num_nodes_) {
    throw InputError("labels have " + std::to_string(labels_.size()) + " entries, expected " +
                     std::to_string(num_nodes_));
  }
  for (int i = 0; i < num_nodes_; ++i) {
    if (labels_[i] < 0 || labels_[i] >= num_classes_) {
      throw InputError("label " + std::to_string(labels_[i]) + " at node " + std::to_string(i) +
                       " outside [0, " + std::to_string(num_classes_) + ")");
    }
  }
  auto fix = [&](std::vector<bool>& m, const char* name) {
    if (m.empty()) m.assign(num_nodes_, false);
    if (static_cast<int>(m.size()) != num_nodes_) {
      throw InputError(std::string(name) + " mask has wrong length");
    }
  };
  fix(masks_.train, "train");
  fix(masks_.val, "val");
  fix(masks_.test, "test");
  for (int i = 0; i < num_nodes_; ++i) {
    if (int(masks_.train[i]) + int(masks_.val[i]) + int(masks_.test[i]) > 1) {
      throw InputError("masks overlap at node " + std::to_string(i));
    }
  }
  if (!features_.allFinite()) throw InputError("non-finite feature value");
}

std::vector<std::vector<int>> Graph::adjacency_lists() const {
  std::vector<std::vector<int>> adj(num_nodes_);
  for (const auto& [u, v] : edges_) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  return adj;
}

Graph Graph::induced(const std::vector<int>& nodes) const {
  std::unordered_map<int, int> local;
  local.reserve(nodes.size() * 2);
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    if (nodes[i] < 0 || nodes[i] >= num_nodes_) throw InputError("induced: node out of range");
    local.emplace(nodes[i], i);
  }
  if (local.size() != nodes.size()) throw InputError("induced: duplicate node");

  std::vector<Edge> edges;
  for (const auto& [u, v] : edges_) {
    auto iu = local.find(u), iv = local.find(v);
    if (iu != local.end() && iv != local.end()) edges.emplace_back(iu->second, iv->second);
  }
  const int n = static_cast<int>(nodes.size());
  Matrix x(n, features_.cols());
  std::vector<int> y(n);
  Masks m;
  m.train.resize(n);
  m.val.resize(n);
  m.test.resize(n);
  for (int i = 0; i < n; ++i) {
    const int g = nodes[i];
    x.row(i) = features_.row(g);
    y[i] = labels_[g];
    m.train[i] = masks_.train[g];
    m.val[i] = masks_.val[g];
    m.test[i] = masks_.test[g];
  }
  return Graph(n, std::move(edges), std::move(x), std::move(y), num_classes_, std::move(m));
}

NormalizedAdjacency normalize(const Graph& g) {
  const int n = g.num_nodes();
  std::vector<double> deg(n, 1.0);
  for (const auto& [u, v] : g.edges()) {
    deg[u] += 1.0;
    deg[v] += 1.0;
  }
  std::vector<double> inv_sqrt(n);
  for (int i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(n + 2 * g.edges().size());
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, inv_sqrt[i] * inv_sqrt[i]);
  for (const auto& [u, v] : g.edges()) {
    const double w = inv_sqrt[u] * inv_sqrt[v];
    trips.emplace_back(u, v, w);
    trips.emplace_back(v, u, w);
  }
  NormalizedAdjacency out;
  out.matrix.resize(n, n);
  out.matrix.setFromTriplets(trips.begin(), trips.end());
  out.matrix.makeCompressed();
  return out;
}

Masks random_masks(int num_nodes, double train, double val, double test, std::uint64_t seed) {
  Rng rng(seed);
  Masks m;
  m.train.assign(num_nodes, false);
  m.val.assign(num_nodes, false);
  m.test.assign(num_nodes, false);
  for (int i = 0; i < num_nodes; ++i) {
    const double u = open_uniform(rng);
    if (u < train) {
      m.train[i] = true;
    } else if (u < train + val) {
      m.val[i] = true;
    } else if (u < train + val + test) {
      m.test[i] = true;
    }
  }
  return m;
}

std::string to_string(SplitMode mode) {
  switch (mode) {
    case SplitMode::kNonOverlapping:
      return "non-overlapping";
    case SplitMode::kOverlapping:
      return "overlapping";
    case SplitMode::kSynthetic:
      return "synthetic";
  }
  return "unknown";
}

}  // namespace fedgkd
