#include "fedgkd/partition.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "fedgkd/error.hpp"
#include "fedgkd/rng.hpp"

namespace fedgkd {
namespace {

// Weighted CSR graph used across coarsening levels.
struct WGraph {
  int n = 0;
  std::vector<int> xadj, adjncy;
  std::vector<double> ewgt;
  std::vector<int> vwgt;

  int total_weight() const { return std::accumulate(vwgt.begin(), vwgt.end(), 0); }
};

WGraph from_graph(const Graph& g) {
  WGraph w;
  w.n = g.num_nodes();
  auto lists = g.adjacency_lists();
  w.xadj.assign(w.n + 1, 0);
  for (int v = 0; v < w.n; ++v) {
    std::sort(lists[v].begin(), lists[v].end());
    w.xadj[v + 1] = w.xadj[v] + static_cast<int>(lists[v].size());
  }
  w.adjncy.reserve(w.xadj.back());
  for (int v = 0; v < w.n; ++v) w.adjncy.insert(w.adjncy.end(), lists[v].begin(), lists[v].end());
  w.ewgt.assign(w.adjncy.size(), 1.0);
  w.vwgt.assign(w.n, 1);
  return w;
}

std::vector<int> shuffled(int n, Rng& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Heavy-edge matching. Returns the coarse graph and fills cmap.
WGraph coarsen(const WGraph& g, int max_vwgt, Rng& rng, std::vector<int>& cmap) {
  std::vector<int> match(g.n, -1);
  for (int v : shuffled(g.n, rng)) {
    if (match[v] >= 0) continue;
    int best = -1;
    double best_w = -1.0;
    for (int e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
      const int u = g.adjncy[e];
      if (u == v || match[u] >= 0) continue;
      if (g.vwgt[u] + g.vwgt[v] > max_vwgt) continue;
      if (g.ewgt[e] > best_w) {
        best_w = g.ewgt[e];
        best = u;
      }
    }
    if (best < 0) {
      match[v] = v;
    } else {
      match[v] = best;
      match[best] = v;
    }
  }

  cmap.assign(g.n, -1);
  int nc = 0;
  for (int v = 0; v < g.n; ++v) {
    if (cmap[v] >= 0) continue;
    cmap[v] = nc;
    cmap[match[v]] = nc;
    ++nc;
  }

  WGraph c;
  c.n = nc;
  c.vwgt.assign(nc, 0);
  c.xadj.assign(nc + 1, 0);
  for (int v = 0; v < g.n; ++v) c.vwgt[cmap[v]] += g.vwgt[v];

  // Members of each coarse vertex, in fine-id order.
  std::vector<std::vector<int>> members(nc);
  for (int v = 0; v < g.n; ++v) members[cmap[v]].push_back(v);

  std::vector<int> slot(nc, -1);
  for (int cv = 0; cv < nc; ++cv) {
    const int begin = static_cast<int>(c.adjncy.size());
    for (int v : members[cv]) {
      for (int e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
        const int cu = cmap[g.adjncy[e]];
        if (cu == cv) continue;
        if (slot[cu] < 0) {
          slot[cu] = static_cast<int>(c.adjncy.size());
          c.adjncy.push_back(cu);
          c.ewgt.push_back(0.0);
        }
        c.ewgt[slot[cu]] += g.ewgt[e];
      }
    }
    for (int i = begin; i < static_cast<int>(c.adjncy.size()); ++i) slot[c.adjncy[i]] = -1;
    c.xadj[cv + 1] = static_cast<int>(c.adjncy.size());
  }
  return c;
}

double cut_weight(const WGraph& g, const std::vector<int>& part) {
  double cut = 0.0;
  for (int v = 0; v < g.n; ++v)
    for (int e = g.xadj[v]; e < g.xadj[v + 1]; ++e)
      if (part[v] != part[g.adjncy[e]]) cut += g.ewgt[e];
  return cut / 2.0;
}

// Greedy graph growing: parts 0..k-2 grow from random seeds by absorbing
// the frontier vertex most connected to the part; the rest forms part k-1.
std::vector<int> grow_partition(const WGraph& g, int k, Rng& rng) {
  std::vector<int> part(g.n, -1);
  const double target = static_cast<double>(g.total_weight()) / k;
  std::vector<double> conn(g.n, 0.0);
  std::vector<int> order = shuffled(g.n, rng);
  std::size_t next_seed = 0;

  for (int p = 0; p < k - 1; ++p) {
    int weight = 0;
    std::vector<int> frontier;
    std::fill(conn.begin(), conn.end(), 0.0);
    auto absorb = [&](int v) {
      part[v] = p;
      weight += g.vwgt[v];
      for (int e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
        const int u = g.adjncy[e];
        if (part[u] >= 0) continue;
        if (conn[u] == 0.0) frontier.push_back(u);
        conn[u] += g.ewgt[e];
      }
    };
    while (weight < target) {
      // Most connected unassigned frontier vertex.
      int best = -1;
      std::size_t best_idx = 0;
      for (std::size_t i = 0; i < frontier.size(); ++i) {
        const int u = frontier[i];
        if (part[u] >= 0) continue;
        if (best < 0 || conn[u] > conn[best]) {
          best = u;
          best_idx = i;
        }
      }
      if (best < 0) {
        frontier.clear();
        while (next_seed < order.size() && part[order[next_seed]] >= 0) ++next_seed;
        if (next_seed == order.size()) break;
        best = order[next_seed];
      } else {
        frontier[best_idx] = frontier.back();
        frontier.pop_back();
      }
      if (weight > 0 && weight + g.vwgt[best] - target > target - weight) break;
      absorb(best);
    }
  }
  for (int v = 0; v < g.n; ++v)
    if (part[v] < 0) part[v] = k - 1;
  return part;
}

std::vector<int> part_weights(const WGraph& g, const std::vector<int>& part, int k) {
  std::vector<int> w(k, 0);
  for (int v = 0; v < g.n; ++v) w[part[v]] += g.vwgt[v];
  return w;
}

// Boundary refinement: repeatedly move boundary vertices to the adjacent
// part with the largest positive cut gain, respecting the weight limit.
// Zero-gain moves are taken only when they reduce imbalance.
void refine(const WGraph& g, std::vector<int>& part, int k, int limit, Rng& rng, int passes = 10) {
  auto pw = part_weights(g, part, k);
  std::vector<double> conn(k, 0.0);
  std::vector<int> touched;
  for (int pass = 0; pass < passes; ++pass) {
    bool moved = false;
    for (int v : shuffled(g.n, rng)) {
      const int from = part[v];
      touched.clear();
      for (int e = g.xadj[v]; e < g.xadj[v + 1]; ++e) {
        const int p = part[g.adjncy[e]];
        if (conn[p] == 0.0) touched.push_back(p);
        conn[p] += g.ewgt[e];
      }
      int best = -1;
      double best_gain = 0.0;
      for (int p : touched) {
        if (p == from) continue;
        if (pw[p] + g.vwgt[v] > limit) continue;
        if (pw[from] - g.vwgt[v] <= 0) continue;
        const double gain = conn[p] - conn[from];
        const bool balances = pw[from] > pw[p] + g.vwgt[v];
        if (gain < 0.0 || (gain == 0.0 && !balances)) continue;
        if (best < 0 || gain > best_gain || (gain == best_gain && pw[p] < pw[best])) {
          best = p;
          best_gain = gain;
        }
      }
      for (int p : touched) conn[p] = 0.0;
      if (best >= 0) {
        part[v] = best;
        pw[from] -= g.vwgt[v];
        pw[best] += g.vwgt[v];
        moved = true;
      }
    }
    if (!moved) break;
  }
}

// Forces every part under `limit` and non-empty by greedy least-loss moves.
void enforce_balance(const WGraph& g, std::vector<int>& part, int k, int limit) {
  auto pw = part_weights(g, part, k);
  std::vector<double> conn(k);
  auto best_move_from = [&](int src, int only_target) {
    int best_v = -1, best_p = -1;
    double best_gain = -std::numeric_limits<double>::infinity();
    for (int v = 0; v < g.n; ++v) {
      if (part[v] != src) continue;
      std::fill(conn.begin(), conn.end(), 0.0);
      for (int e = g.xadj[v]; e < g.xadj[v + 1]; ++e) conn[part[g.adjncy[e]]] += g.ewgt[e];
      for (int p = 0; p < k; ++p) {
        if (p == src) continue;
        if (only_target >= 0 && p != only_target) continue;
        if (pw[p] + g.vwgt[v] > limit) continue;
        const double gain = conn[p] - conn[src];
        if (gain > best_gain) {
          best_gain = gain;
          best_v = v;
          best_p = p;
        }
      }
    }
    if (best_v >= 0) {
      part[best_v] = best_p;
      pw[src] -= g.vwgt[best_v];
      pw[best_p] += g.vwgt[best_v];
    }
    return best_v >= 0;
  };

  for (int p = 0; p < k; ++p) {
    while (pw[p] == 0) {
      const int src = static_cast<int>(std::max_element(pw.begin(), pw.end()) - pw.begin());
      if (!best_move_from(src, p)) break;
    }
  }
  for (int guard = 0; guard < g.n * 4; ++guard) {
    const int src = static_cast<int>(std::max_element(pw.begin(), pw.end()) - pw.begin());
    if (pw[src] <= limit) break;
    if (!best_move_from(src, -1)) break;
  }
}

}  // namespace

std::vector<int> multilevel_partition(const Graph& g, int k, std::uint64_t seed) {
  const int n = g.num_nodes();
  if (k < 2) throw InputError("partition requires at least 2 parts, got " + std::to_string(k));
  if (k > n) {
    throw InputError("cannot split " + std::to_string(n) + " nodes into " + std::to_string(k) + " parts");
  }
  Rng rng(derive_seed(seed, Stream::kSplit, {static_cast<std::uint64_t>(k)}));
  const int limit = static_cast<int>((11LL * n + 10LL * k - 1) / (10LL * k));

  std::vector<WGraph> levels{from_graph(g)};
  std::vector<std::vector<int>> cmaps;
  const int coarsen_to = std::max(20 * k, 40);
  const int max_vwgt = std::max(1, n / (4 * k));
  while (levels.back().n > coarsen_to) {
    std::vector<int> cmap;
    WGraph c = coarsen(levels.back(), max_vwgt, rng, cmap);
    if (c.n > 0.95 * levels.back().n) break;
    cmaps.push_back(std::move(cmap));
    levels.push_back(std::move(c));
  }

  // Best of several grown initial partitions at the coarsest level.
  const WGraph& coarsest = levels.back();
  std::vector<int> part;
  double best_cut = std::numeric_limits<double>::infinity();
  for (int attempt = 0; attempt < 8; ++attempt) {
    auto cand = grow_partition(coarsest, k, rng);
    refine(coarsest, cand, k, limit, rng);
    const double cut = cut_weight(coarsest, cand);
    if (cut < best_cut) {
      best_cut = cut;
      part = std::move(cand);
    }
  }

  for (int level = static_cast<int>(levels.size()) - 2; level >= 0; --level) {
    const auto& cmap = cmaps[level];
    std::vector<int> fine(levels[level].n);
    for (int v = 0; v < levels[level].n; ++v) fine[v] = part[cmap[v]];
    part = std::move(fine);
    refine(levels[level], part, k, limit, rng);
  }
  enforce_balance(levels.front(), part, k, limit);
  refine(levels.front(), part, k, limit, rng);
  return part;
}

std::size_t edge_cut(const Graph& g, const std::vector<int>& parts) {
  std::size_t cut = 0;
  for (const auto& [u, v] : g.edges())
    if (parts[u] != parts[v]) ++cut;
  return cut;
}

FederatedSplit split_by_parts(const Graph& g, const std::vector<int>& parts, int k, std::uint64_t seed) {
  if (static_cast<int>(parts.size()) != g.num_nodes()) throw InputError("part vector has wrong length");
  std::vector<std::vector<int>> members(k);
  for (int v = 0; v < g.num_nodes(); ++v) {
    if (parts[v] < 0 || parts[v] >= k) throw InputError("part id out of range at node " + std::to_string(v));
    members[parts[v]].push_back(v);
  }
  FederatedSplit split;
  split.mode = SplitMode::kNonOverlapping;
  split.n = k;
  split.seed = seed;
  for (int p = 0; p < k; ++p) {
    if (members[p].empty()) throw InputError("part " + std::to_string(p) + " is empty");
    split.client_graphs.push_back(g.induced(members[p]));
    split.node_maps.push_back(std::move(members[p]));
  }
  return split;
}

FederatedSplit partition(const Graph& g, int n, std::uint64_t seed) {
  return split_by_parts(g, multilevel_partition(g, n, seed), n, seed);
}

FederatedSplit overlapping_split(const Graph& g, int n, std::uint64_t seed) {
  if (n <= 0 || n % 5 != 0) {
    throw InputError("overlapping split needs a positive multiple of 5 clients, got " + std::to_string(n));
  }
  const int groups = n / 5;
  std::vector<std::vector<int>> sources;
  if (groups == 1) {
    std::vector<int> all(g.num_nodes());
    std::iota(all.begin(), all.end(), 0);
    sources.push_back(std::move(all));
  } else {
    auto parts = multilevel_partition(g, groups, seed);
    sources.resize(groups);
    for (int v = 0; v < g.num_nodes(); ++v) sources[parts[v]].push_back(v);
  }

  FederatedSplit split;
  split.mode = SplitMode::kOverlapping;
  split.n = n;
  split.seed = seed;
  for (int s = 0; s < groups; ++s) {
    const auto& src = sources[s];
    const int half = std::max(1, static_cast<int>(src.size()) / 2);
    for (int draw = 0; draw < 5; ++draw) {
      Rng rng(derive_seed(seed, Stream::kSplit, {static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(draw), 0x0fULL}));
      std::vector<int> nodes = src;
      std::shuffle(nodes.begin(), nodes.end(), rng);
      nodes.resize(half);
      std::sort(nodes.begin(), nodes.end());
      split.client_graphs.push_back(g.induced(nodes));
      split.node_maps.push_back(std::move(nodes));
    }
  }
  return split;
}

}  // namespace fedgkd
