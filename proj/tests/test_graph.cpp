#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "fedgkd/dataset_io.hpp"
#include "fedgkd/error.hpp"
#include "fedgkd/graph.hpp"
#include "fedgkd/partition.hpp"
#include "fedgkd/sbm.hpp"
#include "test_support.hpp"

using namespace fedgkd;
using fedgkd::testing::temp_dir;
using fedgkd::testing::write_file;

namespace {

void write_path_graph(const std::filesystem::path& dir) {
  write_file(dir / "edges.tsv", "0\t1\n1\t2\n");
  write_file(dir / "features.csv", "1.0,0.5\n-2,3e-1\n0,1\n");
  write_file(dir / "labels.csv", "0\n1\n1\n");
  write_file(dir / "masks.csv", "train,val,test\n1,0,0\n0,1,0\n0,0,1\n");
}

Graph two_cliques(int size) {
  std::vector<Edge> edges;
  for (int c = 0; c < 2; ++c)
    for (int a = 0; a < size; ++a)
      for (int b = a + 1; b < size; ++b) edges.emplace_back(c * size + a, c * size + b);
  const int n = 2 * size;
  return Graph(n, edges, Matrix::Zero(n, 1), std::vector<int>(n, 0), 1, {});
}

}  // namespace

TEST_CASE("load_dataset reads a 3-node path graph") {
  auto dir = temp_dir("path3");
  write_path_graph(dir);
  Graph g = load_dataset(dir);
  CHECK(g.num_nodes() == 3);
  CHECK(g.edges().size() == 2);
  CHECK(g.feature_dim() == 2);
  CHECK(g.num_classes() == 2);
  CHECK(g.features()(1, 1) == doctest::Approx(0.3));
  CHECK(g.masks().val[1]);
}

TEST_CASE("load_dataset deduplicates reversed edges and drops self-loops") {
  auto dir = temp_dir("dedup");
  write_path_graph(dir);
  write_file(dir / "edges.tsv", "0 1\n1 0\n2 2\n");
  Graph g = load_dataset(dir);
  REQUIRE(g.edges().size() == 1);
  CHECK(g.edges()[0] == Edge{0, 1});
}

TEST_CASE("load_dataset rejects inconsistent inputs") {
  auto dir = temp_dir("bad");
  write_path_graph(dir);

  SUBCASE("row count mismatch") {
    write_file(dir / "labels.csv", "0\n1\n");
    CHECK_THROWS_AS(load_dataset(dir), InputError);
  }
  SUBCASE("ragged features") {
    write_file(dir / "features.csv", "1,2\n3\n4,5\n");
    CHECK_THROWS_AS(load_dataset(dir), InputError);
  }
  SUBCASE("label above declared class count") {
    write_file(dir / "meta.json", R"({"num_classes": 1})");
    CHECK_THROWS_AS(load_dataset(dir), InputError);
  }
  SUBCASE("overlapping masks") {
    write_file(dir / "masks.csv", "1,1,0\n0,1,0\n0,0,1\n");
    CHECK_THROWS_AS(load_dataset(dir), InputError);
  }
  SUBCASE("edge endpoint out of range") {
    write_file(dir / "edges.tsv", "0\t3\n");
    CHECK_THROWS_AS(load_dataset(dir), InputError);
  }
  SUBCASE("missing directory") { CHECK_THROWS_AS(load_dataset(dir / "nope"), InputError); }
}

TEST_CASE("save_dataset and load_dataset agree") {
  Graph g = fedgkd::testing::random_graph(20, 3, 4, 0.2, 7);
  auto dir = temp_dir("roundtrip");
  save_dataset(g, dir);
  Graph h = load_dataset(dir);
  CHECK(h.edges() == g.edges());
  CHECK(h.features() == g.features());
  CHECK(h.labels() == g.labels());
  CHECK(h.num_classes() == g.num_classes());
  CHECK(h.masks().train == g.masks().train);
}

TEST_CASE("normalize: hand-computed entries") {
  SUBCASE("isolated node") {
    Graph g(1, {}, Matrix::Zero(1, 1), {0}, 1, {});
    CHECK(Matrix(normalize(g).matrix)(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("single edge") {
    Graph g(2, {{0, 1}}, Matrix::Zero(2, 1), {0, 0}, 1, {});
    Matrix a = normalize(g).matrix;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) CHECK(a(i, j) == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("3-node star centred at 0") {
    Graph g(3, {{0, 1}, {0, 2}}, Matrix::Zero(3, 1), {0, 0, 0}, 1, {});
    Matrix a = normalize(g).matrix;
    CHECK(a(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(a(0, 1) == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
    CHECK(a(1, 2) == 0.0);
  }
}

TEST_CASE("normalize: structure and value invariants on random graphs") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Graph g = fedgkd::testing::random_graph(30, 2, 2, 0.15, seed);
    const SparseMatrix& a = normalize(g).matrix;
    // Nonzero pattern is exactly A + I.
    CHECK(a.nonZeros() == static_cast<Eigen::Index>(g.num_nodes() + 2 * g.edges().size()));
    Matrix dense = a;
    CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < g.num_nodes(); ++i) CHECK(dense(i, i) > 0.0);
    for (int k = 0; k < a.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) {
        CHECK(it.value() > 0.0);
        CHECK(it.value() <= 1.0);
      }
    }
  }
}

TEST_CASE("partition: two disconnected cliques split with zero cut") {
  Graph g = two_cliques(10);
  auto split = partition(g, 2, 3);
  REQUIRE(split.client_graphs.size() == 2);
  for (const auto& cg : split.client_graphs) {
    CHECK(cg.num_nodes() == 10);
    CHECK(cg.edges().size() == 45);
  }
  auto parts = multilevel_partition(g, 2, 3);
  CHECK(edge_cut(g, parts) == 0);
}

TEST_CASE("partition: SBM blocks are recovered") {
  SbmSpec spec{.blocks = 4, .nodes_per_block = 60, .p_in = 0.25, .p_out = 0.005, .feature_dim = 4, .num_classes = 4};
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Graph g = generate_sbm(spec, seed);
    auto parts = multilevel_partition(g, 4, seed);
    auto blocks = sbm_blocks(spec);
    for (int b = 0; b < spec.blocks; ++b) {
      std::map<int, int> counts;
      for (int v = 0; v < g.num_nodes(); ++v)
        if (blocks[v] == b) counts[parts[v]]++;
      int best = 0;
      for (auto [p, c] : counts) best = std::max(best, c);
      CHECK(best >= 0.9 * spec.nodes_per_block);
    }
  }
}

TEST_CASE("partition: balance, disjointness, coverage and determinism") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    Graph g = fedgkd::testing::random_graph(157, 2, 3, 0.04, seed);
    for (int n : {2, 3, 5, 7}) {
      auto split = partition(g, n, seed);
      const int limit = static_cast<int>(std::ceil(1.1 * g.num_nodes() / n));
      std::set<int> seen;
      std::size_t total = 0;
      for (std::size_t i = 0; i < split.client_graphs.size(); ++i) {
        CHECK(split.client_graphs[i].num_nodes() <= limit);
        CHECK(split.client_graphs[i].num_nodes() > 0);
        total += split.node_maps[i].size();
        seen.insert(split.node_maps[i].begin(), split.node_maps[i].end());
      }
      CHECK(total == static_cast<std::size_t>(g.num_nodes()));
      CHECK(seen.size() == static_cast<std::size_t>(g.num_nodes()));
      CHECK(multilevel_partition(g, n, seed) == multilevel_partition(g, n, seed));
    }
  }
}

TEST_CASE("partition: preconditions") {
  Graph g = fedgkd::testing::random_graph(10, 2, 2, 0.3, 1);
  CHECK_THROWS_AS(partition(g, 1, 0), InputError);
  CHECK_THROWS_AS(partition(g, 11, 0), InputError);
}

TEST_CASE("partition file round trip drives split_by_parts") {
  Graph g = two_cliques(4);
  std::vector<int> parts{0, 0, 0, 0, 1, 1, 1, 1};
  auto dir = temp_dir("parts");
  save_partition_file(parts, dir / "parts.txt");
  auto loaded = load_partition_file(dir / "parts.txt", g.num_nodes());
  CHECK(loaded == parts);
  auto split = split_by_parts(g, loaded, 2, 0);
  CHECK(split.client_graphs[1].num_nodes() == 4);
  CHECK_THROWS_AS(load_partition_file(dir / "parts.txt", 9), InputError);
}

TEST_CASE("overlapping_split sizes and preconditions") {
  Graph g = fedgkd::testing::random_graph(100, 2, 2, 0.05, 4);
  auto split = overlapping_split(g, 5, 9);
  REQUIRE(split.client_graphs.size() == 5);
  for (const auto& cg : split.client_graphs) CHECK(cg.num_nodes() == 50);
  // Independent samples of one source graph overlap.
  std::set<int> a(split.node_maps[0].begin(), split.node_maps[0].end());
  int shared = 0;
  for (int v : split.node_maps[1]) shared += a.count(v);
  CHECK(shared > 0);

  auto ten = overlapping_split(g, 10, 9);
  REQUIRE(ten.client_graphs.size() == 10);
  for (const auto& cg : ten.client_graphs) CHECK(cg.num_nodes() == doctest::Approx(25).epsilon(0.2));

  CHECK_THROWS_AS(overlapping_split(g, 7, 0), InputError);
  CHECK_THROWS_AS(overlapping_split(g, 0, 0), InputError);
}

TEST_CASE("generate_sbm basic properties") {
  SbmSpec spec{.blocks = 3, .nodes_per_block = 30, .p_in = 0.3, .p_out = 0.0, .feature_dim = 5, .num_classes = 3};
  Graph g = generate_sbm(spec, 11);
  auto blocks = sbm_blocks(spec);
  for (auto [u, v] : g.edges()) CHECK(blocks[u] == blocks[v]);

  SbmSpec shifted = spec;
  shifted.label_shift = 0;
  CHECK(generate_sbm(shifted, 11).labels() == g.labels());
  shifted.label_shift = 1;
  Graph h = generate_sbm(shifted, 11);
  CHECK(h.features() == g.features());
  CHECK(h.edges() == g.edges());
  for (int i = 0; i < g.num_nodes(); ++i) CHECK(h.labels()[i] == (g.labels()[i] + 1) % 3);

  spec.p_out = 0.5;
  CHECK_THROWS_AS(generate_sbm(spec, 0), InputError);
}

TEST_CASE("generate_sbm edge counts match binomial expectation") {
  // Expected intra edges 2 * C(50,2) * 0.2 = 490, inter 50 * 50 * 0.01 = 25.
  SbmSpec spec{.blocks = 2, .nodes_per_block = 50, .p_in = 0.2, .p_out = 0.01, .feature_dim = 2, .num_classes = 2};
  auto blocks = sbm_blocks(spec);
  double intra = 0, inter = 0;
  const int seeds = 100;
  for (int s = 0; s < seeds; ++s) {
    Graph g = generate_sbm(spec, s);
    for (auto [u, v] : g.edges()) (blocks[u] == blocks[v] ? intra : inter) += 1;
  }
  intra /= seeds;
  inter /= seeds;
  // Standard errors over 100 seeds: sqrt(490 * 0.8) / 10 ~ 2.0 and sqrt(25 * 0.99) / 10 ~ 0.5.
  CHECK(std::abs(intra - 490.0) < 4 * 2.0);
  CHECK(std::abs(inter - 25.0) < 4 * 0.5);
}
