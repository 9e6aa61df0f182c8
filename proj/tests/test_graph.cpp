#include "doctest.h"

#include <random>

#include "support.hpp"
#include "uniap/ccl.hpp"
#include "uniap/error.hpp"
#include "uniap/graph.hpp"
#include "uniap/parallel.hpp"

using namespace uniap;
using testing::make_map;

namespace {

FeatureMap unit_map(std::size_t h, std::size_t w) {
  std::vector<std::vector<float>> rows(h * w, {1.0F, 0.0F});
  return make_map(h, w, 2, rows);
}

std::vector<Edge> E(std::initializer_list<std::pair<int, int>> list) {
  std::vector<Edge> out;
  for (auto [a, b] : list) {
    out.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)});
  }
  return out;
}

// Breadth-first labelling, numbered by smallest member.
std::vector<std::uint32_t> bfs_labels(std::size_t n, const std::vector<Edge>& edges) {
  std::vector<std::vector<std::uint32_t>> adj(n);
  for (const Edge& e : edges) {
    adj[e.a].push_back(e.b);
    adj[e.b].push_back(e.a);
  }
  std::vector<std::uint32_t> label(n, UINT32_MAX);
  std::uint32_t next = 0;
  for (std::uint32_t s = 0; s < n; ++s) {
    if (label[s] != UINT32_MAX) continue;
    std::vector<std::uint32_t> stack{s};
    label[s] = next;
    while (!stack.empty()) {
      const std::uint32_t u = stack.back();
      stack.pop_back();
      for (std::uint32_t v : adj[u]) {
        if (label[v] == UINT32_MAX) {
          label[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  return label;
}

std::vector<Edge> random_edges(std::size_t n, std::size_t m, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(n - 1));
  std::vector<Edge> out;
  while (out.size() < m) {
    std::uint32_t a = pick(rng);
    std::uint32_t b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    out.push_back({a, b});
  }
  return out;
}

}  // namespace

TEST_CASE("grid graph construction") {
  const Graph g = init_grid_graph(unit_map(2, 2));
  CHECK(g.num_nodes() == 4);
  CHECK(g.edges == E({{0, 1}, {0, 2}, {1, 3}, {2, 3}}));
  CHECK(g.level == 0);
  CHECK_FALSE(g.features_pooled);

  const Graph one = init_grid_graph(unit_map(1, 1));
  CHECK(one.num_nodes() == 1);
  CHECK(one.edges.empty());

  const Graph nine = init_grid_graph(unit_map(3, 3));
  CHECK(nine.num_nodes() == 9);
  CHECK(nine.edges.size() == 12);

  for (std::size_t i = 0; i < nine.num_nodes(); ++i) {
    CHECK(nine.masks[i] == TokenMask::singleton(3, 3, i));
  }
  CHECK(testing::is_partition(nine.masks, 3, 3));

  CHECK_THROWS_AS(init_grid_graph(make_map(1, 1, 2, {{3, 4}}, false)), Error);
}

TEST_CASE("fully connected copy") {
  CHECK(make_fully_connected(init_grid_graph(unit_map(1, 1))).edges.empty());
  CHECK(make_fully_connected(init_grid_graph(unit_map(2, 2))).edges.size() == 6);
  const Graph ten = make_fully_connected(init_grid_graph(unit_map(2, 5)));
  CHECK(ten.edges.size() == 45);
  CHECK(std::is_sorted(ten.edges.begin(), ten.edges.end()));
}

TEST_CASE("apply assignment") {
  const Graph g = init_grid_graph(unit_map(2, 2));

  const Graph cols = apply_assignment(g, {{0, 1, 0, 1}, 2});
  CHECK(cols.num_nodes() == 2);
  const std::vector<std::size_t> left{0, 2};
  const std::vector<std::size_t> right{1, 3};
  CHECK(cols.masks[0] == TokenMask::from_indices(2, 2, left));
  CHECK(cols.masks[1] == TokenMask::from_indices(2, 2, right));
  CHECK(cols.edges == E({{0, 1}}));
  CHECK(cols.level == 1);

  const Graph same = apply_assignment(g, {{0, 1, 2, 3}, 4});
  CHECK(same.masks == g.masks);
  CHECK(same.edges == g.edges);
  CHECK(same.features == g.features);
  CHECK(same.level == g.level + 1);

  const Graph all = apply_assignment(g, {{0, 0, 0, 0}, 1});
  CHECK(all.num_nodes() == 1);
  CHECK(all.masks[0] == TokenMask::full(2, 2));
  CHECK(all.edges.empty());

  CHECK_THROWS_AS(apply_assignment(g, {{0, 1, 0}, 2}), Error);
  CHECK_THROWS_AS(apply_assignment(g, {{0, 2, 0, 2}, 3}), Error);  // not onto
  CHECK_THROWS_AS(apply_assignment(g, {{0, 1, 0, 5}, 2}), Error);
}

TEST_CASE("assignment composition equals composed assignment") {
  std::mt19937_64 rng(3);
  const FeatureMap fm = testing::random_map(5, 6, 4, rng);
  const Graph g = init_grid_graph(fm);
  for (int trial = 0; trial < 20; ++trial) {
    const auto marks1 = random_edges(g.num_nodes(), 8, rng);
    const Assignment a1 = union_find_oracle(g.num_nodes(), marks1);
    const Graph g1 = apply_assignment(g, a1);
    const auto marks2 = g1.num_nodes() > 1
                            ? random_edges(g1.num_nodes(), 4, rng)
                            : std::vector<Edge>{};
    const Assignment a2 = union_find_oracle(g1.num_nodes(), marks2);
    const Graph g2 = apply_assignment(g1, a2);

    Assignment composed;
    composed.map.resize(g.num_nodes());
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      composed.map[i] = a2.map[a1.map[i]];
    }
    composed.num_supernodes = a2.num_supernodes;
    const Graph direct = apply_assignment(g, composed);
    CHECK(direct.masks == g2.masks);
    CHECK(direct.edges == g2.edges);
    CHECK(testing::is_partition(g2.masks, 5, 6));
  }
}

TEST_CASE("connected components examples") {
  const auto path = E({{0, 1}, {1, 2}});
  for (bool oracle : {false, true}) {
    const Assignment a = oracle ? union_find_oracle(4, path)
                                : connected_components(4, path);
    CHECK(a.map == std::vector<std::uint32_t>{0, 0, 0, 1});
    CHECK(a.num_supernodes == 2);
    const Assignment none =
        oracle ? union_find_oracle(4, {}) : connected_components(4, {});
    CHECK(none.map == std::vector<std::uint32_t>{0, 1, 2, 3});
    CHECK(none.num_supernodes == 4);
  }
  std::vector<Edge> chain;
  for (std::uint32_t i = 0; i + 1 < 10; ++i) chain.push_back({i, i + 1});
  CHECK(union_find_oracle(10, chain).num_supernodes == 1);
  CHECK(connected_components(10, chain, nullptr, {0}).num_supernodes == 1);

  const auto loop = E({{0, 0}});
  CHECK_THROWS_AS(union_find_oracle(1, loop), Error);
  CHECK_THROWS_AS(connected_components(1, loop), Error);
  const auto far = E({{0, 7}});
  CHECK_THROWS_AS(connected_components(4, far), Error);
}

TEST_CASE("parallel labelling matches breadth-first labels") {
  std::mt19937_64 rng(17);
  WorkerPool pool(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<std::size_t> size(1, 600);
    const std::size_t n = size(rng);
    std::uniform_int_distribution<std::size_t> count(0, n + n / 2);
    const auto edges = n > 1 ? random_edges(n, count(rng), rng) : std::vector<Edge>{};
    const auto expect = bfs_labels(n, edges);
    CHECK(union_find_oracle(n, edges).map == expect);
    CHECK(connected_components(n, edges, nullptr, {0}).map == expect);
    CHECK(connected_components(n, edges, &pool, {0}).map == expect);
    auto shuffled = edges;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(connected_components(n, shuffled, &pool, {0}).map == expect);
  }
}
