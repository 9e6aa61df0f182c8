#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "uniap/tensor.hpp"
#include "uniap/token_mask.hpp"

namespace uniap {

// Undirected edge between node indices, always stored with a < b.
struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Coarsening state at one layer: supernode features, token masks and a
// sparse symmetric adjacency.
//
// Invariants: masks partition the token grid; edges are sorted, unique, with
// a < b < num_nodes(); feature rows are unit-norm (except rows of freshly
// merged nodes between apply_assignment and update_features).
struct Graph {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t dim = 0;
  int level = 0;
  std::vector<float> features;  // num_nodes × dim
  std::vector<TokenMask> masks;
  std::vector<Edge> edges;
  // True once every feature row has been produced by the softmax-weighted
  // voting update rather than copied from the raw token features.
  bool features_pooled = false;

  std::size_t num_nodes() const noexcept { return masks.size(); }
  std::size_t token_count() const noexcept { return height * width; }

  std::span<const float> feature(std::size_t node) const noexcept {
    return {features.data() + node * dim, dim};
  }
  std::span<float> feature(std::size_t node) noexcept {
    return {features.data() + node * dim, dim};
  }
};

// Node → supernode map (the binary Ω, one 1 per row). Surjective onto
// [0, num_supernodes).
struct Assignment {
  std::vector<std::uint32_t> map;
  std::size_t num_supernodes = 0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

// One node per token, singleton masks, 4-neighbourhood edges.
Graph init_grid_graph(const FeatureMap& fm);

Graph make_fully_connected(const Graph& g);

// Unions the masks of each supernode's children and pools adjacency,
// dropping self-loops. Rows for supernodes with a single child keep that
// child's feature; rows for merged supernodes are zeroed and must be filled
// by update_features. Throws InvalidAssignment.
Graph apply_assignment(const Graph& g, const Assignment& a);

// Throws InvalidAssignment unless a is a surjective map of the right length.
void validate_assignment(const Assignment& a, std::size_t num_nodes);

}  // namespace uniap
