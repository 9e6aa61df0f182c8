#pragma once

#include <cstddef>
#include <span>

#include "uniap/graph.hpp"

namespace uniap {

class WorkerPool;

struct CclOptions {
  // Graphs with fewer nodes go straight to the sequential union-find.
  std::size_t sequential_below = 1024;
};

// Connected components of the subgraph spanned by marked_edges. Supernodes
// are numbered by their smallest member index, ascending. Output does not
// depend on edge order or on the pool size. Throws IndexOutOfRange or
// SelfLoop on bad edges.
Assignment connected_components(std::size_t num_nodes,
                                std::span<const Edge> marked_edges,
                                WorkerPool* pool = nullptr,
                                const CclOptions& options = {});

// Sequential union-find with path compression; same contract as above.
Assignment union_find_oracle(std::size_t num_nodes,
                             std::span<const Edge> marked_edges);

}  // namespace uniap
