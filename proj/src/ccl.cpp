#include "uniap/ccl.hpp"

#include <atomic>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "uniap/error.hpp"
#include "uniap/parallel.hpp"

namespace uniap {

namespace {

void check_edges(std::size_t num_nodes, std::span<const Edge> edges) {
  for (const Edge& e : edges) {
    if (e.a >= num_nodes || e.b >= num_nodes) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "edge (" + std::to_string(e.a) + ", " + std::to_string(e.b) +
                      ") with " + std::to_string(num_nodes) + " nodes");
    }
    if (e.a == e.b) {
      throw Error(ErrorCode::kSelfLoop,
                  "self-loop on node " + std::to_string(e.a));
    }
  }
}

// Every node points at its component's minimum index; renumber roots densely
// in ascending order.
Assignment from_min_labels(std::span<const std::uint32_t> root) {
  Assignment a;
  a.map.resize(root.size());
  std::vector<std::uint32_t> dense(root.size(), 0);
  std::uint32_t next = 0;
  for (std::size_t i = 0; i < root.size(); ++i) {
    if (root[i] == i) dense[i] = next++;
    a.map[i] = dense[root[i]];
  }
  a.num_supernodes = next;
  return a;
}

}  // namespace

Assignment union_find_oracle(std::size_t num_nodes,
                             std::span<const Edge> marked_edges) {
  check_edges(num_nodes, marked_edges);
  std::vector<std::uint32_t> parent(num_nodes);
  std::iota(parent.begin(), parent.end(), 0U);
  auto find = [&](std::uint32_t x) {
    std::uint32_t r = x;
    while (parent[r] != r) r = parent[r];
    while (parent[x] != r) {
      const std::uint32_t up = parent[x];
      parent[x] = r;
      x = up;
    }
    return r;
  };
  for (const Edge& e : marked_edges) {
    const std::uint32_t ra = find(e.a);
    const std::uint32_t rb = find(e.b);
    // Hook the larger root under the smaller so roots end up as minima.
    if (ra < rb) {
      parent[rb] = ra;
    } else if (rb < ra) {
      parent[ra] = rb;
    }
  }
  for (std::uint32_t i = 0; i < num_nodes; ++i) parent[i] = find(i);
  return from_min_labels(parent);
}

Assignment connected_components(std::size_t num_nodes,
                                std::span<const Edge> marked_edges,
                                WorkerPool* pool, const CclOptions& options) {
  if (num_nodes < options.sequential_below) {
    return union_find_oracle(num_nodes, marked_edges);
  }
  check_edges(num_nodes, marked_edges);

  // Hook-and-compress: each round hooks the larger of two differing parents
  // under the smaller with an atomic min, then shortcuts every node to its
  // root. Pointers only ever decrease, so the fixpoint labels each component
  // by its minimum index whatever the interleaving.
  std::vector<std::atomic<std::uint32_t>> parent(num_nodes);
  for (std::uint32_t i = 0; i < num_nodes; ++i) {
    parent[i].store(i, std::memory_order_relaxed);
  }
  auto atomic_min = [](std::atomic<std::uint32_t>& slot, std::uint32_t value) {
    std::uint32_t cur = slot.load(std::memory_order_relaxed);
    while (value < cur &&
           !slot.compare_exchange_weak(cur, value, std::memory_order_relaxed)) {
    }
    return value < cur;
  };
  constexpr std::size_t kGrain = 2048;

  for (;;) {
    std::atomic<bool> changed{false};
    parallel_for(
        pool, marked_edges.size(),
        [&](std::size_t begin, std::size_t end) {
          bool local = false;
          for (std::size_t k = begin; k < end; ++k) {
            const Edge& e = marked_edges[k];
            const std::uint32_t pa = parent[e.a].load(std::memory_order_relaxed);
            const std::uint32_t pb = parent[e.b].load(std::memory_order_relaxed);
            if (pa < pb) {
              local |= atomic_min(parent[pb], pa);
            } else if (pb < pa) {
              local |= atomic_min(parent[pa], pb);
            }
          }
          if (local) changed.store(true, std::memory_order_relaxed);
        },
        kGrain);

    parallel_for(
        pool, num_nodes,
        [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) {
            std::uint32_t r = parent[i].load(std::memory_order_relaxed);
            for (;;) {
              const std::uint32_t up = parent[r].load(std::memory_order_relaxed);
              if (up == r) break;
              r = up;
            }
            parent[i].store(r, std::memory_order_relaxed);
          }
        },
        kGrain);

    if (!changed.load()) break;
  }

  std::vector<std::uint32_t> root(num_nodes);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    root[i] = parent[i].load(std::memory_order_relaxed);
  }
  return from_min_labels(root);
}

}  // namespace uniap
