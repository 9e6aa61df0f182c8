#include "uniap/graph.hpp"

#include <algorithm>
#include <string>

#include "uniap/error.hpp"

namespace uniap {

Graph init_grid_graph(const FeatureMap& fm) {
  if (!fm.normalized()) {
    throw Error(ErrorCode::kNotNormalized,
                "graph initialization needs an L2-normalized feature map");
  }
  const std::size_t h = fm.height();
  const std::size_t w = fm.width();
  Graph g;
  g.height = h;
  g.width = w;
  g.dim = fm.dim();
  g.features.assign(fm.data().begin(), fm.data().end());
  g.masks.reserve(h * w);
  for (std::size_t p = 0; p < h * w; ++p) {
    g.masks.push_back(TokenMask::singleton(h, w, p));
  }
  g.edges.reserve(h * (w - 1) + w * (h - 1));
  // Row-major node order makes (right, down) neighbours already sorted.
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto p = static_cast<std::uint32_t>(r * w + c);
      if (c + 1 < w) g.edges.push_back({p, p + 1});
      if (r + 1 < h) g.edges.push_back({p, static_cast<std::uint32_t>(p + w)});
    }
  }
  return g;
}

Graph make_fully_connected(const Graph& g) {
  Graph out = g;
  const auto n = static_cast<std::uint32_t>(g.num_nodes());
  out.edges.clear();
  out.edges.reserve(static_cast<std::size_t>(n) * (n - (n > 0 ? 1 : 0)) / 2);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = i + 1; j < n; ++j) out.edges.push_back({i, j});
  }
  return out;
}

void validate_assignment(const Assignment& a, std::size_t num_nodes) {
  if (a.map.size() != num_nodes) {
    throw Error(ErrorCode::kInvalidAssignment,
                "map has " + std::to_string(a.map.size()) + " entries for " +
                    std::to_string(num_nodes) + " nodes");
  }
  std::vector<char> hit(a.num_supernodes, 0);
  for (std::uint32_t k : a.map) {
    if (k >= a.num_supernodes) {
      throw Error(ErrorCode::kInvalidAssignment,
                  "supernode " + std::to_string(k) + " out of range " +
                      std::to_string(a.num_supernodes));
    }
    hit[k] = 1;
  }
  if (std::find(hit.begin(), hit.end(), 0) != hit.end()) {
    throw Error(ErrorCode::kInvalidAssignment, "map is not surjective");
  }
}

Graph apply_assignment(const Graph& g, const Assignment& a) {
  validate_assignment(a, g.num_nodes());
  const std::size_t s = a.num_supernodes;

  Graph out;
  out.height = g.height;
  out.width = g.width;
  out.dim = g.dim;
  out.level = g.level + 1;
  out.features_pooled = g.features_pooled;
  out.masks.assign(s, TokenMask(g.height, g.width));
  out.features.assign(s * g.dim, 0.0F);

  std::vector<std::uint32_t> children(s, 0);
  std::vector<std::uint32_t> only_child(s, 0);
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const std::uint32_t k = a.map[i];
    out.masks[k] |= g.masks[i];
    if (children[k]++ == 0) only_child[k] = static_cast<std::uint32_t>(i);
  }
  for (std::size_t k = 0; k < s; ++k) {
    if (children[k] == 1) {
      const auto src = g.feature(only_child[k]);
      std::copy(src.begin(), src.end(), out.feature(k).begin());
    } else if (g.features_pooled) {
      out.features_pooled = false;
    }
  }

  out.edges.reserve(g.edges.size());
  for (const Edge& e : g.edges) {
    std::uint32_t k = a.map[e.a];
    std::uint32_t l = a.map[e.b];
    if (k == l) continue;
    if (k > l) std::swap(k, l);
    out.edges.push_back({k, l});
  }
  std::sort(out.edges.begin(), out.edges.end());
  out.edges.erase(std::unique(out.edges.begin(), out.edges.end()),
                  out.edges.end());
  return out;
}

}  // namespace uniap
