#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "uniap/graph.hpp"
#include "uniap/tensor.hpp"
#include "uniap/token_mask.hpp"

namespace uniap {

class WorkerPool;

struct UniapConfig {
  // Strictly decreasing; one pyramid level per entry.
  std::vector<double> thresholds{0.8, 0.7, 0.6, 0.5, 0.4};
  double sigma = 0.07;
  double omega_f = 0.6;
  double omega_s = 0.4;
  // Minimum mask area (tokens) for a mask to be emitted.
  std::size_t phi = 5;
  // Masks overlapping an earlier kept mask of the same kind above this IoU
  // are dropped.
  double dedup_iou = 0.9;
  // Graph level from which the spatial term is used; below it edges score by
  // feature similarity alone.
  int spatial_from_level = 0;

  // Throws InvalidConfig naming the violated constraint.
  void validate() const;
};

enum class MaskKind : std::uint8_t { kInstance, kSemantic };

struct PseudoMask {
  TokenMask mask;
  std::vector<float> feature;
  int level = 0;
  MaskKind kind = MaskKind::kInstance;
};

struct PyramidLevel {
  double tau = 0.0;
  std::vector<PseudoMask> instance;
  std::vector<PseudoMask> semantic;
};

struct MaskPyramid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<PyramidLevel> levels;
};

struct SemanticNode {
  TokenMask mask;
  std::vector<float> feature;
};

struct PoolLayerResult {
  Graph instance;
  std::vector<SemanticNode> semantic;
};

// Per-layer diagnostics collected by run_uniap.
struct LayerTrace {
  double tau = 0.0;
  // Live instance-graph masks at the layer's fixpoint (before φ and dedup).
  std::vector<TokenMask> partition;
  std::size_t semantic_nodes = 0;
  std::size_t instance_iterations = 0;
  std::size_t semantic_iterations = 0;
  // Range of fully computed edge scores so far. Edges ruled out by the
  // feature term alone are not counted; ±inf when none were computed.
  double min_score = 0.0;
  double max_score = 0.0;
  double seconds = 0.0;
};

struct RunTrace {
  std::vector<LayerTrace> layers;
};

// Combined feature/spatial similarity for every edge of g, in edge order.
std::vector<double> edge_similarities(const Graph& g, const FeatureMap& fm,
                                      const UniapConfig& cfg,
                                      WorkerPool* pool = nullptr);

// Recomputes every supernode feature as the L2-normalized softmax-weighted
// vote of all tokens, weighted by the affinity of the node's mask sum.
Graph update_features(const Graph& g, const FeatureMap& fm, double sigma,
                      WorkerPool* pool = nullptr);

// Score, mark edges ≥ tau, label components, merge, refresh features;
// repeat until no edge reaches tau.
Graph coarsen_to_fixpoint(const Graph& g, const FeatureMap& fm, double tau,
                          const UniapConfig& cfg, WorkerPool* pool = nullptr);

// One pyramid layer: instance pooling on g's adjacency, then semantic pooling
// on a fully connected copy of the result.
PoolLayerResult pool_layer(const Graph& g, const FeatureMap& fm, double tau,
                           const UniapConfig& cfg, WorkerPool* pool = nullptr);

MaskPyramid run_uniap(const FeatureMap& fm, const UniapConfig& cfg,
                      WorkerPool* pool = nullptr, RunTrace* trace = nullptr);

// Greedy scan in input order; a mask is dropped when its IoU with an already
// kept mask of the same kind exceeds dedup_iou.
std::vector<PseudoMask> dedup_masks(const std::vector<PseudoMask>& masks,
                                    double dedup_iou);

}  // namespace uniap
