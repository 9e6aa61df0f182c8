#pragma once

#include <cstddef>
#include <vector>

#include "uniap/pooling.hpp"
#include "uniap/token_mask.hpp"

namespace uniap {

struct TruthMatch {
  double best_iou = 0.0;
  int level = -1;  // -1 when the pyramid is empty
  MaskKind kind = MaskKind::kInstance;
};

struct EvalReport {
  std::vector<TruthMatch> per_truth;
  double mean_best_iou = 0.0;
};

// Best IoU of every truth mask over all pyramid masks (any level, any kind).
// Throws GridMismatch.
EvalReport eval_iou(const MaskPyramid& predicted,
                    const std::vector<TokenMask>& truth);

}  // namespace uniap
