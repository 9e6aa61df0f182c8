#include "uniap/evaluate.hpp"

#include <string>

#include "uniap/error.hpp"
#include "uniap/maskops.hpp"

namespace uniap {

EvalReport eval_iou(const MaskPyramid& predicted,
                    const std::vector<TokenMask>& truth) {
  for (const TokenMask& t : truth) {
    if (t.height() != predicted.height || t.width() != predicted.width) {
      throw Error(ErrorCode::kGridMismatch,
                  "truth grid " + std::to_string(t.height()) + "x" +
                      std::to_string(t.width()) + " vs prediction " +
                      std::to_string(predicted.height) + "x" +
                      std::to_string(predicted.width));
    }
  }
  EvalReport report;
  report.per_truth.resize(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    TruthMatch& best = report.per_truth[i];
    for (const PyramidLevel& level : predicted.levels) {
      for (const auto* list : {&level.instance, &level.semantic}) {
        for (const PseudoMask& m : *list) {
          const double iou = mask_iou(truth[i], m.mask);
          if (iou > best.best_iou || best.level < 0) {
            best = {iou, m.level, m.kind};
          }
        }
      }
    }
    report.mean_best_iou += best.best_iou;
  }
  if (!truth.empty()) {
    report.mean_best_iou /= static_cast<double>(truth.size());
  }
  return report;
}

}  // namespace uniap
