#pragma once

#include <cstddef>
#include <vector>

#include "uniap/pooling.hpp"
#include "uniap/tensor.hpp"

namespace uniap {

// Reference timing: seconds per 512×512 image on the authors' GPU with
// ViT-base/8 features. Printed for context only.
inline constexpr double kReferenceSecondsPerImage = 0.045;

struct BenchReport {
  std::size_t repeats = 0;
  std::size_t workers = 1;
  double median_seconds = 0.0;  // at `workers`
  double min_seconds = 0.0;
  double single_median_seconds = 0.0;  // at one worker
  double single_min_seconds = 0.0;
  double speedup = 1.0;  // single median / multi median
  std::vector<double> layer_median_seconds;  // at `workers`
  bool outputs_identical = true;
};

// Times run_uniap `repeats` times at one worker and `repeats` times at
// `workers` (once when workers == 1) and checks every run produced the same
// mask JSON. Throws InvalidParams when repeats < 3 or workers == 0.
BenchReport bench_run(const FeatureMap& fm, const UniapConfig& cfg,
                      std::size_t repeats, std::size_t workers);

}  // namespace uniap
