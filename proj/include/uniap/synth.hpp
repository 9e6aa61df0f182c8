#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "uniap/tensor.hpp"
#include "uniap/token_mask.hpp"

namespace uniap {

struct SynthParams {
  std::size_t height = 32;
  std::size_t width = 32;
  std::size_t dim = 64;
  std::size_t regions = 6;
  double noise_std = 0.05;
  std::uint64_t seed = 42;
  // Each pair of touching regions draws one random unit direction. Tokens
  // with a 4-neighbour across that boundary, on either side, get the
  // direction times this scale added before normalization. 0 disables it.
  double boundary_noise = 0.0;
};

struct SynthResult {
  FeatureMap features;             // L2-normalized
  std::vector<TokenMask> regions;  // ground truth, ordered by top-left corner
  std::vector<std::size_t> prototype_axes;  // basis index per region
};

// Splits the grid into axis-aligned rectangles by seeded recursive cuts and
// gives each region a distinct standard-basis prototype plus Gaussian noise.
// Deterministic for a fixed seed. Throws InvalidParams.
SynthResult synth_generate(const SynthParams& params);

}  // namespace uniap
