#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "uniap/token_mask.hpp"

namespace uniap {

// Token-grid rectangle of a local view.
struct CropBox {
  std::size_t row0 = 0;
  std::size_t col0 = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;

  friend bool operator==(const CropBox&, const CropBox&) = default;
};

// Row-major run lengths, alternating zero-run / one-run, starting with a
// zero-run (which may be 0). Unlike COCO this walks rows, not columns.
struct RleMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint64_t> counts;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

// Both-empty masks score 1 for IoU and Dice. Throw LengthMismatch.
double mask_iou(const TokenMask& a, const TokenMask& b);
double mask_dice(const TokenMask& a, const TokenMask& b);

// Throws BoxOutOfRange unless the box is non-empty and inside the grid.
void validate_box(const CropBox& box, std::size_t height, std::size_t width);

// Restriction of m to the box, re-indexed to a rows×cols grid; nullopt when
// they do not intersect.
std::optional<TokenMask> crop_mask(const TokenMask& m, const CropBox& box);

RleMask rle_encode(const TokenMask& m);
// Throws MalformedRle.
TokenMask rle_decode(const RleMask& r);

}  // namespace uniap
