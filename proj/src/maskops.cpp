#include "uniap/maskops.hpp"

#include <string>

#include "uniap/error.hpp"

namespace uniap {

double mask_iou(const TokenMask& a, const TokenMask& b) {
  const std::size_t inter = a.intersection_count(b);
  const std::size_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double mask_dice(const TokenMask& a, const TokenMask& b) {
  const std::size_t inter = a.intersection_count(b);
  const std::size_t total = a.area() + b.area();
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

void validate_box(const CropBox& box, std::size_t height, std::size_t width) {
  if (box.rows == 0 || box.cols == 0 || box.row0 >= height ||
      box.col0 >= width || box.rows > height - box.row0 ||
      box.cols > width - box.col0) {
    throw Error(ErrorCode::kBoxOutOfRange,
                "box (" + std::to_string(box.row0) + ", " +
                    std::to_string(box.col0) + ", " +
                    std::to_string(box.rows) + ", " +
                    std::to_string(box.cols) + ") on a " +
                    std::to_string(height) + "x" + std::to_string(width) +
                    " grid");
  }
}

std::optional<TokenMask> crop_mask(const TokenMask& m, const CropBox& box) {
  validate_box(box, m.height(), m.width());
  TokenMask out(box.rows, box.cols);
  for (std::size_t r = 0; r < box.rows; ++r) {
    const std::size_t src = (box.row0 + r) * m.width() + box.col0;
    for (std::size_t c = 0; c < box.cols; ++c) {
      if (m.test(src + c)) out.set(r * box.cols + c);
    }
  }
  if (out.empty()) return std::nullopt;
  return out;
}

RleMask rle_encode(const TokenMask& m) {
  RleMask r{m.height(), m.width(), {}};
  bool current = false;
  std::uint64_t run = 0;
  for (std::size_t t = 0; t < m.size(); ++t) {
    if (m.test(t) != current) {
      r.counts.push_back(run);
      run = 0;
      current = !current;
    }
    ++run;
  }
  r.counts.push_back(run);
  return r;
}

TokenMask rle_decode(const RleMask& r) {
  const std::size_t n = r.height * r.width;
  if (r.counts.empty()) {
    throw Error(ErrorCode::kMalformedRle, "no runs");
  }
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    if (i > 0 && r.counts[i] == 0) {
      throw Error(ErrorCode::kMalformedRle,
                  "zero-length run at position " + std::to_string(i));
    }
    total += r.counts[i];
    if (total > n) break;
  }
  if (total != n) {
    throw Error(ErrorCode::kMalformedRle,
                "runs cover " + std::to_string(total) + " tokens, grid has " +
                    std::to_string(n));
  }
  TokenMask m(r.height, r.width);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < r.counts.size(); ++i) {
    const auto len = static_cast<std::size_t>(r.counts[i]);
    if (i % 2 == 1) {
      for (std::size_t t = pos; t < pos + len; ++t) m.set(t);
    }
    pos += len;
  }
  return m;
}

}  // namespace uniap
