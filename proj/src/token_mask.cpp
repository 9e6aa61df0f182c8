#include "uniap/token_mask.hpp"

#include <string>

#include "uniap/error.hpp"

namespace uniap {

namespace {

void require_same_grid(const TokenMask& a, const TokenMask& b) {
  if (!a.same_grid(b)) {
    throw Error(ErrorCode::kLengthMismatch,
                "masks on " + std::to_string(a.height()) + "x" +
                    std::to_string(a.width()) + " and " +
                    std::to_string(b.height()) + "x" +
                    std::to_string(b.width()) + " grids");
  }
}

}  // namespace

TokenMask::TokenMask(std::size_t height, std::size_t width)
    : height_(height), width_(width), words_((height * width + 63) / 64, 0) {}

TokenMask TokenMask::singleton(std::size_t height, std::size_t width,
                               std::size_t token) {
  TokenMask m(height, width);
  m.set(token);
  return m;
}

TokenMask TokenMask::full(std::size_t height, std::size_t width) {
  TokenMask m(height, width);
  const std::size_t n = height * width;
  for (std::size_t w = 0; w < m.words_.size(); ++w) {
    const std::size_t lo = w * 64;
    const std::size_t count = n - lo < 64 ? n - lo : 64;
    m.words_[w] = count == 64 ? ~std::uint64_t{0}
                              : ((std::uint64_t{1} << count) - 1);
  }
  m.area_ = n;
  return m;
}

TokenMask TokenMask::from_indices(std::size_t height, std::size_t width,
                                  std::span<const std::size_t> tokens) {
  TokenMask m(height, width);
  for (std::size_t t : tokens) m.set(t);
  return m;
}

TokenMask TokenMask::from_bits(std::size_t height, std::size_t width,
                               std::span<const std::uint8_t> bits) {
  if (bits.size() != height * width) {
    throw Error(ErrorCode::kLengthMismatch,
                "bit vector of length " + std::to_string(bits.size()) +
                    " for a " + std::to_string(height) + "x" +
                    std::to_string(width) + " grid");
  }
  TokenMask m(height, width);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0) m.set(i);
  }
  return m;
}

void TokenMask::set(std::size_t token) {
  if (token >= size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "token " + std::to_string(token) + " outside grid of " +
                    std::to_string(size()));
  }
  const std::uint64_t bit = std::uint64_t{1} << (token & 63);
  std::uint64_t& word = words_[token >> 6];
  if ((word & bit) == 0) {
    word |= bit;
    ++area_;
  }
}

void TokenMask::reset(std::size_t token) {
  if (token >= size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                "token " + std::to_string(token) + " outside grid of " +
                    std::to_string(size()));
  }
  const std::uint64_t bit = std::uint64_t{1} << (token & 63);
  std::uint64_t& word = words_[token >> 6];
  if ((word & bit) != 0) {
    word &= ~bit;
    --area_;
  }
}

TokenMask& TokenMask::operator|=(const TokenMask& other) {
  require_same_grid(*this, other);
  std::size_t area = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    words_[w] |= other.words_[w];
    area += static_cast<std::size_t>(std::popcount(words_[w]));
  }
  area_ = area;
  return *this;
}

std::size_t TokenMask::intersection_count(const TokenMask& other) const {
  require_same_grid(*this, other);
  std::size_t count = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    count += static_cast<std::size_t>(std::popcount(words_[w] & other.words_[w]));
  }
  return count;
}

std::size_t TokenMask::union_count(const TokenMask& other) const {
  require_same_grid(*this, other);
  std::size_t count = 0;
  for (std::size_t w = 0; w < words_.size(); ++w) {
    count += static_cast<std::size_t>(std::popcount(words_[w] | other.words_[w]));
  }
  return count;
}

std::vector<std::size_t> TokenMask::indices() const {
  std::vector<std::size_t> out;
  out.reserve(area_);
  for_each([&](std::size_t t) { out.push_back(t); });
  return out;
}

std::vector<std::uint8_t> TokenMask::to_bits() const {
  std::vector<std::uint8_t> out(size(), 0);
  for_each([&](std::size_t t) { out[t] = 1; });
  return out;
}

std::size_t TokenMask::first() const noexcept {
  for (std::size_t w = 0; w < words_.size(); ++w) {
    if (words_[w] != 0) {
      return w * 64 + static_cast<std::size_t>(std::countr_zero(words_[w]));
    }
  }
  return size();
}

}  // namespace uniap
