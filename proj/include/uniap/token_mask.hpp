#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace uniap {

// Binary mask over an H×W token grid, stored as a packed bitset in row-major
// token order. Tracks its population count.
class TokenMask {
 public:
  TokenMask() = default;
  TokenMask(std::size_t height, std::size_t width);

  static TokenMask singleton(std::size_t height, std::size_t width,
                             std::size_t token);
  static TokenMask full(std::size_t height, std::size_t width);
  static TokenMask from_indices(std::size_t height, std::size_t width,
                                std::span<const std::size_t> tokens);
  // bits.size() must equal height * width.
  static TokenMask from_bits(std::size_t height, std::size_t width,
                             std::span<const std::uint8_t> bits);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return height_ * width_; }
  std::size_t area() const noexcept { return area_; }
  bool empty() const noexcept { return area_ == 0; }

  bool test(std::size_t token) const noexcept {
    return (words_[token >> 6] >> (token & 63)) & 1U;
  }
  void set(std::size_t token);
  void reset(std::size_t token);

  // In-place union. Throws LengthMismatch on grid mismatch.
  TokenMask& operator|=(const TokenMask& other);

  std::size_t intersection_count(const TokenMask& other) const;
  std::size_t union_count(const TokenMask& other) const;

  std::vector<std::size_t> indices() const;
  std::vector<std::uint8_t> to_bits() const;

  // Smallest set token index, or size() when empty.
  std::size_t first() const noexcept;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits != 0) {
        const int bit = std::countr_zero(bits);
        fn(w * 64 + static_cast<std::size_t>(bit));
        bits &= bits - 1;
      }
    }
  }

  std::span<const std::uint64_t> words() const noexcept { return words_; }

  bool same_grid(const TokenMask& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const TokenMask& a, const TokenMask& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ &&
           a.words_ == b.words_;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t area_ = 0;
  std::vector<std::uint64_t> words_;
};

}  // namespace uniap
