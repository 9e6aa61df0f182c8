#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "uniap/token_mask.hpp"

namespace uniap {

class WorkerPool;

// Dense H×W×d per-token feature map. Rows are tokens in row-major grid order.
class FeatureMap {
 public:
  FeatureMap() = default;
  // Throws DimensionMismatch if data.size() != height*width*dim or any extent
  // is zero. With normalized = true, every row must be unit-norm within 1e-4
  // (NotNormalized otherwise).
  FeatureMap(std::size_t height, std::size_t width, std::size_t dim,
             std::vector<float> data, bool normalized = false);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t token_count() const noexcept { return height_ * width_; }
  bool normalized() const noexcept { return normalized_; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> row(std::size_t token) const noexcept {
    return {data_.data() + token * dim_, dim_};
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  bool normalized_ = false;
};

// Inner products of one aggregate feature against every token feature; one
// row-combination of A = F Fᵀ.
struct AffinityProfile {
  std::vector<float> values;
};

// Row norms below this are treated as all-zero features.
inline constexpr double kMinRowNorm = 1e-12;

FeatureMap l2_normalize_rows(const FeatureMap& fm);

// Softmax of values / temperature with max subtraction.
std::vector<double> row_softmax(std::span<const double> values,
                                double temperature);

std::vector<double> mask_sum_feature(const FeatureMap& fm,
                                     const TokenMask& mask);
std::vector<double> mean_mask_feature(const FeatureMap& fm,
                                      const TokenMask& mask);

AffinityProfile affinity_profile(const FeatureMap& fm,
                                 std::span<const double> aggregate);

namespace kernels {

// 64-bit accumulated dot product of a double vector with a float vector.
// Fixed summation order, so results do not depend on the caller.
double dot(std::span<const double> a, std::span<const float> b) noexcept;
double dot(std::span<const float> a, std::span<const float> b) noexcept;

// Writes profile values of `count` aggregates (count × d, row-major) into
// out (count × HW, row-major). Bitwise identical to calling dot() per pair.
void profiles(const FeatureMap& fm, std::span<const double> aggregates,
              std::size_t count, std::span<float> out,
              WorkerPool* pool = nullptr);

// out (na × nb, row-major) = a (na × d) times bᵀ (b is nb × d), each entry
// bitwise identical to dot() of the two rows.
void dots(std::span<const double> a, std::size_t na, std::span<const float> b,
          std::size_t nb, std::size_t d, std::span<double> out,
          WorkerPool* pool = nullptr);

}  // namespace kernels

}  // namespace uniap
