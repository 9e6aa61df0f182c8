#include "uniap/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "uniap/error.hpp"
#include "uniap/parallel.hpp"

namespace uniap {

namespace {

double row_norm(std::span<const float> row) {
  double sum = 0.0;
  for (float v : row) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

}  // namespace

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t dim,
                       std::vector<float> data, bool normalized)
    : height_(height),
      width_(width),
      dim_(dim),
      data_(std::move(data)),
      normalized_(normalized) {
  if (height_ == 0 || width_ == 0 || dim_ == 0) {
    throw Error(ErrorCode::kDimensionMismatch,
                "feature map extents must be positive");
  }
  if (data_.size() != height_ * width_ * dim_) {
    throw Error(ErrorCode::kDimensionMismatch,
                "expected " + std::to_string(height_ * width_ * dim_) +
                    " values, got " + std::to_string(data_.size()));
  }
  if (normalized_) {
    for (std::size_t p = 0; p < token_count(); ++p) {
      const double n = row_norm(row(p));
      if (std::abs(n - 1.0) > 1e-4) {
        throw Error(ErrorCode::kNotNormalized,
                    "row " + std::to_string(p) + " has norm " +
                        std::to_string(n));
      }
    }
  }
}

FeatureMap l2_normalize_rows(const FeatureMap& fm) {
  std::vector<float> out(fm.data().begin(), fm.data().end());
  const std::size_t d = fm.dim();
  for (std::size_t p = 0; p < fm.token_count(); ++p) {
    const double n = row_norm(fm.row(p));
    if (!(n >= kMinRowNorm)) {
      throw Error(ErrorCode::kDegenerateFeature,
                  "row " + std::to_string(p) + " has norm " +
                      std::to_string(n));
    }
    for (std::size_t k = 0; k < d; ++k) {
      out[p * d + k] = static_cast<float>(fm.row(p)[k] / n);
    }
  }
  return FeatureMap(fm.height(), fm.width(), d, std::move(out), true);
}

std::vector<double> row_softmax(std::span<const double> values,
                                double temperature) {
  if (!(temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidTemperature,
                "temperature " + std::to_string(temperature));
  }
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  const double peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = std::exp((values[i] - peak) / temperature);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

std::vector<double> mask_sum_feature(const FeatureMap& fm,
                                     const TokenMask& mask) {
  if (mask.size() != fm.token_count()) {
    throw Error(ErrorCode::kLengthMismatch,
                "mask length " + std::to_string(mask.size()) +
                    " vs token count " + std::to_string(fm.token_count()));
  }
  if (mask.empty()) throw Error(ErrorCode::kEmptyMask, "mask has no tokens");
  std::vector<double> sum(fm.dim(), 0.0);
  mask.for_each([&](std::size_t p) {
    const auto r = fm.row(p);
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += r[k];
  });
  return sum;
}

std::vector<double> mean_mask_feature(const FeatureMap& fm,
                                      const TokenMask& mask) {
  std::vector<double> mean = mask_sum_feature(fm, mask);
  const double inv = 1.0 / static_cast<double>(mask.area());
  for (double& v : mean) v *= inv;
  return mean;
}

AffinityProfile affinity_profile(const FeatureMap& fm,
                                 std::span<const double> aggregate) {
  if (aggregate.size() != fm.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "aggregate length " + std::to_string(aggregate.size()) +
                    " vs feature dim " + std::to_string(fm.dim()));
  }
  AffinityProfile profile;
  profile.values.resize(fm.token_count());
  kernels::profiles(fm, aggregate, 1, profile.values);
  return profile;
}

namespace kernels {

namespace {

// Eight double lanes; lane j accumulates the products at k ≡ j (mod 8).
// Every path below follows that order and the same final tree, so a given
// (aggregate, token) pair rounds identically whichever path computes it.
typedef double Lanes __attribute__((vector_size(64)));
constexpr std::size_t kLanes = 8;
constexpr std::size_t kAggTile = 4;
constexpr std::size_t kTokenTile = 4;

inline Lanes load(const double* p) noexcept {
  Lanes v;
  __builtin_memcpy(&v, p, sizeof(v));
  return v;
}

inline double reduce(const Lanes& acc) noexcept {
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
         ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// NA aggregates × NT tokens, tokens already widened to double.
template <std::size_t NA, std::size_t NT, typename Out>
void tile(const double* const* aggs, const double* const* toks, std::size_t d,
          Out* const* out, std::size_t col) noexcept {
  Lanes acc[NA][NT] = {};
  const std::size_t body = d - d % kLanes;
  for (std::size_t k = 0; k < body; k += kLanes) {
    Lanes t[NT];
    for (std::size_t j = 0; j < NT; ++j) t[j] = load(toks[j] + k);
    for (std::size_t i = 0; i < NA; ++i) {
      const Lanes a = load(aggs[i] + k);
      for (std::size_t j = 0; j < NT; ++j) acc[i][j] += a * t[j];
    }
  }
  for (std::size_t k = body; k < d; ++k) {
    for (std::size_t i = 0; i < NA; ++i) {
      for (std::size_t j = 0; j < NT; ++j) {
        acc[i][j][k - body] += aggs[i][k] * toks[j][k];
      }
    }
  }
  for (std::size_t i = 0; i < NA; ++i) {
    for (std::size_t j = 0; j < NT; ++j) {
      out[i][col + j] = static_cast<Out>(reduce(acc[i][j]));
    }
  }
}

template <std::size_t NA, std::size_t NT = kTokenTile, typename Out>
void tile_tokens(std::size_t nt, const double* const* aggs,
                 const double* const* toks, std::size_t d, Out* const* out,
                 std::size_t col) noexcept {
  if constexpr (NT > 1) {
    if (nt < NT) {
      tile_tokens<NA, NT - 1>(nt, aggs, toks, d, out, col);
      return;
    }
  }
  tile<NA, NT>(aggs, toks, d, out, col);
}

template <std::size_t NA = kAggTile, typename Out>
void dispatch(std::size_t na, std::size_t nt, const double* const* aggs,
              const double* const* toks, std::size_t d, Out* const* out,
              std::size_t col) noexcept {
  if constexpr (NA > 1) {
    if (na < NA) {
      dispatch<NA - 1>(na, nt, aggs, toks, d, out, col);
      return;
    }
  }
  tile_tokens<NA>(nt, aggs, toks, d, out, col);
}

// out[i * nb + j] = dot(a row i, b row j). Rows of b are widened to double
// in slabs that every row of a sweeps while they sit in cache.
template <typename Out>
void cross(std::span<const double> a, std::size_t na, const float* b,
           std::size_t nb, std::size_t d, Out* out, WorkerPool* pool) {
  constexpr std::size_t kBlock = 128;
  const std::size_t blocks = (nb + kBlock - 1) / kBlock;
  parallel_for(pool, blocks, [&](std::size_t begin, std::size_t end) {
    std::vector<double> slab(kBlock * d);
    for (std::size_t blk = begin; blk < end; ++blk) {
      const std::size_t p0 = blk * kBlock;
      const std::size_t p1 = std::min(nb, p0 + kBlock);
      std::copy(b + p0 * d, b + p1 * d, slab.begin());
      for (std::size_t a0 = 0; a0 < na; a0 += kAggTile) {
        const std::size_t n = std::min(kAggTile, na - a0);
        const double* rows[kAggTile];
        Out* dst[kAggTile];
        for (std::size_t i = 0; i < n; ++i) {
          rows[i] = a.data() + (a0 + i) * d;
          dst[i] = out + (a0 + i) * nb;
        }
        for (std::size_t t0 = p0; t0 < p1; t0 += kTokenTile) {
          const std::size_t nt = std::min(kTokenTile, p1 - t0);
          const double* cols[kTokenTile];
          for (std::size_t j = 0; j < nt; ++j) {
            cols[j] = slab.data() + (t0 + j - p0) * d;
          }
          dispatch(n, nt, rows, cols, d, dst, t0);
        }
      }
    }
  });
}

}  // namespace

namespace {

typedef float FloatLanes __attribute__((vector_size(32)));

inline Lanes widen(const float* p) noexcept {
  FloatLanes v;
  __builtin_memcpy(&v, p, sizeof(v));
  return __builtin_convertvector(v, Lanes);
}

inline Lanes lanes_of(const double* p) noexcept { return load(p); }
inline Lanes lanes_of(const float* p) noexcept { return widen(p); }

template <typename A>
double dot_impl(const A* a, const float* b, std::size_t n) noexcept {
  Lanes acc = {};
  const std::size_t body = n - n % kLanes;
  for (std::size_t k = 0; k < body; k += kLanes) {
    acc += lanes_of(a + k) * widen(b + k);
  }
  for (std::size_t k = body; k < n; ++k) {
    acc[k - body] += static_cast<double>(a[k]) * static_cast<double>(b[k]);
  }
  return reduce(acc);
}

}  // namespace

double dot(std::span<const double> a, std::span<const float> b) noexcept {
  return dot_impl(a.data(), b.data(), a.size());
}

double dot(std::span<const float> a, std::span<const float> b) noexcept {
  return dot_impl(a.data(), b.data(), a.size());
}

void profiles(const FeatureMap& fm, std::span<const double> aggregates,
              std::size_t count, std::span<float> out, WorkerPool* pool) {
  cross(aggregates, count, fm.data().data(), fm.token_count(), fm.dim(),
        out.data(), pool);
}

void dots(std::span<const double> a, std::size_t na, std::span<const float> b,
          std::size_t nb, std::size_t d, std::span<double> out,
          WorkerPool* pool) {
  cross(a, na, b.data(), nb, d, out.data(), pool);
}

}  // namespace kernels

}  // namespace uniap
