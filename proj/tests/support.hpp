#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "uniap/graph.hpp"
#include "uniap/pooling.hpp"
#include "uniap/tensor.hpp"
#include "uniap/token_mask.hpp"

namespace testing {

using uniap::FeatureMap;
using uniap::TokenMask;

inline FeatureMap make_map(std::size_t h, std::size_t w, std::size_t d,
                           const std::vector<std::vector<float>>& rows,
                           bool normalized = true) {
  std::vector<float> data;
  for (const auto& r : rows) data.insert(data.end(), r.begin(), r.end());
  return FeatureMap(h, w, d, std::move(data), normalized);
}

inline FeatureMap random_map(std::size_t h, std::size_t w, std::size_t d,
                             std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<float> data(h * w * d);
  for (std::size_t p = 0; p < h * w; ++p) {
    std::vector<double> row(d);
    double norm = 0.0;
    for (double& v : row) {
      v = n(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < d; ++k) {
      data[p * d + k] = static_cast<float>(row[k] / norm);
    }
  }
  return FeatureMap(h, w, d, std::move(data), true);
}

// Piecewise map: a random label field of blobs, each label with its own
// random direction, plus noise. Produces merges at several thresholds.
inline FeatureMap blob_map(std::size_t h, std::size_t w, std::size_t d,
                           std::size_t labels, double noise,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, h * w - 1);
  std::vector<std::size_t> seeds;
  for (std::size_t i = 0; i < labels; ++i) seeds.push_back(pick(rng));
  std::vector<std::vector<double>> proto(labels, std::vector<double>(d));
  for (auto& p : proto) {
    for (double& v : p) v = n(rng);
  }
  std::vector<float> data(h * w * d);
  for (std::size_t p = 0; p < h * w; ++p) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < labels; ++i) {
      const double dr = double(p / w) - double(seeds[i] / w);
      const double dc = double(p % w) - double(seeds[i] % w);
      if (dr * dr + dc * dc < best_d) {
        best_d = dr * dr + dc * dc;
        best = i;
      }
    }
    std::vector<double> row = proto[best];
    double norm = 0.0;
    for (double& v : row) {
      v += noise * n(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < d; ++k) {
      data[p * d + k] = static_cast<float>(row[k] / norm);
    }
  }
  return FeatureMap(h, w, d, std::move(data), true);
}

inline bool four_connected(const TokenMask& m) {
  if (m.empty()) return true;
  const std::size_t w = m.width();
  const std::size_t h = m.height();
  std::vector<std::uint8_t> seen(m.size(), 0);
  std::deque<std::size_t> q{m.first()};
  seen[m.first()] = 1;
  std::size_t reached = 0;
  while (!q.empty()) {
    const std::size_t p = q.front();
    q.pop_front();
    ++reached;
    const std::size_t r = p / w;
    const std::size_t c = p % w;
    std::vector<std::size_t> nbrs;
    if (r > 0) nbrs.push_back(p - w);
    if (r + 1 < h) nbrs.push_back(p + w);
    if (c > 0) nbrs.push_back(p - 1);
    if (c + 1 < w) nbrs.push_back(p + 1);
    for (std::size_t n : nbrs) {
      if (m.test(n) && !seen[n]) {
        seen[n] = 1;
        q.push_back(n);
      }
    }
  }
  return reached == m.area();
}

// Every token covered exactly once.
inline bool is_partition(const std::vector<TokenMask>& masks, std::size_t h,
                         std::size_t w) {
  std::vector<int> cover(h * w, 0);
  for (const auto& m : masks) {
    if (m.height() != h || m.width() != w || m.empty()) return false;
    m.for_each([&](std::size_t t) { ++cover[t]; });
  }
  return std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; });
}

// Every fine mask lies inside exactly one coarse mask and every coarse mask
// is the union of the fine masks inside it.
inline bool refines(const std::vector<TokenMask>& fine,
                    const std::vector<TokenMask>& coarse) {
  std::vector<TokenMask> rebuilt;
  for (const auto& c : coarse) rebuilt.emplace_back(c.height(), c.width());
  for (const auto& f : fine) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < coarse.size(); ++i) {
      const std::size_t inter = f.intersection_count(coarse[i]);
      if (inter == 0) continue;
      if (inter != f.area()) return false;
      ++hits;
      rebuilt[i] |= f;
    }
    if (hits != 1) return false;
  }
  return rebuilt == coarse;
}

inline std::vector<std::vector<std::size_t>> canonical(
    const std::vector<TokenMask>& masks) {
  std::vector<std::vector<std::size_t>> out;
  for (const auto& m : masks) out.push_back(m.indices());
  std::sort(out.begin(), out.end());
  return out;
}

// Groups of a node → label map, each sorted, groups ordered by first member.
inline std::vector<std::vector<std::uint32_t>> groups_of(
    const std::vector<std::uint32_t>& map) {
  std::vector<std::vector<std::uint32_t>> g;
  std::vector<std::int64_t> slot;
  for (std::uint32_t i = 0; i < map.size(); ++i) {
    if (map[i] >= slot.size()) slot.resize(map[i] + 1, -1);
    if (slot[map[i]] < 0) {
      slot[map[i]] = static_cast<std::int64_t>(g.size());
      g.emplace_back();
    }
    g[static_cast<std::size_t>(slot[map[i]])].push_back(i);
  }
  return g;
}

// Direct affinity profile: Σ_k a_k F[p][k] in long double.
inline std::vector<long double> brute_profile(const FeatureMap& fm,
                                              const std::vector<double>& agg) {
  std::vector<long double> out(fm.token_count());
  for (std::size_t p = 0; p < fm.token_count(); ++p) {
    long double s = 0;
    const auto row = fm.row(p);
    for (std::size_t k = 0; k < fm.dim(); ++k) s += (long double)agg[k] * row[k];
    out[p] = s;
  }
  return out;
}

inline std::vector<double> brute_mean(const FeatureMap& fm, const TokenMask& m) {
  std::vector<long double> acc(fm.dim(), 0);
  m.for_each([&](std::size_t p) {
    for (std::size_t k = 0; k < fm.dim(); ++k) acc[k] += fm.row(p)[k];
  });
  std::vector<double> out(fm.dim());
  for (std::size_t k = 0; k < fm.dim(); ++k) {
    out[k] = double(acc[k] / (long double)m.area());
  }
  return out;
}

// Weighted vote written straight from the formula: softmax over tokens of
// the mask-sum profile divided by sigma, then the weighted feature average,
// L2-normalized.
inline std::vector<double> brute_vote(const FeatureMap& fm, const TokenMask& m,
                                      double sigma) {
  std::vector<double> sum(fm.dim(), 0.0);
  m.for_each([&](std::size_t p) {
    for (std::size_t k = 0; k < fm.dim(); ++k) sum[k] += fm.row(p)[k];
  });
  const auto prof = brute_profile(fm, sum);
  long double peak = *std::max_element(prof.begin(), prof.end());
  std::vector<long double> acc(fm.dim(), 0);
  long double total = 0;
  for (std::size_t p = 0; p < fm.token_count(); ++p) {
    const long double wgt = std::exp((prof[p] - peak) / sigma);
    total += wgt;
    for (std::size_t k = 0; k < fm.dim(); ++k) acc[k] += wgt * fm.row(p)[k];
  }
  long double norm = 0;
  for (auto& v : acc) {
    v /= total;
    norm += v * v;
  }
  norm = std::sqrt(norm);
  std::vector<double> out(fm.dim());
  for (std::size_t k = 0; k < fm.dim(); ++k) out[k] = double(acc[k] / norm);
  return out;
}

// Edge score written straight from the definition.
inline double brute_score(const FeatureMap& fm, std::span<const float> fa,
                          std::span<const float> fb, const TokenMask& ma,
                          const TokenMask& mb, double wf, double ws) {
  long double sf = 0;
  for (std::size_t k = 0; k < fa.size(); ++k) sf += (long double)fa[k] * fb[k];
  if (ws == 0.0) return double(sf);
  const auto pa = brute_profile(fm, brute_mean(fm, ma));
  const auto pb = brute_profile(fm, brute_mean(fm, mb));
  long double mad = 0;
  for (std::size_t p = 0; p < pa.size(); ++p) mad += std::fabs(pa[p] - pb[p]);
  mad /= (long double)pa.size();
  return double(wf * sf + ws * (1 - mad));
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() /
           ("uniap-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

}  // namespace testing
