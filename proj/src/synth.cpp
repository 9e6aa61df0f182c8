#include "uniap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "uniap/error.hpp"

namespace uniap {

namespace {

struct Rect {
  std::size_t row0, col0, rows, cols;
  std::size_t area() const { return rows * cols; }
};

}  // namespace

SynthResult synth_generate(const SynthParams& params) {
  const std::size_t h = params.height;
  const std::size_t w = params.width;
  const std::size_t d = params.dim;
  const std::size_t k = params.regions;
  if (h == 0 || w == 0 || d == 0) {
    throw Error(ErrorCode::kInvalidParams, "grid and dim must be positive");
  }
  if (k < 1 || k > h * w) {
    throw Error(ErrorCode::kInvalidParams,
                "regions must lie in [1, " + std::to_string(h * w) + "]");
  }
  if (d < k) {
    throw Error(ErrorCode::kInvalidParams,
                "dim " + std::to_string(d) + " < regions " + std::to_string(k));
  }
  if (!(params.noise_std >= 0.0) || !(params.boundary_noise >= 0.0)) {
    throw Error(ErrorCode::kInvalidParams,
                "noise_std and boundary_noise must be non-negative");
  }

  std::mt19937_64 rng(params.seed);

  // Cut the largest rectangle each round, across its longer side when it
  // has one, at a position kept away from the edges.
  std::vector<Rect> rects{{0, 0, h, w}};
  while (rects.size() < k) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < rects.size(); ++i) {
      if (rects[i].area() > rects[pick].area()) pick = i;
    }
    const Rect r = rects[pick];
    bool cut_rows;
    if (r.rows >= 2 && r.cols >= 2) {
      std::bernoulli_distribution coin(static_cast<double>(r.rows) /
                                       static_cast<double>(r.rows + r.cols));
      cut_rows = coin(rng);
    } else {
      cut_rows = r.rows >= 2;
    }
    const std::size_t len = cut_rows ? r.rows : r.cols;
    const std::size_t margin = std::max<std::size_t>(1, len / 4);
    const std::size_t lo = std::min(margin, len - 1);
    const std::size_t hi = std::max(lo, len - margin);
    std::uniform_int_distribution<std::size_t> at(lo, hi);
    const std::size_t cut = at(rng);
    Rect a = r;
    Rect b = r;
    if (cut_rows) {
      a.rows = cut;
      b.row0 += cut;
      b.rows -= cut;
    } else {
      a.cols = cut;
      b.col0 += cut;
      b.cols -= cut;
    }
    rects[pick] = a;
    rects.push_back(b);
  }
  std::sort(rects.begin(), rects.end(), [](const Rect& x, const Rect& y) {
    return x.row0 != y.row0 ? x.row0 < y.row0 : x.col0 < y.col0;
  });

  std::vector<std::size_t> axes(d);
  std::iota(axes.begin(), axes.end(), 0);
  std::shuffle(axes.begin(), axes.end(), rng);
  axes.resize(k);

  SynthResult out;
  out.prototype_axes = axes;
  std::vector<std::size_t> label(h * w, 0);
  for (std::size_t i = 0; i < k; ++i) {
    TokenMask m(h, w);
    for (std::size_t r = rects[i].row0; r < rects[i].row0 + rects[i].rows; ++r) {
      for (std::size_t c = rects[i].col0; c < rects[i].col0 + rects[i].cols; ++c) {
        m.set(r * w + c);
        label[r * w + c] = i;
      }
    }
    out.regions.push_back(std::move(m));
  }

  // Drawn from their own stream so the other features do not depend on
  // whether contamination is on.
  std::vector<std::vector<double>> shared(k * k);
  if (params.boundary_noise > 0.0) {
    std::mt19937_64 side(params.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> unit(0.0, 1.0);
    for (std::size_t a = 0; a < k; ++a) {
      for (std::size_t b = a + 1; b < k; ++b) {
        auto& v = shared[a * k + b];
        v.resize(d);
        double n = 0.0;
        for (double& x : v) {
          x = unit(side);
          n += x * x;
        }
        for (double& x : v) x /= std::sqrt(n);
      }
    }
  }

  std::normal_distribution<double> noise(0.0, params.noise_std);
  std::vector<double> row(d);
  std::vector<float> data(h * w * d);
  for (std::size_t p = 0; p < h * w; ++p) {
    std::fill(row.begin(), row.end(), 0.0);
    row[axes[label[p]]] = 1.0;
    if (params.boundary_noise > 0.0) {
      const std::size_t r = p / w;
      const std::size_t c = p % w;
      const std::size_t nbrs[4] = {r > 0 ? p - w : p, r + 1 < h ? p + w : p,
                                   c > 0 ? p - 1 : p, c + 1 < w ? p + 1 : p};
      std::vector<bool> seen(k, false);
      for (std::size_t q : nbrs) {
        const std::size_t other = label[q];
        if (other == label[p] || seen[other]) continue;
        seen[other] = true;
        const auto& dir = shared[std::min(other, label[p]) * k + std::max(other, label[p])];
        for (std::size_t j = 0; j < d; ++j) row[j] += params.boundary_noise * dir[j];
      }
    }
    if (params.noise_std > 0.0) {
      for (double& v : row) v += noise(rng);
    }
    double n = 0.0;
    for (double v : row) n += v * v;
    n = std::sqrt(n);
    for (std::size_t j = 0; j < d; ++j) {
      data[p * d + j] = static_cast<float>(row[j] / n);
    }
  }
  // Rounding to float can leave a row a few ulps off unit norm; that is far
  // inside the 1e-4 tolerance the normalized flag checks.
  out.features = FeatureMap(h, w, d, std::move(data), true);
  return out;
}

}  // namespace uniap
