#include "uniap/pooling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "uniap/ccl.hpp"
#include "uniap/error.hpp"
#include "uniap/maskops.hpp"
#include "uniap/parallel.hpp"

namespace uniap {

void UniapConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kInvalidConfig, what);
  };
  if (thresholds.empty()) fail("thresholds must not be empty");
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    if (!(thresholds[t] > -1.0 && thresholds[t] < 1.0)) {
      fail("thresholds must lie in (-1, 1)");
    }
    if (t > 0 && !(thresholds[t] < thresholds[t - 1])) {
      fail("thresholds must be strictly decreasing");
    }
  }
  if (!(sigma > 0.0)) fail("sigma must be positive");
  if (!(omega_f >= 0.0) || !(omega_s >= 0.0)) {
    fail("omega_f and omega_s must be non-negative");
  }
  if (std::abs(omega_f + omega_s - 1.0) > 1e-9) {
    fail("omega_f + omega_s must equal 1");
  }
  if (phi < 1) fail("phi must be at least 1");
  if (!(dedup_iou > 0.0 && dedup_iou <= 1.0)) {
    fail("dedup_iou must lie in (0, 1]");
  }
  if (spatial_from_level < 0) fail("spatial_from_level must be non-negative");
}

namespace {

constexpr double kUnscored = std::numeric_limits<double>::quiet_NaN();
// Score slot of an edge whose feature term alone shows it cannot reach the
// threshold of the current fixpoint; the spatial term was never computed.
constexpr double kBelowTau = -std::numeric_limits<double>::infinity();

// Softmax weights below exp(-kWeightCutoff) of the peak are set to zero in
// the weighted vote; they sit far below double resolution of the sum.
constexpr double kWeightCutoff = 50.0;

double mean_abs_diff(const float* a, const float* b, std::size_t n) noexcept {
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {};
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes) {
    for (std::size_t j = 0; j < kLanes; ++j) {
      acc[j] += std::abs(static_cast<double>(a[i + j]) - b[i + j]);
    }
  }
  for (std::size_t i = body; i < n; ++i) {
    acc[i - body] += std::abs(static_cast<double>(a[i]) - b[i]);
  }
  const double total = ((acc[0] + acc[1]) + (acc[2] + acc[3])) +
                       ((acc[4] + acc[5]) + (acc[6] + acc[7]));
  return total / static_cast<double>(n);
}

void check_inputs(const Graph& g, const FeatureMap& fm) {
  if (!fm.normalized()) {
    throw Error(ErrorCode::kNotNormalized,
                "pooling needs an L2-normalized feature map");
  }
  if (g.token_count() != fm.token_count() || g.dim != fm.dim() ||
      g.height != fm.height()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "graph grid/dim does not match the feature map");
  }
}

// Coarsening state with caches that survive merges: a node's affinity
// profile depends only on its mask, and an edge's score only on its two
// endpoints' features and profiles. Both are carried across iterations for
// nodes a merge did not touch, which keeps results bitwise identical to
// recomputing everything.
class Coarsener {
 public:
  Coarsener(Graph g, const FeatureMap& fm, const UniapConfig& cfg,
            WorkerPool* pool)
      : fm_(fm), cfg_(cfg), pool_(pool), g_(std::move(g)) {
    check_inputs(g_, fm_);
    profiles_.assign(g_.num_nodes() * hw(), 0.0F);
    has_profile_.assign(g_.num_nodes(), 0);
    scores_.assign(g_.edges.size(), kUnscored);
    scores_spatial_ = spatial_active();
  }

  const Graph& graph() const noexcept { return g_; }
  Graph take_graph() && { return std::move(g_); }
  std::span<const double> scores() {
    score_missing(kBelowTau);
    return scores_;
  }

  double min_score() const noexcept { return min_score_; }
  double max_score() const noexcept { return max_score_; }

  // Runs the fixpoint at tau; returns the number of merge rounds.
  std::size_t run(double tau);

  // Applies the voting feature update to every node whose feature is still a
  // raw token feature.
  void pool_all_features() {
    if (g_.features_pooled) return;
    std::vector<std::uint32_t> all(g_.num_nodes());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    ensure_profiles(all);
    refresh_features(all);
    g_.features_pooled = true;
    std::fill(scores_.begin(), scores_.end(), kUnscored);
  }

  // Same nodes with all-pairs adjacency; profiles are reused.
  Coarsener fully_connected() const {
    Coarsener c(*this);
    c.g_ = make_fully_connected(g_);
    c.scores_.assign(c.g_.edges.size(), kUnscored);
    return c;
  }

  void recompute_all_features() {
    std::vector<std::uint32_t> all(g_.num_nodes());
    for (std::uint32_t i = 0; i < all.size(); ++i) all[i] = i;
    ensure_profiles(all);
    refresh_features(all);
    g_.features_pooled = true;
    std::fill(scores_.begin(), scores_.end(), kUnscored);
  }

 private:
  std::size_t hw() const noexcept { return fm_.token_count(); }

  bool spatial_active() const noexcept {
    return cfg_.omega_s > 0.0 && g_.level >= cfg_.spatial_from_level;
  }

  float* profile(std::size_t node) noexcept {
    return profiles_.data() + node * hw();
  }

  void ensure_profiles(std::span<const std::uint32_t> nodes);
  void refresh_features(std::span<const std::uint32_t> nodes);
  // Scores every unscored edge. With a finite tau, edges whose bound
  // ω_f·S_f + ω_s stays under tau are left at kBelowTau.
  void score_missing(double tau);
  std::vector<double> feature_terms(std::span<const std::uint32_t> pending);
  void observe(double s) noexcept {
    min_score_ = std::min(min_score_, s);
    max_score_ = std::max(max_score_, s);
  }

  const FeatureMap& fm_;
  const UniapConfig& cfg_;
  WorkerPool* pool_;
  Graph g_;
  std::vector<float> profiles_;  // num_nodes × HW, mean-feature affinities
  std::vector<std::uint8_t> has_profile_;
  std::vector<double> scores_;
  bool scores_spatial_ = false;
  double pruned_tau_ = kUnscored;
  std::shared_ptr<const std::vector<float>> tokens_by_dim_;
  double min_score_ = std::numeric_limits<double>::infinity();
  double max_score_ = -std::numeric_limits<double>::infinity();
};

void Coarsener::ensure_profiles(std::span<const std::uint32_t> nodes) {
  std::vector<std::uint32_t> todo;
  for (std::uint32_t n : nodes) {
    if (!has_profile_[n]) todo.push_back(n);
  }
  if (todo.empty()) return;
  const std::size_t d = fm_.dim();
  constexpr std::size_t kChunk = 256;
  std::vector<double> aggregates;
  std::vector<float> out;
  for (std::size_t c0 = 0; c0 < todo.size(); c0 += kChunk) {
    const std::size_t count = std::min(kChunk, todo.size() - c0);
    aggregates.assign(count * d, 0.0);
    parallel_for(pool_, count, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const std::vector<double> mean =
            mean_mask_feature(fm_, g_.masks[todo[c0 + i]]);
        std::copy(mean.begin(), mean.end(), aggregates.begin() + i * d);
      }
    });
    out.resize(count * hw());
    kernels::profiles(fm_, aggregates, count, out, pool_);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t n = todo[c0 + i];
      std::copy(out.begin() + i * hw(), out.begin() + (i + 1) * hw(),
                profile(n));
      has_profile_[n] = 1;
    }
  }
}

void Coarsener::refresh_features(std::span<const std::uint32_t> nodes) {
  if (nodes.empty()) return;
  const std::size_t d = fm_.dim();
  const std::size_t n_tok = hw();
  if (!tokens_by_dim_) {
    // d × HW copy of the token features, so the vote becomes a row-by-row
    // product with the weights.
    auto t = std::make_shared<std::vector<float>>(d * n_tok);
    const auto data = fm_.data();
    for (std::size_t p = 0; p < n_tok; ++p) {
      for (std::size_t k = 0; k < d; ++k) (*t)[k * n_tok + p] = data[p * d + k];
    }
    tokens_by_dim_ = std::move(t);
  }
  const double inv_sigma = 1.0 / cfg_.sigma;
  constexpr std::size_t kChunk = 64;
  std::vector<double> weights;
  std::vector<double> totals;
  std::vector<double> votes;
  for (std::size_t c0 = 0; c0 < nodes.size(); c0 += kChunk) {
    const std::size_t count = std::min(kChunk, nodes.size() - c0);
    weights.resize(count * n_tok);
    totals.resize(count);
    parallel_for(pool_, count, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const std::uint32_t n = nodes[c0 + i];
        // Profile of the mask sum is area × profile of the mask mean.
        const double area = static_cast<double>(g_.masks[n].area());
        const float* prof = profile(n);
        double* w = weights.data() + i * n_tok;
        double peak = -std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < n_tok; ++p) {
          w[p] = area * static_cast<double>(prof[p]) * inv_sigma;
          peak = std::max(peak, w[p]);
        }
        double total = 0.0;
        for (std::size_t p = 0; p < n_tok; ++p) {
          const double z = w[p] - peak;
          w[p] = z < -kWeightCutoff ? 0.0 : std::exp(z);
          total += w[p];
        }
        totals[i] = total;
      }
    });
    votes.resize(count * d);
    kernels::dots(weights, count, *tokens_by_dim_, d, n_tok, votes, pool_);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint32_t n = nodes[c0 + i];
      double* acc = votes.data() + i * d;
      double norm = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        acc[k] /= totals[i];
        norm += acc[k] * acc[k];
      }
      norm = std::sqrt(norm);
      if (!(norm >= kMinRowNorm)) {
        throw Error(ErrorCode::kDegenerateFeature,
                    "weighted vote of node " + std::to_string(n) +
                        " has norm " + std::to_string(norm));
      }
      auto dst = g_.feature(n);
      for (std::size_t k = 0; k < d; ++k) {
        dst[k] = static_cast<float>(acc[k] / norm);
      }
    }
  }
}

std::vector<double> Coarsener::feature_terms(
    std::span<const std::uint32_t> pending) {
  std::vector<double> sf(pending.size());
  const std::size_t n = g_.num_nodes();
  const std::size_t d = g_.dim;
  constexpr std::size_t kRows = 64;
  if (pending.size() < 8 * n) {
    parallel_for(
        pool_, pending.size(),
        [&](std::size_t begin, std::size_t end) {
          for (std::size_t i = begin; i < end; ++i) {
            const Edge& e = g_.edges[pending[i]];
            sf[i] = kernels::dot(g_.feature(e.a), g_.feature(e.b));
          }
        },
        64);
    return sf;
  }
  // Dense case (semantic graphs): Gram rows in blocks against every later
  // node. Edges are sorted, so each block owns a contiguous pending run.
  std::vector<double> rows;
  std::vector<double> gram;
  std::size_t i = 0;
  for (std::size_t a0 = 0; a0 < n && i < pending.size(); a0 += kRows) {
    const std::size_t a1 = std::min(n, a0 + kRows);
    const std::size_t start = i;
    while (i < pending.size() && g_.edges[pending[i]].a < a1) ++i;
    if (i == start) continue;
    rows.assign(g_.features.begin() + static_cast<std::ptrdiff_t>(a0 * d),
                g_.features.begin() + static_cast<std::ptrdiff_t>(a1 * d));
    const std::size_t cols = n - a0;
    gram.resize((a1 - a0) * cols);
    kernels::dots(rows, a1 - a0,
                  std::span<const float>(g_.features).subspan(a0 * d), cols, d,
                  gram, pool_);
    for (std::size_t j = start; j < i; ++j) {
      const Edge& e = g_.edges[pending[j]];
      sf[j] = gram[(e.a - a0) * cols + (e.b - a0)];
    }
  }
  return sf;
}

void Coarsener::score_missing(double tau) {
  const bool spatial = spatial_active();
  if (spatial != scores_spatial_) {
    std::fill(scores_.begin(), scores_.end(), kUnscored);
    scores_spatial_ = spatial;
  }
  if (!(pruned_tau_ == tau)) {
    for (double& s : scores_) {
      if (s == kBelowTau) s = kUnscored;
    }
    pruned_tau_ = tau;
  }
  std::vector<std::uint32_t> pending;
  for (std::size_t e = 0; e < scores_.size(); ++e) {
    if (std::isnan(scores_[e])) pending.push_back(static_cast<std::uint32_t>(e));
  }
  if (pending.empty()) return;
  const std::vector<double> sf = feature_terms(pending);
  const double wf = cfg_.omega_f;
  const double ws = cfg_.omega_s;
  if (!spatial) {
    for (std::size_t i = 0; i < pending.size(); ++i) {
      scores_[pending[i]] = sf[i];
      observe(sf[i]);
    }
    return;
  }
  // The spatial term is at most 1; the margin absorbs rounding differences
  // between the bound and the full expression.
  const bool prune = std::isfinite(tau);
  std::vector<std::uint32_t> full;
  std::vector<std::uint8_t> need(g_.num_nodes(), 0);
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (prune && wf * sf[i] + ws < tau - 1e-9) {
      scores_[pending[i]] = kBelowTau;
      continue;
    }
    full.push_back(static_cast<std::uint32_t>(i));
    need[g_.edges[pending[i]].a] = 1;
    need[g_.edges[pending[i]].b] = 1;
  }
  std::vector<std::uint32_t> nodes;
  for (std::uint32_t n = 0; n < need.size(); ++n) {
    if (need[n]) nodes.push_back(n);
  }
  ensure_profiles(nodes);
  parallel_for(
      pool_, full.size(),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
          const std::size_t i = full[k];
          const Edge& e = g_.edges[pending[i]];
          const double ss = 1.0 - mean_abs_diff(profile(e.a), profile(e.b), hw());
          scores_[pending[i]] = wf * sf[i] + ws * ss;
        }
      },
      64);
  for (std::uint32_t i : full) observe(scores_[pending[i]]);
}

std::size_t Coarsener::run(double tau) {
  std::size_t rounds = 0;
  for (;;) {
    score_missing(tau);
    std::vector<Edge> marked;
    for (std::size_t e = 0; e < scores_.size(); ++e) {
      if (scores_[e] >= tau) marked.push_back(g_.edges[e]);
    }
    if (marked.empty()) break;
    ++rounds;

    const Assignment a = connected_components(g_.num_nodes(), marked, pool_);
    const std::size_t s = a.num_supernodes;
    std::vector<std::uint32_t> children(s, 0);
    std::vector<std::uint32_t> origin(s, 0);
    for (std::size_t i = 0; i < a.map.size(); ++i) {
      if (children[a.map[i]]++ == 0) {
        origin[a.map[i]] = static_cast<std::uint32_t>(i);
      }
    }
    const bool was_pooled = g_.features_pooled;
    Graph next = apply_assignment(g_, a);

    // Compact cached profiles in place. A supernode's index never exceeds
    // its smallest child's, so copying in ascending order reads rows that
    // are not yet overwritten.
    std::vector<std::uint32_t> merged;
    std::vector<std::uint32_t> stale;
    std::vector<std::uint8_t> keeps_score(s, 0);
    for (std::uint32_t k = 0; k < s; ++k) {
      if (children[k] == 1) {
        const std::uint32_t o = origin[k];
        if (o != k && has_profile_[o]) {
          std::copy(profile(o), profile(o) + hw(), profile(k));
        }
        has_profile_[k] = has_profile_[o];
        if (was_pooled) {
          keeps_score[k] = 1;
        } else {
          stale.push_back(k);
        }
      } else {
        has_profile_[k] = 0;
        merged.push_back(k);
        stale.push_back(k);
      }
    }
    profiles_.resize(s * hw());
    has_profile_.resize(s);

    const std::vector<Edge> old_edges = std::move(g_.edges);
    const std::vector<double> old_scores = std::move(scores_);
    g_ = std::move(next);
    ensure_profiles(stale);
    refresh_features(stale);
    g_.features_pooled = true;

    scores_.assign(g_.edges.size(), kUnscored);
    for (std::size_t e = 0; e < g_.edges.size(); ++e) {
      const Edge& edge = g_.edges[e];
      if (!keeps_score[edge.a] || !keeps_score[edge.b]) continue;
      const Edge key{origin[edge.a], origin[edge.b]};
      const auto it = std::lower_bound(old_edges.begin(), old_edges.end(), key);
      if (it != old_edges.end() && *it == key) {
        scores_[e] = old_scores[static_cast<std::size_t>(it - old_edges.begin())];
      }
    }
  }
  return rounds;
}

}  // namespace

std::vector<double> edge_similarities(const Graph& g, const FeatureMap& fm,
                                      const UniapConfig& cfg,
                                      WorkerPool* pool) {
  Coarsener c(g, fm, cfg, pool);
  const auto s = c.scores();
  return {s.begin(), s.end()};
}

Graph update_features(const Graph& g, const FeatureMap& fm, double sigma,
                      WorkerPool* pool) {
  if (!(sigma > 0.0)) {
    throw Error(ErrorCode::kInvalidTemperature,
                "sigma " + std::to_string(sigma));
  }
  UniapConfig cfg;
  cfg.sigma = sigma;
  Coarsener c(g, fm, cfg, pool);
  c.recompute_all_features();
  return std::move(c).take_graph();
}

Graph coarsen_to_fixpoint(const Graph& g, const FeatureMap& fm, double tau,
                          const UniapConfig& cfg, WorkerPool* pool) {
  cfg.validate();
  Coarsener c(g, fm, cfg, pool);
  c.run(tau);
  return std::move(c).take_graph();
}

PoolLayerResult pool_layer(const Graph& g, const FeatureMap& fm, double tau,
                           const UniapConfig& cfg, WorkerPool* pool) {
  cfg.validate();
  Coarsener inst(g, fm, cfg, pool);
  inst.run(tau);
  inst.pool_all_features();
  Coarsener sem = inst.fully_connected();
  sem.run(tau);

  PoolLayerResult out;
  const Graph& sg = sem.graph();
  out.semantic.reserve(sg.num_nodes());
  for (std::size_t n = 0; n < sg.num_nodes(); ++n) {
    const auto f = sg.feature(n);
    out.semantic.push_back({sg.masks[n], {f.begin(), f.end()}});
  }
  out.instance = std::move(inst).take_graph();
  return out;
}

MaskPyramid run_uniap(const FeatureMap& fm, const UniapConfig& cfg,
                      WorkerPool* pool, RunTrace* trace) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;

  MaskPyramid pyramid;
  pyramid.height = fm.height();
  pyramid.width = fm.width();
  pyramid.levels.resize(cfg.thresholds.size());
  if (trace != nullptr) trace->layers.clear();

  auto emit = [&](const Graph& g, int level, MaskKind kind,
                  std::vector<PseudoMask>& out) {
    for (std::size_t n = 0; n < g.num_nodes(); ++n) {
      if (g.masks[n].area() < cfg.phi) continue;
      const auto f = g.feature(n);
      out.push_back({g.masks[n], {f.begin(), f.end()}, level, kind});
    }
  };

  Coarsener inst(init_grid_graph(fm), fm, cfg, pool);
  for (std::size_t t = 0; t < cfg.thresholds.size(); ++t) {
    const auto start = Clock::now();
    const double tau = cfg.thresholds[t];
    const int level = static_cast<int>(t);
    PyramidLevel& out = pyramid.levels[t];
    out.tau = tau;

    const std::size_t inst_rounds = inst.run(tau);
    inst.pool_all_features();
    emit(inst.graph(), level, MaskKind::kInstance, out.instance);

    Coarsener sem = inst.fully_connected();
    const std::size_t sem_rounds = sem.run(tau);
    emit(sem.graph(), level, MaskKind::kSemantic, out.semantic);

    if (trace != nullptr) {
      LayerTrace lt;
      lt.tau = tau;
      lt.partition = inst.graph().masks;
      lt.semantic_nodes = sem.graph().num_nodes();
      lt.instance_iterations = inst_rounds;
      lt.semantic_iterations = sem_rounds;
      lt.min_score = std::min(inst.min_score(), sem.min_score());
      lt.max_score = std::max(inst.max_score(), sem.max_score());
      lt.seconds = std::chrono::duration<double>(Clock::now() - start).count();
      trace->layers.push_back(std::move(lt));
    }
  }

  for (MaskKind kind : {MaskKind::kInstance, MaskKind::kSemantic}) {
    std::vector<PseudoMask> flat;
    for (auto& level : pyramid.levels) {
      auto& list = kind == MaskKind::kInstance ? level.instance : level.semantic;
      for (auto& m : list) flat.push_back(std::move(m));
      list.clear();
    }
    for (auto& m : dedup_masks(flat, cfg.dedup_iou)) {
      auto& level = pyramid.levels[static_cast<std::size_t>(m.level)];
      (kind == MaskKind::kInstance ? level.instance : level.semantic)
          .push_back(std::move(m));
    }
  }
  return pyramid;
}

std::vector<PseudoMask> dedup_masks(const std::vector<PseudoMask>& masks,
                                    double dedup_iou) {
  if (!(dedup_iou > 0.0 && dedup_iou <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "dedup_iou must lie in (0, 1]");
  }
  std::vector<PseudoMask> kept;
  for (const PseudoMask& m : masks) {
    bool duplicate = false;
    for (const PseudoMask& k : kept) {
      if (k.kind != m.kind || !k.mask.same_grid(m.mask)) continue;
      // IoU > t  <=>  inter > t * union; area bounds reject most pairs early.
      const double lo = static_cast<double>(std::min(k.mask.area(), m.mask.area()));
      const double hi = static_cast<double>(std::max(k.mask.area(), m.mask.area()));
      if (hi > 0.0 && lo / hi <= dedup_iou) continue;
      if (mask_iou(k.mask, m.mask) > dedup_iou) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) kept.push_back(m);
  }
  return kept;
}

}  // namespace uniap
