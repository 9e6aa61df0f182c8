#include "uniap/querysd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "uniap/error.hpp"
#include "uniap/tensor.hpp"

namespace uniap {

void QuerySDConfig::validate() const {
  if (!(teacher_temp > 0.0) || !(student_temp > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "temperatures must be positive");
  }
  if (num_local_views < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "num_local_views must be at least 1");
  }
}

namespace {

std::vector<CroppedTeacher> crop_all(const std::vector<const TokenMask*>& masks,
                                     const CropBox& box) {
  std::vector<CroppedTeacher> out;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (auto cropped = crop_mask(*masks[i], box)) {
      out.push_back({std::move(*cropped), i});
    }
  }
  return out;
}

constexpr double kTightTolerance = 1e-9;

// Minimum-cost perfect assignment on an n×n matrix (Kuhn–Munkres with
// potentials). Leaves dual potentials so callers can read off the tight
// edges: cost[i][j] - u[i] - v[j] == 0 exactly on optimal edges.
struct Assignment1Based {
  std::vector<double> u;
  std::vector<double> v;
  std::vector<std::size_t> col_of_row;  // 0-based
};

Assignment1Based solve_min_cost(const std::vector<double>& cost,
                                std::size_t n) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  Assignment1Based out;
  out.u = std::move(u);
  out.v = std::move(v);
  out.col_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) out.col_of_row[p[j] - 1] = j - 1;
  return out;
}

// Moves an optimal perfect matching to the lexicographically smallest one
// among matchings that use only tight edges, fixing rows in order.
class TightMatching {
 public:
  TightMatching(std::vector<std::vector<std::size_t>> adj,
                std::vector<std::size_t> col_of_row)
      : adj_(std::move(adj)),
        col_of_row_(std::move(col_of_row)),
        row_of_col_(col_of_row_.size()),
        row_fixed_(col_of_row_.size(), 0),
        col_locked_(col_of_row_.size(), 0) {
    for (std::size_t r = 0; r < col_of_row_.size(); ++r) {
      row_of_col_[col_of_row_[r]] = r;
    }
  }

  void fix_rows_in_order(std::size_t rows_to_fix) {
    for (std::size_t r = 0; r < rows_to_fix; ++r) {
      for (std::size_t c : adj_[r]) {  // ascending
        if (col_locked_[c]) continue;
        if (try_take(r, c)) break;
      }
      row_fixed_[r] = 1;
      col_locked_[col_of_row_[r]] = 1;
    }
  }

  const std::vector<std::size_t>& col_of_row() const { return col_of_row_; }

 private:
  // Reassign row r to column c if the rest can still be perfectly matched.
  bool try_take(std::size_t r, std::size_t c) {
    if (col_of_row_[r] == c) return true;
    const std::size_t freed = col_of_row_[r];
    const std::size_t displaced = row_of_col_[c];
    visited_.assign(col_of_row_.size(), 0);
    visited_[c] = 1;
    path_.clear();
    row_fixed_[r] = 1;  // r is not available to the alternating search
    const bool ok = augment(displaced, freed);
    row_fixed_[r] = 0;
    if (!ok) return false;
    // path_ holds (row, new column) steps from the displaced row onwards.
    for (const auto& [row, col] : path_) {
      col_of_row_[row] = col;
      row_of_col_[col] = row;
    }
    col_of_row_[r] = c;
    row_of_col_[c] = r;
    return true;
  }

  bool augment(std::size_t row, std::size_t target) {
    for (std::size_t col : adj_[row]) {
      if (col_locked_[col] || visited_[col]) continue;
      visited_[col] = 1;
      if (col == target) {
        path_.emplace_back(row, col);
        return true;
      }
      const std::size_t next = row_of_col_[col];
      if (row_fixed_[next]) continue;
      if (augment(next, target)) {
        path_.emplace_back(row, col);
        return true;
      }
    }
    return false;
  }

  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> col_of_row_;
  std::vector<std::size_t> row_of_col_;
  std::vector<char> row_fixed_;
  std::vector<char> col_locked_;
  std::vector<char> visited_;
  std::vector<std::pair<std::size_t, std::size_t>> path_;
};

void check_rows(const std::vector<QueryRow>& teacher,
                const std::vector<QueryRow>& student,
                const std::vector<MatchPair>& pairs, const QuerySDConfig& cfg) {
  if (!(cfg.teacher_temp > 0.0) || !(cfg.student_temp > 0.0)) {
    throw Error(ErrorCode::kInvalidTemperature,
                "teacher_temp " + std::to_string(cfg.teacher_temp) +
                    ", student_temp " + std::to_string(cfg.student_temp));
  }
  for (const MatchPair& p : pairs) {
    if (p.student >= student.size() || p.teacher >= teacher.size()) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "pair (" + std::to_string(p.student) + ", " +
                      std::to_string(p.teacher) + ")");
    }
    if (student[p.student].logits.size() != teacher[p.teacher].logits.size() ||
        student[p.student].logits.empty()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "student row " + std::to_string(p.student) + " has " +
                      std::to_string(student[p.student].logits.size()) +
                      " logits, teacher row " + std::to_string(p.teacher) +
                      " has " +
                      std::to_string(teacher[p.teacher].logits.size()));
    }
  }
}

std::vector<double> log_softmax(const std::vector<double>& logits,
                                double temperature) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double z : logits) peak = std::max(peak, z / temperature);
  double total = 0.0;
  for (double z : logits) total += std::exp(z / temperature - peak);
  const double lse = peak + std::log(total);
  std::vector<double> out(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) {
    out[k] = logits[k] / temperature - lse;
  }
  return out;
}

const double kLogFloor = std::log(1e-12);

}  // namespace

std::vector<CroppedTeacher> crop_and_filter_teacher(
    const std::vector<TokenMask>& teacher, const CropBox& box) {
  std::vector<const TokenMask*> ptrs;
  ptrs.reserve(teacher.size());
  for (const auto& m : teacher) ptrs.push_back(&m);
  return crop_all(ptrs, box);
}

std::vector<CroppedTeacher> crop_and_filter_teacher(
    const std::vector<PseudoMask>& teacher, const CropBox& box) {
  std::vector<const TokenMask*> ptrs;
  ptrs.reserve(teacher.size());
  for (const auto& m : teacher) ptrs.push_back(&m.mask);
  return crop_all(ptrs, box);
}

ScoreMatrix dice_cost_matrix(const std::vector<TokenMask>& student,
                             const std::vector<TokenMask>& teacher) {
  ScoreMatrix m(student.size(), teacher.size());
  for (std::size_t s = 0; s < student.size(); ++s) {
    for (std::size_t t = 0; t < teacher.size(); ++t) {
      m.at(s, t) = mask_dice(student[s], teacher[t]);
    }
  }
  return m;
}

MatchResult hungarian_max(const ScoreMatrix& scores) {
  if (scores.values.size() != scores.rows * scores.cols) {
    throw Error(ErrorCode::kDimensionMismatch, "score matrix storage size");
  }
  for (double v : scores.values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidParams, "score matrix has non-finite entries");
    }
  }
  MatchResult result;
  if (scores.rows == 0 || scores.cols == 0) {
    for (std::size_t s = 0; s < scores.rows; ++s) result.unmatched_students.push_back(s);
    for (std::size_t t = 0; t < scores.cols; ++t) result.unmatched_teachers.push_back(t);
    return result;
  }

  // Pad to square with zero-score dummies; dummy columns sit after every
  // real teacher, so "unmatched" sorts last in the tie-break.
  const std::size_t n = std::max(scores.rows, scores.cols);
  std::vector<double> cost(n * n, 0.0);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    for (std::size_t c = 0; c < scores.cols; ++c) {
      cost[r * n + c] = -scores.at(r, c);
    }
  }
  const Assignment1Based solved = solve_min_cost(cost, n);

  std::vector<std::vector<std::size_t>> tight(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double reduced = cost[r * n + c] - solved.u[r + 1] - solved.v[c + 1];
      if (reduced <= kTightTolerance) tight[r].push_back(c);
    }
  }
  TightMatching matching(std::move(tight), solved.col_of_row);
  matching.fix_rows_in_order(scores.rows);

  std::vector<char> teacher_used(scores.cols, 0);
  for (std::size_t r = 0; r < scores.rows; ++r) {
    const std::size_t c = matching.col_of_row()[r];
    if (c < scores.cols) {
      result.pairs.push_back({r, c});
      result.total_dice += scores.at(r, c);
      teacher_used[c] = 1;
    } else {
      result.unmatched_students.push_back(r);
    }
  }
  for (std::size_t t = 0; t < scores.cols; ++t) {
    if (!teacher_used[t]) result.unmatched_teachers.push_back(t);
  }
  return result;
}

MatchResult hungarian_max_grouped(const ScoreMatrix& scores,
                                  const std::vector<int>& student_groups,
                                  const std::vector<int>& teacher_groups) {
  if (student_groups.size() != scores.rows ||
      teacher_groups.size() != scores.cols) {
    throw Error(ErrorCode::kDimensionMismatch,
                "group tags do not match the score matrix");
  }
  std::map<int, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>>
      groups;
  for (std::size_t s = 0; s < scores.rows; ++s) {
    groups[student_groups[s]].first.push_back(s);
  }
  for (std::size_t t = 0; t < scores.cols; ++t) {
    groups[teacher_groups[t]].second.push_back(t);
  }
  MatchResult result;
  for (const auto& [tag, members] : groups) {
    const auto& [rows, cols] = members;
    ScoreMatrix sub(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < cols.size(); ++j) {
        sub.at(i, j) = scores.at(rows[i], cols[j]);
      }
    }
    const MatchResult part = hungarian_max(sub);
    for (const MatchPair& p : part.pairs) {
      result.pairs.push_back({rows[p.student], cols[p.teacher]});
    }
    for (std::size_t s : part.unmatched_students) {
      result.unmatched_students.push_back(rows[s]);
    }
    for (std::size_t t : part.unmatched_teachers) {
      result.unmatched_teachers.push_back(cols[t]);
    }
  }
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const MatchPair& a, const MatchPair& b) {
              return a.student < b.student;
            });
  std::sort(result.unmatched_students.begin(), result.unmatched_students.end());
  std::sort(result.unmatched_teachers.begin(), result.unmatched_teachers.end());
  for (const MatchPair& p : result.pairs) {
    result.total_dice += scores.at(p.student, p.teacher);
  }
  return result;
}

double querysd_loss(const std::vector<QueryRow>& teacher,
                    const std::vector<QueryRow>& student,
                    const std::vector<MatchPair>& pairs,
                    const QuerySDConfig& cfg) {
  check_rows(teacher, student, pairs, cfg);
  double loss = 0.0;
  for (const MatchPair& p : pairs) {
    const std::vector<double> pt =
        row_softmax(teacher[p.teacher].logits, cfg.teacher_temp);
    const std::vector<double> log_ps =
        log_softmax(student[p.student].logits, cfg.student_temp);
    double ce = 0.0;
    for (std::size_t k = 0; k < pt.size(); ++k) {
      ce -= pt[k] * std::max(log_ps[k], kLogFloor);
    }
    loss += ce;
  }
  return loss;
}

std::vector<std::vector<double>> querysd_grad(
    const std::vector<QueryRow>& teacher, const std::vector<QueryRow>& student,
    const std::vector<MatchPair>& pairs, const QuerySDConfig& cfg) {
  check_rows(teacher, student, pairs, cfg);
  std::vector<std::vector<double>> grad(student.size());
  for (std::size_t s = 0; s < student.size(); ++s) {
    grad[s].assign(student[s].logits.size(), 0.0);
  }
  for (const MatchPair& p : pairs) {
    const std::vector<double> pt =
        row_softmax(teacher[p.teacher].logits, cfg.teacher_temp);
    const std::vector<double> ps =
        row_softmax(student[p.student].logits, cfg.student_temp);
    auto& row = grad[p.student];
    for (std::size_t k = 0; k < pt.size(); ++k) {
      row[k] += (ps[k] - pt[k]) / cfg.student_temp;
    }
  }
  return grad;
}

double querysd_loss_views(const std::vector<QueryRow>& teacher,
                          const std::vector<StudentView>& views,
                          const QuerySDConfig& cfg) {
  if (views.size() != cfg.num_local_views) {
    throw Error(ErrorCode::kInvalidParams,
                std::to_string(views.size()) + " views, expected " +
                    std::to_string(cfg.num_local_views));
  }
  double total = 0.0;
  for (const StudentView& v : views) {
    total += querysd_loss(teacher, v.student, v.pairs, cfg);
  }
  return total;
}

}  // namespace uniap
