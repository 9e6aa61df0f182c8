#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "uniap/maskops.hpp"
#include "uniap/pooling.hpp"
#include "uniap/token_mask.hpp"

namespace uniap {

// Projection-head output for one query (K logits).
struct QueryRow {
  std::vector<double> logits;
};

struct MatchPair {
  std::size_t student = 0;
  std::size_t teacher = 0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

struct MatchResult {
  std::vector<MatchPair> pairs;  // ascending by student index
  std::vector<std::size_t> unmatched_students;
  std::vector<std::size_t> unmatched_teachers;
  double total_dice = 0.0;
};

struct QuerySDConfig {
  double teacher_temp = 0.04;
  double student_temp = 0.1;
  std::size_t num_local_views = 2;

  // Throws InvalidConfig.
  void validate() const;
};

// Dense row-major score matrix.
struct ScoreMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  ScoreMatrix() = default;
  ScoreMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

struct CroppedTeacher {
  TokenMask mask;  // box-local grid
  std::size_t original_index = 0;
};

// Crops teacher masks to the student's view and drops the ones that do not
// overlap it (fewer than one shared token).
std::vector<CroppedTeacher> crop_and_filter_teacher(
    const std::vector<TokenMask>& teacher, const CropBox& box);
std::vector<CroppedTeacher> crop_and_filter_teacher(
    const std::vector<PseudoMask>& teacher, const CropBox& box);

ScoreMatrix dice_cost_matrix(const std::vector<TokenMask>& student,
                             const std::vector<TokenMask>& teacher);

// Maximum-weight matching of size min(rows, cols). Among optimal matchings
// (scores equal within 1e-9) the one whose assignment vector, read in
// student order, is lexicographically smallest wins, with "unmatched"
// ordered after every teacher index.
MatchResult hungarian_max(const ScoreMatrix& scores);

// Matches each group independently: students tagged g only compete for
// teachers tagged g. Indices in the result refer to the full lists.
MatchResult hungarian_max_grouped(const ScoreMatrix& scores,
                                  const std::vector<int>& student_groups,
                                  const std::vector<int>& teacher_groups);

// Σ over pairs of −Σ_k p_t(k) log p_s(k) with temperature softmaxes; the log
// is floored at ln(1e-12).
double querysd_loss(const std::vector<QueryRow>& teacher,
                    const std::vector<QueryRow>& student,
                    const std::vector<MatchPair>& pairs,
                    const QuerySDConfig& cfg);

// d loss / d student logits: (p_s − p_t) / student_temp on matched rows,
// zero elsewhere. Returned as one row per student query.
std::vector<std::vector<double>> querysd_grad(
    const std::vector<QueryRow>& teacher, const std::vector<QueryRow>& student,
    const std::vector<MatchPair>& pairs, const QuerySDConfig& cfg);

// One local view's student queries and their matched pairs.
struct StudentView {
  std::vector<QueryRow> student;
  std::vector<MatchPair> pairs;
};

// Sum of querysd_loss over local views. Throws InvalidParams when the number
// of views differs from cfg.num_local_views.
double querysd_loss_views(const std::vector<QueryRow>& teacher,
                          const std::vector<StudentView>& views,
                          const QuerySDConfig& cfg);

}  // namespace uniap
