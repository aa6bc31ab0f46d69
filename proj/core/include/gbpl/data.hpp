#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "gbpl/nnet.hpp"

namespace gbpl {

// Action coding. Columns of every outcome/propensity matrix are indexed
// 0..K-1 and correspond to actions 1..K. For binary problems, binary action
// 1 ("treat") is column 0 and binary action 0 is column 1, so U = Y(1) - Y(0)
// is column 0 minus column 1 and the randomized policy delta(x) is the
// probability of column 0.
inline constexpr int kBinaryTreatColumn = 0;
inline constexpr int kBinaryControlColumn = 1;

/// Column index of binary action `code` (1 or 0).
int binary_action_to_column(int code);
/// Binary action code (1 or 0) of column 0 or 1.
int column_to_binary_action(int column);

/// Covariates together with every potential outcome.
struct FullFeedbackDataset {
  Matrix x;  // n x d
  Matrix y;  // n x K, column a holds Y(a + 1)

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index d() const { return x.cols(); }
  int K() const { return static_cast<int>(y.cols()); }

  /// Throws on shape mismatch, K < 2, n < 1, or non-finite entries.
  void validate() const;

  /// U = Y(1) - Y(0) for K = 2 data.
  Vector outcome_difference() const;

  FullFeedbackDataset subset(std::span<const std::size_t> rows) const;
};

/// Bandit feedback: only the outcome of the logged action is observed.
struct LoggedDataset {
  Matrix x;                                // n x d
  std::vector<int> actions;                // column indices in 0..K-1
  Vector y_obs;                            // n
  int K = 2;
  std::optional<Matrix> true_propensity;   // n x K when known

  Eigen::Index n() const { return x.rows(); }
  Eigen::Index d() const { return x.cols(); }

  /// Throws on inconsistent shapes, out-of-range actions, non-finite
  /// outcomes, or propensity rows that do not sum to one within 1e-9.
  void validate() const;

  LoggedDataset subset(std::span<const std::size_t> rows) const;
};

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows);
Vector select_rows(const Vector& v, std::span<const std::size_t> rows);

}  // namespace gbpl
