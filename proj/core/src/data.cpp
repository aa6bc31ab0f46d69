#include "gbpl/data.hpp"

#include <cmath>
#include <string>

#include "gbpl/error.hpp"

namespace gbpl {

int binary_action_to_column(int code) {
  if (code == 1) return kBinaryTreatColumn;
  if (code == 0) return kBinaryControlColumn;
  throw InvalidArgument("binary action code must be 0 or 1, got " + std::to_string(code));
}

int column_to_binary_action(int column) {
  if (column == kBinaryTreatColumn) return 1;
  if (column == kBinaryControlColumn) return 0;
  throw InvalidArgument("binary column must be 0 or 1, got " + std::to_string(column));
}

void FullFeedbackDataset::validate() const {
  if (x.rows() < 1) throw InvalidArgument("dataset must have at least one row");
  if (y.rows() != x.rows()) throw DimensionMismatch("x and y row counts differ");
  if (y.cols() < 2) throw InvalidArgument("full-feedback data needs K >= 2 outcome columns");
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("dataset has non-finite entries");
}

Vector FullFeedbackDataset::outcome_difference() const {
  if (K() != 2) throw InvalidArgument("outcome difference requires K = 2");
  return y.col(kBinaryTreatColumn) - y.col(kBinaryControlColumn);
}

FullFeedbackDataset FullFeedbackDataset::subset(std::span<const std::size_t> rows) const {
  return FullFeedbackDataset{select_rows(x, rows), select_rows(y, rows)};
}

void LoggedDataset::validate() const {
  if (x.rows() < 1) throw InvalidArgument("logged dataset must have at least one row");
  if (K < 2) throw InvalidArgument("logged data needs K >= 2");
  if (static_cast<Eigen::Index>(actions.size()) != x.rows() || y_obs.size() != x.rows()) {
    throw DimensionMismatch("logged dataset row counts differ");
  }
  for (int a : actions) {
    if (a < 0 || a >= K) throw InvalidArgument("action index out of range");
  }
  if (!y_obs.allFinite() || !x.allFinite()) {
    throw InvalidArgument("logged dataset has non-finite entries");
  }
  if (true_propensity) {
    const Matrix& e = *true_propensity;
    if (e.rows() != x.rows() || e.cols() != K) {
      throw DimensionMismatch("propensity matrix must be n x K");
    }
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
      if (std::abs(e.row(i).sum() - 1.0) > 1e-9 || e.row(i).minCoeff() <= 0.0) {
        throw InvalidArgument("propensity row " + std::to_string(i) +
                              " is not a strictly positive probability vector");
      }
    }
  }
}

LoggedDataset LoggedDataset::subset(std::span<const std::size_t> rows) const {
  LoggedDataset out;
  out.x = select_rows(x, rows);
  out.y_obs = select_rows(y_obs, rows);
  out.K = K;
  out.actions.reserve(rows.size());
  for (auto r : rows) out.actions.push_back(actions.at(r));
  if (true_propensity) out.true_propensity = select_rows(*true_propensity, rows);
  return out;
}

Matrix select_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

Vector select_rows(const Vector& v, std::span<const std::size_t> rows) {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = v[static_cast<Eigen::Index>(rows[i])];
  }
  return out;
}

}  // namespace gbpl
