#include "gbpl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gbpl/error.hpp"

namespace gbpl::losses {
namespace {

void check_output(const LossAdapter& loss, std::span<const std::size_t> rows,
                  const Matrix& output) {
  if (output.rows() != static_cast<Eigen::Index>(rows.size()) ||
      output.cols() != loss.output_dim()) {
    throw DimensionMismatch("loss expects a " + std::to_string(rows.size()) + " x " +
                            std::to_string(loss.output_dim()) + " output");
  }
}

void prepare_grad(Matrix* grad, const Matrix& output) {
  if (grad) grad->setZero(output.rows(), output.cols());
}

void check_zeta(double zeta) {
  if (!(zeta > 0.0)) throw InvalidArgument("zeta must be positive");
}

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Vector LossAdapter::per_sample(std::span<const std::size_t> rows, const Matrix& output) const {
  Vector out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto idx = static_cast<Eigen::Index>(r);
    out[idx] = evaluate(rows.subspan(r, 1), output.row(idx), nullptr);
  }
  return out;
}

std::vector<std::size_t> all_rows(Eigen::Index n) {
  std::vector<std::size_t> r(static_cast<std::size_t>(n));
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

BinarySurrogateLoss::BinarySurrogateLoss(Vector u, double zeta) : u_(std::move(u)), zeta_(zeta) {
  check_zeta(zeta);
}

double BinarySurrogateLoss::evaluate(std::span<const std::size_t> rows, const Matrix& output,
                                     Matrix* grad) const {
  check_output(*this, rows, output);
  prepare_grad(grad, output);
  const double root = std::sqrt(zeta_);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const double u = u_[static_cast<Eigen::Index>(rows[r])];
    const double f = output(i, 0);
    const double resid = u / root - root * f;
    total += 0.5 * resid * resid;
    if (grad) (*grad)(i, 0) = zeta_ * f - u;
  }
  return total;
}

FullVectorSurrogateLoss::FullVectorSurrogateLoss(Matrix y, double zeta)
    : y_(std::move(y)), zeta_(zeta) {
  check_zeta(zeta);
}

double FullVectorSurrogateLoss::evaluate(std::span<const std::size_t> rows, const Matrix& output,
                                         Matrix* grad) const {
  check_output(*this, rows, output);
  prepare_grad(grad, output);
  const double root = std::sqrt(zeta_);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto src = static_cast<Eigen::Index>(rows[r]);
    for (Eigen::Index a = 0; a < y_.cols(); ++a) {
      const double resid = y_(src, a) / root - root * output(i, a);
      total += 0.5 * resid * resid;
      if (grad) (*grad)(i, a) = zeta_ * output(i, a) - y_(src, a);
    }
  }
  return total;
}

BaselineGapLoss::BaselineGapLoss(Matrix y, double zeta, int baseline)
    : y_(std::move(y)), zeta_(zeta), baseline_(baseline) {
  check_zeta(zeta);
  if (baseline < 0 || baseline >= y_.cols()) throw InvalidArgument("baseline index out of range");
}

double BaselineGapLoss::evaluate(std::span<const std::size_t> rows, const Matrix& output,
                                 Matrix* grad) const {
  check_output(*this, rows, output);
  prepare_grad(grad, output);
  const double root = std::sqrt(zeta_);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto src = static_cast<Eigen::Index>(rows[r]);
    for (Eigen::Index a = 0; a < y_.cols(); ++a) {
      if (a == baseline_) continue;
      const double gap = y_(src, a) - y_(src, baseline_);
      const double f = 2.0 * output(i, a) - 1.0;
      const double resid = gap / root - root * f;
      total += 0.5 * resid * resid;
      if (grad) (*grad)(i, a) = 2.0 * (zeta_ * f - gap);
    }
  }
  return total;
}

SquaredErrorLoss::SquaredErrorLoss(Matrix targets, std::optional<Vector> weights)
    : targets_(std::move(targets)), weights_(std::move(weights)) {
  if (weights_ && weights_->size() != targets_.rows()) {
    throw DimensionMismatch("weights must have one entry per row");
  }
}

double SquaredErrorLoss::evaluate(std::span<const std::size_t> rows, const Matrix& output,
                                  Matrix* grad) const {
  check_output(*this, rows, output);
  prepare_grad(grad, output);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto src = static_cast<Eigen::Index>(rows[r]);
    const double w = weights_ ? (*weights_)[src] : 1.0;
    for (Eigen::Index j = 0; j < targets_.cols(); ++j) {
      const double resid = output(i, j) - targets_(src, j);
      total += 0.5 * w * resid * resid;
      if (grad) (*grad)(i, j) = w * resid;
    }
  }
  return total;
}

MaskedSquaredLoss::MaskedSquaredLoss(Vector y_obs, std::vector<int> actions, int K)
    : y_(std::move(y_obs)), actions_(std::move(actions)), K_(K) {
  if (static_cast<Eigen::Index>(actions_.size()) != y_.size()) {
    throw DimensionMismatch("actions and outcomes differ in length");
  }
  for (int a : actions_) {
    if (a < 0 || a >= K_) throw InvalidArgument("action index out of range");
  }
}

double MaskedSquaredLoss::evaluate(std::span<const std::size_t> rows, const Matrix& output,
                                   Matrix* grad) const {
  check_output(*this, rows, output);
  prepare_grad(grad, output);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto src = rows[r];
    const int a = actions_[src];
    const double resid = output(i, a) - y_[static_cast<Eigen::Index>(src)];
    total += 0.5 * resid * resid;
    if (grad) (*grad)(i, a) = resid;
  }
  return total;
}

WeightedLogisticLoss::WeightedLogisticLoss(Vector labels, Vector weights)
    : labels_(std::move(labels)), weights_(std::move(weights)) {
  if (labels_.size() != weights_.size()) throw DimensionMismatch("labels and weights differ");
  if ((weights_.array() < 0.0).any()) throw InvalidArgument("weights must be nonnegative");
}

double WeightedLogisticLoss::evaluate(std::span<const std::size_t> rows, const Matrix& output,
                                      Matrix* grad) const {
  check_output(*this, rows, output);
  prepare_grad(grad, output);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto src = static_cast<Eigen::Index>(rows[r]);
    const double z = output(i, 0);
    const double w = weights_[src];
    const double label = labels_[src];
    total += w * (softplus(z) - label * z);
    if (grad) (*grad)(i, 0) = w * (sigmoid(z) - label);
  }
  return total;
}

NegativeWelfareLoss::NegativeWelfareLoss(Matrix y) : y_(std::move(y)) {}

double NegativeWelfareLoss::evaluate(std::span<const std::size_t> rows, const Matrix& output,
                                     Matrix* grad) const {
  check_output(*this, rows, output);
  prepare_grad(grad, output);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const auto src = static_cast<Eigen::Index>(rows[r]);
    total -= output.row(i).dot(y_.row(src));
    if (grad) grad->row(i) = -y_.row(src);
  }
  return total;
}

CrossEntropyLoss::CrossEntropyLoss(std::vector<int> actions, int K)
    : actions_(std::move(actions)), K_(K) {
  for (int a : actions_) {
    if (a < 0 || a >= K_) throw InvalidArgument("action index out of range");
  }
}

double CrossEntropyLoss::evaluate(std::span<const std::size_t> rows, const Matrix& output,
                                  Matrix* grad) const {
  check_output(*this, rows, output);
  prepare_grad(grad, output);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(r);
    const int a = actions_[rows[r]];
    const double p = std::max(output(i, a), 1e-300);
    total -= std::log(p);
    if (grad) (*grad)(i, a) = -1.0 / p;
  }
  return total;
}

}  // namespace gbpl::losses
