#pragma once

#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "gbpl/nnet.hpp"

namespace gbpl::losses {

/// Per-sample loss over network outputs. An adapter owns the targets for a
/// fixed set of rows; `evaluate` sums the per-sample loss over a subset of
/// those rows and writes d(sum)/d(output) for each selected row.
class LossAdapter {
 public:
  virtual ~LossAdapter() = default;

  virtual Eigen::Index rows() const = 0;
  virtual int output_dim() const = 0;
  virtual nnet::Head expected_head() const = 0;

  /// `output` row r corresponds to adapter row `rows[r]`. `grad` may be null.
  virtual double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                          Matrix* grad) const = 0;

  /// Loss of each selected row.
  Vector per_sample(std::span<const std::size_t> rows, const Matrix& output) const;
};

std::vector<std::size_t> all_rows(Eigen::Index n);

/// 1/2 (u / sqrt(zeta) - sqrt(zeta) f)^2 on a tanh score.
class BinarySurrogateLoss final : public LossAdapter {
 public:
  BinarySurrogateLoss(Vector u, double zeta);
  Eigen::Index rows() const override { return u_.size(); }
  int output_dim() const override { return 1; }
  nnet::Head expected_head() const override { return nnet::Head::TanhScalar; }
  double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                  Matrix* grad) const override;

 private:
  Vector u_;
  double zeta_;
};

/// 1/2 sum_a (y_a / sqrt(zeta) - sqrt(zeta) delta_a)^2 on a softmax policy.
class FullVectorSurrogateLoss final : public LossAdapter {
 public:
  FullVectorSurrogateLoss(Matrix y, double zeta);
  Eigen::Index rows() const override { return y_.rows(); }
  int output_dim() const override { return static_cast<int>(y_.cols()); }
  nnet::Head expected_head() const override { return nnet::Head::SoftmaxVector; }
  double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                  Matrix* grad) const override;

 private:
  Matrix y_;
  double zeta_;
};

/// 1/2 sum_{a != baseline} ((y_a - y_b) / sqrt(zeta) - sqrt(zeta) (2 delta_a - 1))^2
/// on a softmax policy.
class BaselineGapLoss final : public LossAdapter {
 public:
  BaselineGapLoss(Matrix y, double zeta, int baseline);
  Eigen::Index rows() const override { return y_.rows(); }
  int output_dim() const override { return static_cast<int>(y_.cols()); }
  nnet::Head expected_head() const override { return nnet::Head::SoftmaxVector; }
  double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                  Matrix* grad) const override;

 private:
  Matrix y_;
  double zeta_;
  int baseline_;
};

/// 1/2 w_i ||out_i - t_i||^2.
class SquaredErrorLoss final : public LossAdapter {
 public:
  explicit SquaredErrorLoss(Matrix targets, std::optional<Vector> weights = std::nullopt);
  Eigen::Index rows() const override { return targets_.rows(); }
  int output_dim() const override { return static_cast<int>(targets_.cols()); }
  nnet::Head expected_head() const override { return nnet::Head::Identity; }
  double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                  Matrix* grad) const override;

 private:
  Matrix targets_;
  std::optional<Vector> weights_;
};

/// 1/2 (out_{i, a_i} - y_i)^2: only the logged column contributes.
class MaskedSquaredLoss final : public LossAdapter {
 public:
  MaskedSquaredLoss(Vector y_obs, std::vector<int> actions, int K);
  Eigen::Index rows() const override { return y_.size(); }
  int output_dim() const override { return K_; }
  nnet::Head expected_head() const override { return nnet::Head::Identity; }
  double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                  Matrix* grad) const override;

 private:
  Vector y_;
  std::vector<int> actions_;
  int K_;
};

/// Weighted binary cross-entropy on a logit: w (softplus(z) - label z).
class WeightedLogisticLoss final : public LossAdapter {
 public:
  WeightedLogisticLoss(Vector labels, Vector weights);
  Eigen::Index rows() const override { return labels_.size(); }
  int output_dim() const override { return 1; }
  nnet::Head expected_head() const override { return nnet::Head::Identity; }
  double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                  Matrix* grad) const override;

 private:
  Vector labels_;
  Vector weights_;
};

/// -sum_a delta_a y_a: negative per-unit welfare of a softmax policy.
class NegativeWelfareLoss final : public LossAdapter {
 public:
  explicit NegativeWelfareLoss(Matrix y);
  Eigen::Index rows() const override { return y_.rows(); }
  int output_dim() const override { return static_cast<int>(y_.cols()); }
  nnet::Head expected_head() const override { return nnet::Head::SoftmaxVector; }
  double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                  Matrix* grad) const override;

 private:
  Matrix y_;
};

/// Multinomial negative log-likelihood -log delta_{a_i}.
class CrossEntropyLoss final : public LossAdapter {
 public:
  CrossEntropyLoss(std::vector<int> actions, int K);
  Eigen::Index rows() const override { return static_cast<Eigen::Index>(actions_.size()); }
  int output_dim() const override { return K_; }
  nnet::Head expected_head() const override { return nnet::Head::SoftmaxVector; }
  double evaluate(std::span<const std::size_t> rows, const Matrix& output,
                  Matrix* grad) const override;

 private:
  std::vector<int> actions_;
  int K_;
};

}  // namespace gbpl::losses
