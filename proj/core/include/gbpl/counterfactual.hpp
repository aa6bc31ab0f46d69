#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "gbpl/data.hpp"
#include "gbpl/nnet.hpp"
#include "gbpl/posterior.hpp"
#include "gbpl/surrogate.hpp"

namespace gbpl::counterfactual {

enum class PseudoKind { IPW, DR };

std::string_view to_string(PseudoKind kind);
PseudoKind pseudo_kind_from_string(std::string_view name);

inline constexpr double kDefaultClip = 0.05;

/// Euclidean projection of each row onto {p : p_a >= eps, sum_a p_a = 1}.
/// Rows already satisfying the floor are returned unchanged; eps = 1/K gives
/// the uniform row. Requires 0 < eps <= 1/K.
Matrix clip_to_overlap(const Matrix& e, double eps);

/// Throws InvalidArgument if any entry is below `floor` or not finite.
void check_overlap(const Matrix& e_hat, double floor);

/// Row i, column a: y_i / e_ia if a_i = a, else 0.
Matrix ipw_pseudo_outcomes(const LoggedDataset& logged, const Matrix& e_hat, double floor = 0.0);

/// gamma_ia + 1[a_i = a] (y_i - gamma_ia) / e_ia.
Matrix dr_pseudo_outcomes(const LoggedDataset& logged, const Matrix& e_hat,
                          const Matrix& gamma_hat, double floor = 0.0);

/// Treat column minus control column of the IPW or DR pseudo-outcomes.
Vector pseudo_difference_binary(const LoggedDataset& logged, const Matrix& e_hat,
                                const std::optional<Matrix>& gamma_hat, PseudoKind kind,
                                double floor = 0.0);

/// Balanced random fold labels 0..k-1.
std::vector<int> make_folds(std::size_t n, int k, std::uint64_t seed);

/// Disjoint (train, validation) row lists with floor(val_fraction * n)
/// validation rows, at least one of each.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::size_t n, double val_fraction, std::uint64_t seed);

enum class PropensityModelKind { Logistic, SoftmaxLinear };

struct PropensityModel {
  nnet::MlpArchitecture arch;
  nnet::ParamVector params;
  double clip = kDefaultClip;

  /// n x K propensities clipped to the overlap floor.
  Matrix predict(const Matrix& x) const;
};

/// Linear logistic / multinomial-logit fit by maximum likelihood. Throws if
/// an action never appears.
PropensityModel fit_propensity_model(const LoggedDataset& logged, PropensityModelKind kind,
                                     double clip, const posterior::TrainConfig& train);

Matrix fit_propensity(const LoggedDataset& logged, PropensityModelKind kind, double clip,
                      const posterior::TrainConfig& train);

struct OutcomeModel {
  nnet::MlpArchitecture arch;
  nnet::ParamVector params;

  Matrix predict(const Matrix& x) const { return nnet::forward(arch, params, x); }
};

struct OutcomeFit {
  Matrix gamma_hat;               // n x K, out-of-fold when cross-fitting
  std::vector<int> fold_id;       // empty without cross-fitting
  std::vector<OutcomeModel> models;
  /// Training rows of each model.
  std::vector<std::vector<std::size_t>> train_rows;

  /// Average of the fold models' predictions at new covariates.
  Matrix predict(const Matrix& x) const;
};

/// K-output regression trained on the observed column only. With fold ids,
/// rows of fold j are predicted by a model fit on the other folds.
OutcomeFit fit_outcome_regression(const LoggedDataset& logged, std::vector<int> hidden_dims,
                                  const posterior::TrainConfig& train,
                                  const std::optional<std::vector<int>>& fold_id = std::nullopt);

struct NuisanceSet {
  Matrix e_hat;
  std::optional<Matrix> gamma_hat;
  std::vector<int> fold_id;
  double epsilon_clip = kDefaultClip;

  void validate(Eigen::Index n, int K) const;
};

/// Full-vector surrogate equivalence on IPW pseudo-outcomes built from the
/// true propensities.
surrogate::EquivalenceReport ipw_welfare_equivalence_check(
    const LoggedDataset& logged, const std::vector<Matrix>& grid, double zeta,
    surrogate::Convention convention = surrogate::Convention::Half);

}  // namespace gbpl::counterfactual
