#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gbpl/data.hpp"
#include "gbpl/policy.hpp"

namespace gbpl::eval {

/// Mean over rows of max_a y_ia.
double oracle_welfare(const Matrix& y);
double oracle_welfare(const FullFeedbackDataset& test);

double test_welfare(const FullFeedbackDataset& test, const FittedPolicy& policy,
                    DecisionRule rule);

struct ZetaCandidate {
  double zeta = 1.0;
  Matrix val_decisions;  // n_val x K policy rows on the validation covariates
};

inline const std::vector<double> kDefaultZetaGrid{1.0, 0.1, 0.01, 0.001};

/// Index of the candidate with the highest welfare against `val_outcomes`
/// (true outcomes or pseudo-outcomes). Ties go to the smallest zeta.
std::size_t select_zeta_index(const std::vector<ZetaCandidate>& candidates,
                              const Matrix& val_outcomes);
double select_zeta_by_validation(const std::vector<ZetaCandidate>& candidates,
                                 const Matrix& val_outcomes);

struct PacBayesInputs {
  double empirical_risk_mean = 0.0;
  double kl = 0.0;
  long long n = 1;
  double delta = 0.05;
  double v = 1.0;
  double b = 1.0;
  double lambda = 0.1;

  /// Checks everything except lambda.
  void validate_base() const;
  void validate() const;
};

/// E_Q[risk] + (KL + log(1/delta)) / (lambda n) + lambda v / 2.
double pac_bayes_bound(const PacBayesInputs& in);

/// (KL + log(2/delta)) / (lambda n) + lambda v / 2.
double pac_bayes_two_sided(const PacBayesInputs& in);

/// min(sqrt(2 (KL + log(1/delta)) / (n v)), (1 - 1e-9) / b).
double optimal_lambda(const PacBayesInputs& in);

struct TrialResult {
  std::string method_id;
  int trial = 0;
  std::uint64_t seed = 0;
  double welfare = 0.0;
  double regret = 0.0;
  std::optional<double> selected_zeta;
};

struct AggregateRow {
  std::string method_id;
  double welfare_mean = 0.0;
  double welfare_var = 0.0;
  double welfare_se = 0.0;
  double regret_mean = 0.0;
  double regret_se = 0.0;
  int trials = 0;
};

/// Unbiased variance and se = sqrt(var / trials). Needs at least 2 trials.
AggregateRow aggregate(std::span<const TrialResult> trials);

/// One row per method, in order of first appearance.
std::vector<AggregateRow> aggregate_by_method(std::span<const TrialResult> trials);

void write_trials_csv(const std::filesystem::path& path, std::span<const TrialResult> trials);
void write_aggregate_csv(const std::filesystem::path& path, std::span<const AggregateRow> rows);
/// Wide layout: one column per method, one row per trial.
void write_welfare_lists_csv(const std::filesystem::path& path,
                             std::span<const TrialResult> trials);

}  // namespace gbpl::eval
