#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gbpl/data.hpp"

namespace gbpl::dgp {

enum class Family { Binary1, Binary2, Binary3, Multi1, Multi2, Multi3, OneDimViz, SemiSyntheticCsv };

std::string_view to_string(Family family);
Family family_from_string(std::string_view name);

struct DgpSpec {
  Family family = Family::Binary1;
  int n = 1000;
  int d = 10;
  int K = 2;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  std::string csv_path;         // SemiSyntheticCsv only
  std::string response_column;  // SemiSyntheticCsv; empty = last column

  /// Family defaults: binary d=10 K=2, multi d=10 K=5, OneDimViz d=1 K=2 with
  /// noise 0.6.
  static DgpSpec preset(Family family, int n, std::uint64_t seed);

  void validate() const;
};

struct GeneratedData {
  FullFeedbackDataset data;
  Matrix gamma;                  // true conditional means, n x K
  std::vector<int> oracle_actions;  // argmax of gamma rows, ties to the lowest column
  Matrix directions;             // d x m unit-norm direction vectors (may be empty)
};

/// Conditional means of every action at covariates `x` for a synthetic
/// family, given its direction vectors.
Matrix conditional_means(Family family, const Matrix& x, const Matrix& directions);

/// Treatment effect Y(1) - Y(0) of the binary families at `x`.
Vector binary_effect(Family family, const Matrix& x, const Matrix& directions);

/// Covariates, directions and noise come from independent sub-streams of
/// spec.seed. Covariates are drawn row by row.
GeneratedData generate_full_feedback(const DgpSpec& spec);

enum class LoggingKind { LogisticRandomIndex, SoftmaxRandomLogits };

std::string_view to_string(LoggingKind kind);
LoggingKind logging_from_string(std::string_view name);

struct LoggingSpec {
  LoggingKind kind = LoggingKind::LogisticRandomIndex;
  double clip = 0.05;
  double scale = 1.0;  // multiplies the random linear index
};

struct GeneratedLogged {
  LoggedDataset logged;
  GeneratedData hidden;  // full table, for evaluation only
};

/// Draws actions from clipped logging propensities and reveals only the
/// chosen outcome.
GeneratedLogged generate_logged(const DgpSpec& spec, const LoggingSpec& logging,
                                std::uint64_t seed);

/// Semi-synthetic full feedback from a numeric CSV: features and response are
/// standardized, and Y(a) = response + tanh(x'w_a / sqrt(d) + c_a).
GeneratedData semisynthetic_from_csv(const std::filesystem::path& path, int K,
                                     std::uint64_t effect_seed,
                                     const std::string& response_column = "");

/// CSV layout x_1..x_d, y_1..y_K.
void write_full_feedback_csv(const std::filesystem::path& path, const FullFeedbackDataset& data);
FullFeedbackDataset read_full_feedback_csv(const std::filesystem::path& path);

/// CSV layout x_1..x_d, action (1-based), y_obs, optional e_1..e_K.
void write_logged_csv(const std::filesystem::path& path, const LoggedDataset& logged);
LoggedDataset read_logged_csv(const std::filesystem::path& path);

}  // namespace gbpl::dgp
