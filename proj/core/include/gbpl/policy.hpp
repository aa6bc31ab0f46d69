#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gbpl/nnet.hpp"

namespace gbpl {

enum class DecisionRule { Deterministic, Randomized };

DecisionRule rule_from_string(std::string_view name);
std::string_view to_string(DecisionRule rule);

/// Randomized policy rows (n x K) from a tanh score (K = 2) or softmax rows.
Matrix randomized_from_output(nnet::Head head, const Matrix& output);

/// One-hot rows: for a tanh score, treat (column 0) iff f >= 0; otherwise
/// the first column attaining the row maximum.
Matrix argmax_one_hot(const Matrix& scores);
Matrix deterministic_from_output(nnet::Head head, const Matrix& output);

Matrix decisions_from_output(nnet::Head head, const Matrix& output, DecisionRule rule);

/// How the outputs of a fitted policy network are turned into decisions.
enum class ScoreKind {
  TanhScore,     // binary score f in (-1, 1)
  Softmax,       // K-simplex rows
  Threshold,     // scalar; treat iff >= 0 under either rule
  OutcomeArgmax  // predicted outcome per action; argmax under either rule
};

std::string_view to_string(ScoreKind kind);
ScoreKind score_kind_from_string(std::string_view name);

struct PolicyNet {
  nnet::MlpArchitecture arch;
  nnet::ParamVector params;
};

/// A trained decision rule. Several nets are concatenated column-wise, as for
/// per-action regressions.
struct FittedPolicy {
  std::string method;
  ScoreKind score = ScoreKind::Softmax;
  int K = 2;
  std::vector<PolicyNet> nets;

  Matrix scores(const Matrix& x) const;
  /// n x K rows on the simplex (one-hot under the deterministic rule).
  Matrix decide(const Matrix& x, DecisionRule rule) const;

  /// Writes policy.json and net_<j>.bin into `dir`.
  void save(const std::filesystem::path& dir) const;
  static FittedPolicy load(const std::filesystem::path& dir);
};

}  // namespace gbpl
