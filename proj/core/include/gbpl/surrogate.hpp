#pragma once

#include <cstddef>
#include <memory>
#include <string_view>
#include <vector>

#include "gbpl/data.hpp"
#include "gbpl/losses.hpp"
#include "gbpl/nnet.hpp"

namespace gbpl::surrogate {

enum class SurrogateKind { BinaryDiff, BaselineGap, FullVector };

std::string_view to_string(SurrogateKind kind);
SurrogateKind kind_from_string(std::string_view name);

/// Scale, temperature, prior variance and loss family of a generalized
/// posterior.
struct GibbsConfig {
  double zeta = 1.0;
  double eta = 1.0;
  double tau2 = 1.0;
  SurrogateKind kind = SurrogateKind::BinaryDiff;
  int baseline = 0;  // reference column for BaselineGap

  void validate() const;
};

/// Whether a squared surrogate carries the leading 1/2.
enum class Convention { Half, NoHalf };

inline constexpr double kSimplexTol = 1e-9;
inline constexpr double kTieTol = 1e-12;

double binary_loss(double zeta, double u, double f);

struct LossDecomposition {
  double const_term = 0.0;   // u^2 / (2 zeta)
  double linear_term = 0.0;  // -u f
  double quad_term = 0.0;    // zeta f^2 / 2
  double sum() const { return const_term + linear_term + quad_term; }
};

LossDecomposition binary_loss_decomposition(double zeta, double u, double f);

/// 1/2 sum_a (y_a / sqrt(zeta) - sqrt(zeta) delta_a)^2. Throws if delta is
/// off the simplex.
double fullvector_loss(double zeta, const Vector& y, const Vector& delta);

/// sum_{a != baseline} ((y_a - y_baseline) / sqrt(zeta) - sqrt(zeta) f_a)^2,
/// with `f` listing the non-baseline actions in column order.
double baseline_gap_loss(double zeta, const Vector& y, const Vector& f, int baseline);

/// Throws InvalidArgument unless every row is a probability vector within
/// kSimplexTol.
void check_simplex_rows(const Matrix& delta);

/// Binary policy as an n x 2 matrix [delta, 1 - delta] in the treat/control
/// column order.
Matrix binary_policy_matrix(const Vector& treat_prob);

/// (1/n) sum_i sum_a delta_ia y_ia.
double empirical_welfare(const Matrix& y, const Matrix& delta);
double empirical_welfare(const FullFeedbackDataset& data, const Matrix& delta);

/// Mean quadratic penalty of a policy under a surrogate family:
/// BinaryDiff mean (2 delta_1 - 1)^2, FullVector mean sum_a delta_a^2,
/// BaselineGap mean sum_{a != b} (2 delta_a - 1)^2.
double policy_penalty(const Matrix& delta, SurrogateKind kind, int baseline = 0);

double penalized_welfare(const Matrix& y, const Matrix& delta, double lambda,
                         SurrogateKind kind, int baseline = 0);
double penalized_welfare(const FullFeedbackDataset& data, const Matrix& delta, double lambda,
                         SurrogateKind kind, int baseline = 0);

/// Mean per-row surrogate loss of the score implied by `delta`:
/// f = 2 delta_1 - 1 for BinaryDiff, delta itself for FullVector, and
/// f_a = 2 delta_a - 1 for BaselineGap.
double empirical_surrogate_risk(const Matrix& y, const Matrix& delta, double zeta,
                                SurrogateKind kind, Convention convention, int baseline = 0);

/// Penalty weight under which surrogate minimization matches penalized
/// welfare maximization: zeta/4 for BinaryDiff and BaselineGap, zeta/2 for
/// FullVector.
double matching_lambda(SurrogateKind kind, double zeta);

/// Slope s in risk = A + s * penalized_welfare.
double affine_slope(SurrogateKind kind, Convention convention);

struct EquivalenceReport {
  std::vector<std::size_t> surrogate_argmin;
  std::vector<std::size_t> welfare_argmax;
  bool equal = false;
  Vector surrogate_objective;
  Vector welfare_objective;
  double lambda = 0.0;
  double slope = 0.0;
  /// max over pairs (j, k) of |(S_j - S_k) - slope (W_j - W_k)|.
  double max_affine_error = 0.0;
};

/// Indices within kTieTol of the minimum (or maximum).
std::vector<std::size_t> argmin_set(const Vector& v, double tol = kTieTol);
std::vector<std::size_t> argmax_set(const Vector& v, double tol = kTieTol);

/// Binary grid policies are treat probabilities, one entry per row.
EquivalenceReport verify_equivalence_binary(const Matrix& y, const std::vector<Vector>& grid,
                                            double zeta,
                                            Convention convention = Convention::Half);
EquivalenceReport verify_equivalence_binary(const FullFeedbackDataset& data,
                                            const std::vector<Vector>& grid, double zeta,
                                            Convention convention = Convention::Half);

/// Grid policies are n x K simplex-row matrices.
EquivalenceReport verify_equivalence_fullvector(const Matrix& y, const std::vector<Matrix>& grid,
                                                double zeta,
                                                Convention convention = Convention::Half);
EquivalenceReport verify_equivalence_fullvector(const FullFeedbackDataset& data,
                                                const std::vector<Matrix>& grid, double zeta,
                                                Convention convention = Convention::Half);

EquivalenceReport verify_equivalence_baseline_gap(const Matrix& y,
                                                  const std::vector<Matrix>& grid, double zeta,
                                                  int baseline,
                                                  Convention convention = Convention::NoHalf);

/// Euclidean projection onto the probability simplex (sort and threshold).
Vector project_simplex(const Vector& v);

/// clip(m / zeta, -1, 1).
double population_score_binary(double m_over_zeta);

struct ShiftInvarianceReport {
  /// max over policy pairs of the change in full-vector objective differences.
  double max_difference_change = 0.0;
  /// max over policies of |V(y + c) - V(y) - mean(c)|.
  double max_welfare_shift_error = 0.0;
  bool ranking_preserved = true;
  bool passed = false;
};

ShiftInvarianceReport shift_invariance_check(const Matrix& y, const std::vector<Matrix>& policies,
                                             const Vector& c, double zeta, double tol = 1e-9);

/// Network shape for a surrogate family: tanh score for BinaryDiff, softmax
/// policy otherwise.
nnet::MlpArchitecture surrogate_architecture(SurrogateKind kind, int input_dim, int K,
                                             std::vector<int> hidden_dims);

/// Per-sample training loss for outcome (or pseudo-outcome) matrix `y`.
std::unique_ptr<losses::LossAdapter> make_surrogate_loss(const GibbsConfig& config,
                                                         const Matrix& y);

/// Policy matrix (n x K) induced by network outputs: [(f+1)/2, (1-f)/2] for
/// a tanh score, the softmax rows otherwise.
Matrix policy_from_output(SurrogateKind kind, const Matrix& output);

}  // namespace gbpl::surrogate
