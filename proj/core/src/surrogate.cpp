#include "gbpl/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "gbpl/error.hpp"

namespace gbpl::surrogate {
namespace {

void check_zeta(double zeta) {
  if (!(zeta > 0.0) || !std::isfinite(zeta)) throw InvalidArgument("zeta must be positive");
}

void check_same_shape(const Matrix& y, const Matrix& delta) {
  if (y.rows() != delta.rows() || y.cols() != delta.cols()) {
    throw DimensionMismatch("policy matrix is " + std::to_string(delta.rows()) + " x " +
                            std::to_string(delta.cols()) + ", outcomes are " +
                            std::to_string(y.rows()) + " x " + std::to_string(y.cols()));
  }
  if (y.rows() < 1) throw InvalidArgument("need at least one row");
}

double convention_factor(Convention c) { return c == Convention::Half ? 0.5 : 1.0; }

double max_pairwise_affine_error(const Vector& s, const Vector& w, double slope) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    for (Eigen::Index k = j + 1; k < s.size(); ++k) {
      worst = std::max(worst, std::abs((s[j] - s[k]) - slope * (w[j] - w[k])));
    }
  }
  return worst;
}

EquivalenceReport build_report(const Matrix& y, const std::vector<Matrix>& grid, double zeta,
                               SurrogateKind kind, Convention convention, int baseline) {
  check_zeta(zeta);
  if (grid.empty()) throw InvalidArgument("policy grid must be nonempty");
  EquivalenceReport r;
  r.lambda = matching_lambda(kind, zeta);
  r.slope = affine_slope(kind, convention);
  const auto m = static_cast<Eigen::Index>(grid.size());
  r.surrogate_objective.resize(m);
  r.welfare_objective.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Matrix& delta = grid[static_cast<std::size_t>(j)];
    r.surrogate_objective[j] = empirical_surrogate_risk(y, delta, zeta, kind, convention, baseline);
    r.welfare_objective[j] = penalized_welfare(y, delta, r.lambda, kind, baseline);
  }
  r.surrogate_argmin = argmin_set(r.surrogate_objective);
  r.welfare_argmax = argmax_set(r.welfare_objective);
  r.equal = r.surrogate_argmin == r.welfare_argmax;
  r.max_affine_error = max_pairwise_affine_error(r.surrogate_objective, r.welfare_objective, r.slope);
  return r;
}

}  // namespace

std::string_view to_string(SurrogateKind kind) {
  switch (kind) {
    case SurrogateKind::BinaryDiff:
      return "binary_diff";
    case SurrogateKind::BaselineGap:
      return "baseline_gap";
    case SurrogateKind::FullVector:
      return "full_vector";
  }
  return "unknown";
}

SurrogateKind kind_from_string(std::string_view name) {
  if (name == "binary_diff") return SurrogateKind::BinaryDiff;
  if (name == "baseline_gap") return SurrogateKind::BaselineGap;
  if (name == "full_vector") return SurrogateKind::FullVector;
  throw InvalidArgument("unknown surrogate kind '" + std::string(name) + "'");
}

void GibbsConfig::validate() const {
  if (!(zeta > 0.0)) throw InvalidArgument("zeta must be positive");
  if (!(eta > 0.0)) throw InvalidArgument("eta must be positive");
  if (!(tau2 > 0.0)) throw InvalidArgument("tau2 must be positive");
  if (baseline < 0) throw InvalidArgument("baseline must be a valid action index");
}

double binary_loss(double zeta, double u, double f) {
  check_zeta(zeta);
  const double root = std::sqrt(zeta);
  const double r = u / root - root * f;
  return 0.5 * r * r;
}

LossDecomposition binary_loss_decomposition(double zeta, double u, double f) {
  check_zeta(zeta);
  return {u * u / (2.0 * zeta), -u * f, 0.5 * zeta * f * f};
}

double fullvector_loss(double zeta, const Vector& y, const Vector& delta) {
  check_zeta(zeta);
  if (y.size() != delta.size()) throw DimensionMismatch("y and delta lengths differ");
  check_simplex_rows(delta.transpose());
  const double root = std::sqrt(zeta);
  return 0.5 * (y.array() / root - root * delta.array()).square().sum();
}

double baseline_gap_loss(double zeta, const Vector& y, const Vector& f, int baseline) {
  check_zeta(zeta);
  if (baseline < 0 || baseline >= y.size()) throw InvalidArgument("baseline index out of range");
  if (f.size() != y.size() - 1) throw DimensionMismatch("f must have K - 1 entries");
  const double root = std::sqrt(zeta);
  double total = 0.0;
  Eigen::Index k = 0;
  for (Eigen::Index a = 0; a < y.size(); ++a) {
    if (a == baseline) continue;
    const double r = (y[a] - y[baseline]) / root - root * f[k++];
    total += r * r;
  }
  return total;
}

void check_simplex_rows(const Matrix& delta) {
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    if (delta.row(i).minCoeff() < -kSimplexTol ||
        std::abs(delta.row(i).sum() - 1.0) > kSimplexTol || !delta.row(i).allFinite()) {
      throw InvalidArgument("policy row " + std::to_string(i) + " is not on the simplex");
    }
  }
}

Matrix binary_policy_matrix(const Vector& treat_prob) {
  if ((treat_prob.array() < 0.0).any() || (treat_prob.array() > 1.0).any()) {
    throw InvalidArgument("binary policy probabilities must lie in [0, 1]");
  }
  Matrix out(treat_prob.size(), 2);
  out.col(kBinaryTreatColumn) = treat_prob;
  out.col(kBinaryControlColumn) = (1.0 - treat_prob.array()).matrix();
  return out;
}

double empirical_welfare(const Matrix& y, const Matrix& delta) {
  check_same_shape(y, delta);
  check_simplex_rows(delta);
  return y.cwiseProduct(delta).sum() / static_cast<double>(y.rows());
}

double empirical_welfare(const FullFeedbackDataset& data, const Matrix& delta) {
  return empirical_welfare(data.y, delta);
}

double policy_penalty(const Matrix& delta, SurrogateKind kind, int baseline) {
  const double n = static_cast<double>(delta.rows());
  switch (kind) {
    case SurrogateKind::BinaryDiff:
      if (delta.cols() != 2) throw DimensionMismatch("binary penalty needs two columns");
      return (2.0 * delta.col(kBinaryTreatColumn).array() - 1.0).square().sum() / n;
    case SurrogateKind::FullVector:
      return delta.array().square().sum() / n;
    case SurrogateKind::BaselineGap: {
      if (baseline < 0 || baseline >= delta.cols()) {
        throw InvalidArgument("baseline index out of range");
      }
      double total = 0.0;
      for (Eigen::Index a = 0; a < delta.cols(); ++a) {
        if (a == baseline) continue;
        total += (2.0 * delta.col(a).array() - 1.0).square().sum();
      }
      return total / n;
    }
  }
  return 0.0;
}

double penalized_welfare(const Matrix& y, const Matrix& delta, double lambda, SurrogateKind kind,
                         int baseline) {
  if (!(lambda >= 0.0)) throw InvalidArgument("lambda must be nonnegative");
  const double v = empirical_welfare(y, delta);
  if (lambda == 0.0) return v;
  return v - lambda * policy_penalty(delta, kind, baseline);
}

double penalized_welfare(const FullFeedbackDataset& data, const Matrix& delta, double lambda,
                         SurrogateKind kind, int baseline) {
  return penalized_welfare(data.y, delta, lambda, kind, baseline);
}

double empirical_surrogate_risk(const Matrix& y, const Matrix& delta, double zeta,
                                SurrogateKind kind, Convention convention, int baseline) {
  check_zeta(zeta);
  check_same_shape(y, delta);
  check_simplex_rows(delta);
  const double root = std::sqrt(zeta);
  const double c = convention_factor(convention);
  const double n = static_cast<double>(y.rows());
  double total = 0.0;
  switch (kind) {
    case SurrogateKind::BinaryDiff: {
      if (y.cols() != 2) throw DimensionMismatch("binary surrogate needs two columns");
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double u = y(i, kBinaryTreatColumn) - y(i, kBinaryControlColumn);
        const double f = 2.0 * delta(i, kBinaryTreatColumn) - 1.0;
        const double r = u / root - root * f;
        total += r * r;
      }
      break;
    }
    case SurrogateKind::FullVector:
      total = (y.array() / root - root * delta.array()).square().sum();
      break;
    case SurrogateKind::BaselineGap: {
      if (baseline < 0 || baseline >= y.cols()) {
        throw InvalidArgument("baseline index out of range");
      }
      for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index a = 0; a < y.cols(); ++a) {
          if (a == baseline) continue;
          const double r = (y(i, a) - y(i, baseline)) / root - root * (2.0 * delta(i, a) - 1.0);
          total += r * r;
        }
      }
      break;
    }
  }
  return c * total / n;
}

double matching_lambda(SurrogateKind kind, double zeta) {
  return kind == SurrogateKind::FullVector ? zeta / 2.0 : zeta / 4.0;
}

double affine_slope(SurrogateKind kind, Convention convention) {
  const double no_half = kind == SurrogateKind::FullVector ? -2.0 : -4.0;
  return convention == Convention::Half ? no_half / 2.0 : no_half;
}

std::vector<std::size_t> argmin_set(const Vector& v, double tol) {
  if (v.size() == 0) return {};
  const double best = v.minCoeff();
  const double band = tol * std::max(1.0, std::abs(best));
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < v.size(); ++j) {
    if (v[j] <= best + band) out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

std::vector<std::size_t> argmax_set(const Vector& v, double tol) {
  return argmin_set(-v, tol);
}

EquivalenceReport verify_equivalence_binary(const Matrix& y, const std::vector<Vector>& grid,
                                            double zeta, Convention convention) {
  if (y.cols() != 2) throw DimensionMismatch("binary equivalence needs two outcome columns");
  std::vector<Matrix> policies;
  policies.reserve(grid.size());
  for (const auto& g : grid) {
    if (g.size() != y.rows()) throw DimensionMismatch("grid policy length differs from n");
    policies.push_back(binary_policy_matrix(g));
  }
  return build_report(y, policies, zeta, SurrogateKind::BinaryDiff, convention, 0);
}

EquivalenceReport verify_equivalence_binary(const FullFeedbackDataset& data,
                                            const std::vector<Vector>& grid, double zeta,
                                            Convention convention) {
  return verify_equivalence_binary(data.y, grid, zeta, convention);
}

EquivalenceReport verify_equivalence_fullvector(const Matrix& y, const std::vector<Matrix>& grid,
                                                double zeta, Convention convention) {
  return build_report(y, grid, zeta, SurrogateKind::FullVector, convention, 0);
}

EquivalenceReport verify_equivalence_fullvector(const FullFeedbackDataset& data,
                                                const std::vector<Matrix>& grid, double zeta,
                                                Convention convention) {
  return verify_equivalence_fullvector(data.y, grid, zeta, convention);
}

EquivalenceReport verify_equivalence_baseline_gap(const Matrix& y,
                                                  const std::vector<Matrix>& grid, double zeta,
                                                  int baseline, Convention convention) {
  return build_report(y, grid, zeta, SurrogateKind::BaselineGap, convention, baseline);
}

Vector project_simplex(const Vector& v) {
  if (v.size() == 0) throw InvalidArgument("cannot project an empty vector");
  if (!v.allFinite()) throw InvalidArgument("projection input must be finite");
  std::vector<double> s(v.data(), v.data() + v.size());
  std::sort(s.begin(), s.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    cumulative += s[j];
    const double t = (cumulative - 1.0) / static_cast<double>(j + 1);
    if (s[j] - t > 0.0) theta = t;
  }
  Vector p = (v.array() - theta).cwiseMax(0.0).matrix();
  p /= p.sum();
  return p;
}

double population_score_binary(double m_over_zeta) {
  return std::clamp(m_over_zeta, -1.0, 1.0);
}

ShiftInvarianceReport shift_invariance_check(const Matrix& y, const std::vector<Matrix>& policies,
                                             const Vector& c, double zeta, double tol) {
  if (policies.empty()) throw InvalidArgument("need at least one policy");
  if (c.size() != y.rows()) throw DimensionMismatch("shift vector length differs from n");
  const Matrix shifted = y + c.replicate(1, y.cols());
  const auto m = static_cast<Eigen::Index>(policies.size());
  Vector before(m), after(m);
  ShiftInvarianceReport r;
  const double mean_c = c.mean();
  for (Eigen::Index j = 0; j < m; ++j) {
    const Matrix& d = policies[static_cast<std::size_t>(j)];
    before[j] = empirical_surrogate_risk(y, d, zeta, SurrogateKind::FullVector, Convention::Half);
    after[j] =
        empirical_surrogate_risk(shifted, d, zeta, SurrogateKind::FullVector, Convention::Half);
    r.max_welfare_shift_error =
        std::max(r.max_welfare_shift_error,
                 std::abs(empirical_welfare(shifted, d) - empirical_welfare(y, d) - mean_c));
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index k = j + 1; k < m; ++k) {
      const double db = before[j] - before[k];
      const double da = after[j] - after[k];
      r.max_difference_change = std::max(r.max_difference_change, std::abs(da - db));
      if ((db > tol && da < -tol) || (db < -tol && da > tol)) r.ranking_preserved = false;
    }
  }
  r.passed = r.max_difference_change <= tol && r.max_welfare_shift_error <= tol &&
             r.ranking_preserved;
  return r;
}

nnet::MlpArchitecture surrogate_architecture(SurrogateKind kind, int input_dim, int K,
                                             std::vector<int> hidden_dims) {
  nnet::MlpArchitecture arch;
  arch.input_dim = input_dim;
  arch.hidden_dims = std::move(hidden_dims);
  if (kind == SurrogateKind::BinaryDiff) {
    if (K != 2) throw InvalidArgument("binary surrogate requires K = 2");
    arch.output_dim = 1;
    arch.head = nnet::Head::TanhScalar;
  } else {
    arch.output_dim = K;
    arch.head = nnet::Head::SoftmaxVector;
  }
  arch.validate();
  return arch;
}

std::unique_ptr<losses::LossAdapter> make_surrogate_loss(const GibbsConfig& config,
                                                         const Matrix& y) {
  config.validate();
  switch (config.kind) {
    case SurrogateKind::BinaryDiff:
      if (y.cols() != 2) throw DimensionMismatch("binary surrogate needs two outcome columns");
      return std::make_unique<losses::BinarySurrogateLoss>(
          y.col(kBinaryTreatColumn) - y.col(kBinaryControlColumn), config.zeta);
    case SurrogateKind::FullVector:
      return std::make_unique<losses::FullVectorSurrogateLoss>(y, config.zeta);
    case SurrogateKind::BaselineGap:
      return std::make_unique<losses::BaselineGapLoss>(y, config.zeta, config.baseline);
  }
  throw InvalidArgument("unknown surrogate kind");
}

Matrix policy_from_output(SurrogateKind kind, const Matrix& output) {
  if (kind == SurrogateKind::BinaryDiff) {
    if (output.cols() != 1) throw DimensionMismatch("binary score must be one column");
    return binary_policy_matrix(((output.col(0).array() + 1.0) / 2.0).cwiseMax(0.0).cwiseMin(1.0));
  }
  return output;
}

}  // namespace gbpl::surrogate
