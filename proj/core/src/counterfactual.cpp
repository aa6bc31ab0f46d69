#include "gbpl/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gbpl/error.hpp"
#include "gbpl/losses.hpp"
#include "gbpl/rng.hpp"

namespace gbpl::counterfactual {
namespace {

constexpr double kNuisanceTau2 = 1e6;
constexpr double kNuisanceValFraction = 0.2;

void check_logged_shapes(const LoggedDataset& logged, const Matrix& m, const char* what) {
  if (m.rows() != logged.n() || m.cols() != logged.K) {
    throw DimensionMismatch(std::string(what) + " must be n x K");
  }
}

posterior::TrainResult fit_on_rows(const nnet::MlpArchitecture& arch, const Matrix& x,
                                   const losses::LossAdapter& full_loss_train,
                                   const losses::LossAdapter& full_loss_val,
                                   std::span<const std::size_t> train_rows,
                                   std::span<const std::size_t> val_rows,
                                   const posterior::TrainConfig& train) {
  const Matrix xt = select_rows(x, train_rows);
  const Matrix xv = select_rows(x, val_rows);
  surrogate::GibbsConfig gibbs;
  gibbs.eta = 1.0;
  gibbs.tau2 = kNuisanceTau2;
  return posterior::map_train(arch, {xt, full_loss_train}, {xv, full_loss_val}, gibbs, train);
}

std::vector<int> actions_at(const LoggedDataset& logged, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(logged.actions[r]);
  return out;
}

}  // namespace

std::string_view to_string(PseudoKind kind) { return kind == PseudoKind::IPW ? "ipw" : "dr"; }

PseudoKind pseudo_kind_from_string(std::string_view name) {
  if (name == "ipw") return PseudoKind::IPW;
  if (name == "dr") return PseudoKind::DR;
  throw InvalidArgument("unknown pseudo-outcome kind '" + std::string(name) + "'");
}

Matrix clip_to_overlap(const Matrix& e, double eps) {
  const Eigen::Index K = e.cols();
  if (K < 2) throw InvalidArgument("propensities need at least two columns");
  const double uniform = 1.0 / static_cast<double>(K);
  if (!(eps > 0.0) || eps > uniform + 1e-15) {
    throw InvalidArgument("overlap floor must lie in (0, 1/K]");
  }
  if (!e.allFinite()) throw InvalidArgument("propensities must be finite");
  Matrix out = e;
  const double mass = 1.0 - static_cast<double>(K) * eps;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    if (e.row(i).minCoeff() >= eps && std::abs(e.row(i).sum() - 1.0) <= 1e-12) continue;
    if (mass <= 1e-15) {
      out.row(i).setConstant(uniform);
      continue;
    }
    const Vector shifted = (e.row(i).transpose().array() - eps) / mass;
    out.row(i) = (eps + mass * surrogate::project_simplex(shifted).array()).transpose();
  }
  return out;
}

void check_overlap(const Matrix& e_hat, double floor) {
  if (!e_hat.allFinite()) throw InvalidArgument("propensities must be finite");
  for (Eigen::Index i = 0; i < e_hat.rows(); ++i) {
    for (Eigen::Index a = 0; a < e_hat.cols(); ++a) {
      if (!(e_hat(i, a) > 0.0) || e_hat(i, a) < floor) {
        throw InvalidArgument("propensity " + std::to_string(e_hat(i, a)) + " at row " +
                              std::to_string(i) + " violates the overlap floor");
      }
    }
  }
}

Matrix ipw_pseudo_outcomes(const LoggedDataset& logged, const Matrix& e_hat, double floor) {
  check_logged_shapes(logged, e_hat, "e_hat");
  check_overlap(e_hat, floor);
  Matrix out = Matrix::Zero(logged.n(), logged.K);
  for (Eigen::Index i = 0; i < logged.n(); ++i) {
    const int a = logged.actions[static_cast<std::size_t>(i)];
    out(i, a) = logged.y_obs[i] / e_hat(i, a);
  }
  return out;
}

Matrix dr_pseudo_outcomes(const LoggedDataset& logged, const Matrix& e_hat,
                          const Matrix& gamma_hat, double floor) {
  check_logged_shapes(logged, e_hat, "e_hat");
  check_logged_shapes(logged, gamma_hat, "gamma_hat");
  check_overlap(e_hat, floor);
  if (!gamma_hat.allFinite()) throw InvalidArgument("gamma_hat must be finite");
  Matrix out = gamma_hat;
  for (Eigen::Index i = 0; i < logged.n(); ++i) {
    const int a = logged.actions[static_cast<std::size_t>(i)];
    out(i, a) += (logged.y_obs[i] - gamma_hat(i, a)) / e_hat(i, a);
  }
  return out;
}

Vector pseudo_difference_binary(const LoggedDataset& logged, const Matrix& e_hat,
                                const std::optional<Matrix>& gamma_hat, PseudoKind kind,
                                double floor) {
  if (logged.K != 2) throw InvalidArgument("binary pseudo-differences need K = 2");
  Matrix g;
  if (kind == PseudoKind::IPW) {
    g = ipw_pseudo_outcomes(logged, e_hat, floor);
  } else {
    if (!gamma_hat) throw InvalidArgument("DR pseudo-outcomes need an outcome regression");
    g = dr_pseudo_outcomes(logged, e_hat, *gamma_hat, floor);
  }
  return g.col(kBinaryTreatColumn) - g.col(kBinaryControlColumn);
}

std::vector<int> make_folds(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("cross-fitting needs at least 2 folds");
  if (n < static_cast<std::size_t>(k)) throw InvalidArgument("fewer rows than folds");
  SeededRng rng(SeededRng::derive(seed, "folds"));
  const auto perm = rng.permutation(n);
  std::vector<int> fold(n);
  for (std::size_t j = 0; j < n; ++j) fold[perm[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
  return fold;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> holdout_split(
    std::size_t n, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw InvalidArgument("val_fraction must lie in (0, 1)");
  }
  if (n < 2) throw InvalidArgument("holdout split needs at least 2 rows");
  auto n_val = static_cast<std::size_t>(std::floor(val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  SeededRng rng(SeededRng::derive(seed, "holdout"));
  auto perm = rng.permutation(n);
  std::vector<std::size_t> val(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::sort(val.begin(), val.end());
  std::sort(tr.begin(), tr.end());
  return {std::move(tr), std::move(val)};
}

Matrix PropensityModel::predict(const Matrix& x) const {
  return clip_to_overlap(nnet::forward(arch, params, x), clip);
}

PropensityModel fit_propensity_model(const LoggedDataset& logged, PropensityModelKind kind,
                                     double clip, const posterior::TrainConfig& train) {
  logged.validate();
  if (kind == PropensityModelKind::Logistic && logged.K != 2) {
    throw InvalidArgument("logistic propensity model needs K = 2");
  }
  std::vector<int> counts(static_cast<std::size_t>(logged.K), 0);
  for (int a : logged.actions) ++counts[static_cast<std::size_t>(a)];
  for (int a = 0; a < logged.K; ++a) {
    if (counts[static_cast<std::size_t>(a)] == 0) {
      throw InvalidArgument("action " + std::to_string(a + 1) + " never appears in the log");
    }
  }
  PropensityModel model;
  model.clip = clip;
  model.arch = {static_cast<int>(logged.d()), {}, logged.K, nnet::Head::SoftmaxVector};
  const auto [tr, va] =
      holdout_split(static_cast<std::size_t>(logged.n()), kNuisanceValFraction, train.seed);
  const losses::CrossEntropyLoss loss_tr(actions_at(logged, tr), logged.K);
  const losses::CrossEntropyLoss loss_va(actions_at(logged, va), logged.K);
  model.params = fit_on_rows(model.arch, logged.x, loss_tr, loss_va, tr, va, train).params;
  return model;
}

Matrix fit_propensity(const LoggedDataset& logged, PropensityModelKind kind, double clip,
                      const posterior::TrainConfig& train) {
  return fit_propensity_model(logged, kind, clip, train).predict(logged.x);
}

Matrix OutcomeFit::predict(const Matrix& x) const {
  if (models.empty()) throw InvalidArgument("outcome fit has no models");
  Matrix sum = models.front().predict(x);
  for (std::size_t m = 1; m < models.size(); ++m) sum += models[m].predict(x);
  return sum / static_cast<double>(models.size());
}

OutcomeFit fit_outcome_regression(const LoggedDataset& logged, std::vector<int> hidden_dims,
                                  const posterior::TrainConfig& train,
                                  const std::optional<std::vector<int>>& fold_id) {
  logged.validate();
  const auto n = static_cast<std::size_t>(logged.n());
  OutcomeFit fit;
  fit.gamma_hat = Matrix::Zero(logged.n(), logged.K);
  const nnet::MlpArchitecture arch{static_cast<int>(logged.d()), std::move(hidden_dims),
                                   logged.K, nnet::Head::Identity};

  auto fit_model = [&](const std::vector<std::size_t>& rows, std::uint64_t seed) {
    const auto [tr_local, va_local] = holdout_split(rows.size(), kNuisanceValFraction, seed);
    std::vector<std::size_t> tr, va;
    for (auto r : tr_local) tr.push_back(rows[r]);
    for (auto r : va_local) va.push_back(rows[r]);
    const losses::MaskedSquaredLoss loss_tr(select_rows(logged.y_obs, tr), actions_at(logged, tr),
                                            logged.K);
    const losses::MaskedSquaredLoss loss_va(select_rows(logged.y_obs, va), actions_at(logged, va),
                                            logged.K);
    posterior::TrainConfig cfg = train;
    cfg.seed = seed;
    return OutcomeModel{arch, fit_on_rows(arch, logged.x, loss_tr, loss_va, tr, va, cfg).params};
  };

  if (!fold_id) {
    const auto rows = losses::all_rows(logged.n());
    fit.models.push_back(fit_model(rows, train.seed));
    fit.train_rows.push_back(rows);
    fit.gamma_hat = fit.models.front().predict(logged.x);
    return fit;
  }
  if (fold_id->size() != n) throw DimensionMismatch("fold_id must have one entry per row");
  const int k = *std::max_element(fold_id->begin(), fold_id->end()) + 1;
  if (k < 2 || *std::min_element(fold_id->begin(), fold_id->end()) < 0) {
    throw InvalidArgument("fold ids must be 0..k-1 with k >= 2");
  }
  fit.fold_id = *fold_id;
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> in, out;
    for (std::size_t i = 0; i < n; ++i) ((*fold_id)[i] == f ? out : in).push_back(i);
    if (out.empty() || in.size() < 2) throw InvalidArgument("every fold needs rows on both sides");
    fit.models.push_back(fit_model(in, SeededRng::derive(train.seed, static_cast<std::uint64_t>(f))));
    fit.train_rows.push_back(in);
    const Matrix pred = fit.models.back().predict(select_rows(logged.x, out));
    for (std::size_t r = 0; r < out.size(); ++r) {
      fit.gamma_hat.row(static_cast<Eigen::Index>(out[r])) = pred.row(static_cast<Eigen::Index>(r));
    }
  }
  return fit;
}

void NuisanceSet::validate(Eigen::Index n, int K) const {
  if (e_hat.rows() != n || e_hat.cols() != K) throw DimensionMismatch("e_hat must be n x K");
  check_overlap(e_hat, epsilon_clip - 1e-12);
  if (gamma_hat && (gamma_hat->rows() != n || gamma_hat->cols() != K)) {
    throw DimensionMismatch("gamma_hat must be n x K");
  }
  if (!fold_id.empty() && fold_id.size() != static_cast<std::size_t>(n)) {
    throw DimensionMismatch("fold_id must have one entry per row");
  }
}

surrogate::EquivalenceReport ipw_welfare_equivalence_check(const LoggedDataset& logged,
                                                           const std::vector<Matrix>& grid,
                                                           double zeta,
                                                           surrogate::Convention convention) {
  if (!logged.true_propensity) throw InvalidArgument("logged data carries no true propensities");
  const Matrix g = ipw_pseudo_outcomes(logged, *logged.true_propensity);
  return surrogate::verify_equivalence_fullvector(g, grid, zeta, convention);
}

}  // namespace gbpl::counterfactual
