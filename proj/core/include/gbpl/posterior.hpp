#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gbpl/losses.hpp"
#include "gbpl/nnet.hpp"
#include "gbpl/policy.hpp"
#include "gbpl/surrogate.hpp"

namespace gbpl::posterior {

/// Posterior weights prior_j exp(-eta loss_j), normalized in log space.
Vector finite_gibbs_posterior(const Vector& prior, const Vector& losses, double eta);

/// eta <q, losses> + KL(q || prior), with 0 log 0 = 0.
double variational_objective(const Vector& q, const Vector& prior, const Vector& losses,
                             double eta);

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 128;
  int max_epochs = 200;
  int patience = 20;
  std::uint64_t seed = 0;
  /// Optimizer-style L2 term wd * w added to the gradient only; the objective
  /// itself is unchanged.
  double weight_decay = 0.0;

  void validate() const;
};

/// Full data set bound to a network and a per-sample loss.
struct ObjectiveData {
  const Matrix& x;
  const losses::LossAdapter& loss;
};

/// eta * scale * sum_i loss_i + ||w||^2 / (2 tau2). `grad` may be null.
double map_objective(const nnet::MlpArchitecture& arch, const nnet::ParamVector& params,
                     const ObjectiveData& data, double eta, double tau2, double scale,
                     Vector* grad);

struct TrainResult {
  nnet::ParamVector params;
  double init_val_objective = 0.0;
  double best_val_objective = 0.0;
  int best_epoch = 0;  // 0 means the initial point was never improved on
  int epochs_run = 0;
  std::vector<double> val_history;  // one entry per evaluated epoch, init first
};

/// Minimizes eta (n/B) sum_batch loss + ||w||^2 / (2 tau2) with Adam and
/// returns the snapshot with the lowest validation objective
/// eta (n_train / n_val) sum_val loss + ||w||^2 / (2 tau2).
TrainResult map_train(const nnet::MlpArchitecture& arch, const ObjectiveData& train,
                      const ObjectiveData& val, const surrogate::GibbsConfig& gibbs,
                      const TrainConfig& config,
                      const std::optional<nnet::ParamVector>& init = std::nullopt);

/// MAP-trained surrogate policy on an outcome (or pseudo-outcome) table.
FittedPolicy fit_policy_map(const Matrix& x_train, const Matrix& y_train, const Matrix& x_val,
                            const Matrix& y_val, const surrogate::GibbsConfig& gibbs,
                            const std::vector<int>& hidden_dims, const TrainConfig& config,
                            TrainResult* info = nullptr);

struct SgldConfig {
  double step_size = 2e-5;
  int burn_in = 1200;
  int num_draws = 300;
  int thin = 8;
  int batch_size = 128;
  /// Global gradient-norm threshold; 0 or infinity disables clipping.
  double clip_norm = 10.0;
  /// step_t = step_size * (1 + t / decay_offset)^(-decay_power); 0 keeps it constant.
  double decay_power = 0.0;
  double decay_offset = 1000.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SamplerMeta {
  int burn_in = 0;
  int thin = 0;
  double step_size = 0.0;
  int batch_size = 0;
  std::uint64_t seed = 0;
  double clip_norm = 0.0;
  double decay_power = 0.0;
  double decay_offset = 0.0;
  int clipped_steps = 0;
};

struct PosteriorDraws {
  nnet::MlpArchitecture arch;
  std::vector<nnet::ParamVector> draws;
  SamplerMeta meta;

  /// Directory holding draw_00000.bin, ... and manifest.json.
  void save(const std::filesystem::path& dir) const;
  static PosteriorDraws load(const std::filesystem::path& dir);
};

/// w <- w - (eps/2) grad U(w) + sqrt(eps) xi with the minibatch loss scaled
/// to the full sample.
PosteriorDraws sgld_sample(const nnet::MlpArchitecture& arch, const ObjectiveData& data,
                           const surrogate::GibbsConfig& gibbs, const nnet::ParamVector& init,
                           const SgldConfig& config);

struct LaplaceOptions {
  double fd_step = 1e-4;
  double variance_floor = 1e-8;
  double stationarity_tol = 1e-3;
  bool require_stationary = true;
};

struct DiagLaplace {
  Vector variance;
  Vector curvature;                        // finite-difference H_jj
  std::vector<std::size_t> negative_curvature;
  double grad_max_norm = 0.0;

  bool flagged() const { return !negative_curvature.empty(); }
};

/// Per-coordinate variance 1/H_jj of the objective eta sum loss + ||w||^2/(2 tau2)
/// around `map_point`. `eta` may be zero here (pure prior).
DiagLaplace diag_laplace(const nnet::MlpArchitecture& arch, const ObjectiveData& data,
                         double eta, double tau2, const nnet::ParamVector& map_point,
                         const LaplaceOptions& options = {});

struct CredibleInterval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> welfare;  // one value per draw
};

/// Test welfare of each draw's decision rule, with equal-tailed empirical
/// quantiles at `level`.
CredibleInterval welfare_credible_interval(const PosteriorDraws& draws, const Matrix& x_test,
                                           const Matrix& y_test, DecisionRule rule,
                                           double level);

/// Credible interval from precomputed per-draw values.
CredibleInterval credible_interval(std::vector<double> values, double level);

}  // namespace gbpl::posterior
