#include "gbpl/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>

#include "gbpl/data.hpp"
#include "gbpl/error.hpp"
#include "gbpl/stats.hpp"
#include "json_io.hpp"

namespace gbpl::posterior {
namespace {

void check_probability_vector(const Vector& p, const char* what) {
  if (p.size() == 0) throw InvalidArgument(std::string(what) + " is empty");
  if ((p.array() < 0.0).any() || !p.allFinite() || std::abs(p.sum() - 1.0) > 1e-12) {
    throw InvalidArgument(std::string(what) + " must be a probability vector");
  }
}

/// Cycles through shuffled row indices in fixed-size batches.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::size_t batch, std::uint64_t seed)
      : n_(n), batch_(std::min(batch, n)), rng_(seed) {
    reshuffle();
  }

  std::span<const std::size_t> next() {
    if (pos_ >= n_) reshuffle();
    const std::size_t len = std::min(batch_, n_ - pos_);
    std::span<const std::size_t> out(order_.data() + pos_, len);
    pos_ += len;
    return out;
  }

  bool epoch_done() const { return pos_ >= n_; }
  void reshuffle() {
    order_ = rng_.permutation(n_);
    pos_ = 0;
  }

 private:
  std::size_t n_;
  std::size_t batch_;
  SeededRng rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

/// Sum of the loss over `rows` and its parameter gradient.
double data_term(const nnet::MlpArchitecture& arch, const nnet::ParamVector& params,
                 const ObjectiveData& data, std::span<const std::size_t> rows, Vector* grad) {
  const Matrix xb = select_rows(data.x, rows);
  const auto trace = nnet::forward_trace(arch, params, xb);
  Matrix g_out;
  const double value = data.loss.evaluate(rows, trace.output, grad ? &g_out : nullptr);
  if (grad) *grad = nnet::backward(arch, params, trace, g_out).values;
  return value;
}

void check_binding(const nnet::MlpArchitecture& arch, const ObjectiveData& data) {
  if (data.x.rows() != data.loss.rows()) {
    throw DimensionMismatch("covariates and loss targets have different row counts");
  }
  if (data.loss.output_dim() != arch.output_dim) {
    throw DimensionMismatch("loss expects " + std::to_string(data.loss.output_dim()) +
                            " outputs, network has " + std::to_string(arch.output_dim));
  }
  if (data.x.rows() < 1) throw InvalidArgument("data set must be nonempty");
}

std::string draw_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "draw_%05zu.bin", i);
  return buf;
}

}  // namespace

Vector finite_gibbs_posterior(const Vector& prior, const Vector& losses, double eta) {
  check_probability_vector(prior, "prior");
  if ((prior.array() <= 0.0).any()) throw InvalidArgument("prior must be strictly positive");
  if (losses.size() != prior.size()) throw DimensionMismatch("prior and losses differ in length");
  if (!(eta >= 0.0)) throw InvalidArgument("eta must be nonnegative");
  if (!losses.allFinite()) throw InvalidArgument("losses must be finite");
  const Vector logw = prior.array().log() - eta * losses.array();
  const double m = logw.maxCoeff();
  Vector w = (logw.array() - m).exp().matrix();
  const double z = w.sum();
  if (!(z > 0.0) || !std::isfinite(z)) throw NumericalError("posterior weights underflowed");
  return w / z;
}

double variational_objective(const Vector& q, const Vector& prior, const Vector& losses,
                             double eta) {
  if (q.size() != prior.size() || q.size() != losses.size()) {
    throw DimensionMismatch("q, prior and losses differ in length");
  }
  if (std::abs(q.sum() - 1.0) > 1e-9 || (q.array() < 0.0).any()) {
    throw InvalidArgument("q must be a probability vector");
  }
  double kl = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    if (q[j] == 0.0) continue;
    if (prior[j] <= 0.0) throw InvalidArgument("q is not absolutely continuous: infinite KL");
    kl += q[j] * std::log(q[j] / prior[j]);
  }
  return eta * q.dot(losses) + kl;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be positive");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (max_epochs < 1) throw InvalidArgument("max_epochs must be positive");
  if (patience < 1) throw InvalidArgument("patience must be positive");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be nonnegative");
}

double map_objective(const nnet::MlpArchitecture& arch, const nnet::ParamVector& params,
                     const ObjectiveData& data, double eta, double tau2, double scale,
                     Vector* grad) {
  check_binding(arch, data);
  const double prior = params.values.squaredNorm() / (2.0 * tau2);
  if (eta == 0.0) {
    if (grad) *grad = params.values / tau2;
    return prior;
  }
  const auto rows = losses::all_rows(data.x.rows());
  const double total = data_term(arch, params, data, rows, grad);
  if (grad) {
    *grad *= eta * scale;
    *grad += params.values / tau2;
  }
  return eta * scale * total + prior;
}

TrainResult map_train(const nnet::MlpArchitecture& arch, const ObjectiveData& train,
                      const ObjectiveData& val, const surrogate::GibbsConfig& gibbs,
                      const TrainConfig& config, const std::optional<nnet::ParamVector>& init) {
  arch.validate();
  config.validate();
  if (!(gibbs.eta > 0.0) || !(gibbs.tau2 > 0.0)) {
    throw InvalidArgument("eta and tau2 must be positive");
  }
  check_binding(arch, train);
  check_binding(arch, val);

  nnet::ParamVector w;
  if (init) {
    if (init->dim() != arch.param_count()) throw DimensionMismatch("init has the wrong size");
    w = *init;
  } else {
    SeededRng init_rng(SeededRng::derive(config.seed, "init"));
    w = nnet::init_params(arch, init_rng);
  }

  const auto n_train = static_cast<double>(train.x.rows());
  const double val_scale = n_train / static_cast<double>(val.x.rows());
  auto val_objective = [&](const nnet::ParamVector& p) {
    const double v = map_objective(arch, p, val, gibbs.eta, gibbs.tau2, val_scale, nullptr);
    if (!std::isfinite(v)) throw NumericalError("validation objective is not finite");
    return v;
  };

  TrainResult result;
  result.init_val_objective = val_objective(w);
  result.best_val_objective = result.init_val_objective;
  result.params = w;
  result.val_history.push_back(result.init_val_objective);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  Vector m = Vector::Zero(w.values.size());
  Vector v = Vector::Zero(w.values.size());
  double beta1_t = 1.0, beta2_t = 1.0;
  BatchCycler batches(static_cast<std::size_t>(train.x.rows()),
                      static_cast<std::size_t>(config.batch_size),
                      SeededRng::derive(config.seed, "batches"));
  Vector g;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    batches.reshuffle();
    while (!batches.epoch_done()) {
      const auto rows = batches.next();
      const double loss = data_term(arch, w, train, rows, &g);
      if (!std::isfinite(loss) || !g.allFinite()) {
        throw NumericalError("non-finite loss during training at epoch " + std::to_string(epoch));
      }
      g *= gibbs.eta * n_train / static_cast<double>(rows.size());
      g += w.values / gibbs.tau2;
      if (config.weight_decay > 0.0) g += config.weight_decay * w.values;
      beta1_t *= kBeta1;
      beta2_t *= kBeta2;
      m = kBeta1 * m + (1.0 - kBeta1) * g;
      v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseAbs2();
      const double lr_t = config.learning_rate / (1.0 - beta1_t);
      const double v_corr = 1.0 / (1.0 - beta2_t);
      w.values.array() -= lr_t * m.array() / ((v.array() * v_corr).sqrt() + kEps);
    }
    result.epochs_run = epoch;
    const double obj = val_objective(w);
    result.val_history.push_back(obj);
    if (obj < result.best_val_objective) {
      result.best_val_objective = obj;
      result.best_epoch = epoch;
      result.params = w;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

FittedPolicy fit_policy_map(const Matrix& x_train, const Matrix& y_train, const Matrix& x_val,
                            const Matrix& y_val, const surrogate::GibbsConfig& gibbs,
                            const std::vector<int>& hidden_dims, const TrainConfig& config,
                            TrainResult* info) {
  const auto arch = surrogate::surrogate_architecture(
      gibbs.kind, static_cast<int>(x_train.cols()), static_cast<int>(y_train.cols()), hidden_dims);
  const auto loss_train = surrogate::make_surrogate_loss(gibbs, y_train);
  const auto loss_val = surrogate::make_surrogate_loss(gibbs, y_val);
  auto result = map_train(arch, {x_train, *loss_train}, {x_val, *loss_val}, gibbs, config);
  FittedPolicy policy;
  policy.method = "gbpl_" + std::string(surrogate::to_string(gibbs.kind));
  policy.score = gibbs.kind == surrogate::SurrogateKind::BinaryDiff ? ScoreKind::TanhScore
                                                                    : ScoreKind::Softmax;
  policy.K = static_cast<int>(y_train.cols());
  policy.nets.push_back({arch, result.params});
  if (info) *info = std::move(result);
  return policy;
}

void SgldConfig::validate() const {
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    throw InvalidArgument("SGLD step_size must be positive");
  }
  if (burn_in < 0) throw InvalidArgument("burn_in must be nonnegative");
  if (num_draws < 1) throw InvalidArgument("num_draws must be positive");
  if (thin < 1) throw InvalidArgument("thin must be positive");
  if (batch_size < 1) throw InvalidArgument("batch_size must be positive");
  if (!(clip_norm >= 0.0)) throw InvalidArgument("clip_norm must be nonnegative");
  if (!(decay_power >= 0.0)) throw InvalidArgument("decay_power must be nonnegative");
  if (!(decay_offset > 0.0)) throw InvalidArgument("decay_offset must be positive");
}

PosteriorDraws sgld_sample(const nnet::MlpArchitecture& arch, const ObjectiveData& data,
                           const surrogate::GibbsConfig& gibbs, const nnet::ParamVector& init,
                           const SgldConfig& config) {
  arch.validate();
  config.validate();
  check_binding(arch, data);
  if (!(gibbs.eta >= 0.0) || !(gibbs.tau2 > 0.0)) {
    throw InvalidArgument("eta must be nonnegative and tau2 positive");
  }
  if (init.dim() != arch.param_count()) throw DimensionMismatch("init has the wrong size");

  PosteriorDraws out;
  out.arch = arch;
  out.meta.burn_in = config.burn_in;
  out.meta.thin = config.thin;
  out.meta.step_size = config.step_size;
  out.meta.batch_size = config.batch_size;
  out.meta.seed = config.seed;
  out.meta.clip_norm = config.clip_norm;
  out.meta.decay_power = config.decay_power;
  out.meta.decay_offset = config.decay_offset;
  out.draws.reserve(static_cast<std::size_t>(config.num_draws));

  const bool clip = config.clip_norm > 0.0 && std::isfinite(config.clip_norm);
  const auto n = static_cast<double>(data.x.rows());
  BatchCycler batches(static_cast<std::size_t>(data.x.rows()),
                      static_cast<std::size_t>(config.batch_size),
                      SeededRng::derive(config.seed, "batches"));
  SeededRng noise(SeededRng::derive(config.seed, "noise"));

  nnet::ParamVector w = init;
  Vector g;
  const long total = static_cast<long>(config.burn_in) +
                     static_cast<long>(config.num_draws) * static_cast<long>(config.thin);
  for (long t = 1; t <= total; ++t) {
    const auto rows = batches.next();
    if (gibbs.eta > 0.0) {
      data_term(arch, w, data, rows, &g);
      g *= gibbs.eta * n / static_cast<double>(rows.size());
      g += w.values / gibbs.tau2;
    } else {
      g = w.values / gibbs.tau2;
    }
    if (clip) {
      const double norm = g.norm();
      if (norm > config.clip_norm) {
        g *= config.clip_norm / norm;
        ++out.meta.clipped_steps;
      }
    }
    double eps = config.step_size;
    if (config.decay_power > 0.0) {
      eps *= std::pow(1.0 + static_cast<double>(t - 1) / config.decay_offset,
                      -config.decay_power);
    }
    const double root = std::sqrt(eps);
    w.values -= 0.5 * eps * g;
    for (Eigen::Index j = 0; j < w.values.size(); ++j) w.values[j] += root * noise.normal();
    if (!w.all_finite()) {
      throw NumericalError("non-finite parameter at SGLD iteration " + std::to_string(t));
    }
    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) out.draws.push_back(w);
  }
  return out;
}

void PosteriorDraws::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < draws.size(); ++i) {
    nnet::write_param_blob(dir / draw_name(i), draws[i]);
  }
  nlohmann::json manifest;
  manifest["architecture"] = detail::architecture_to_json(arch);
  manifest["count"] = draws.size();
  manifest["dim"] = arch.param_count();
  manifest["encoding"] = "float64-le";
  manifest["sampler_meta"] = {
      {"burn_in", meta.burn_in},         {"thin", meta.thin},
      {"step_size", meta.step_size},     {"batch_size", meta.batch_size},
      {"seed", meta.seed},               {"clip_norm", meta.clip_norm},
      {"decay_power", meta.decay_power}, {"decay_offset", meta.decay_offset},
      {"clipped_steps", meta.clipped_steps}};
  detail::write_json_file(dir / "manifest.json", manifest);
}

PosteriorDraws PosteriorDraws::load(const std::filesystem::path& dir) {
  const auto manifest = detail::read_json_file(dir / "manifest.json");
  PosteriorDraws out;
  try {
    out.arch = detail::architecture_from_json(manifest.at("architecture"));
    const auto& m = manifest.at("sampler_meta");
    out.meta.burn_in = m.at("burn_in").get<int>();
    out.meta.thin = m.at("thin").get<int>();
    out.meta.step_size = m.at("step_size").get<double>();
    out.meta.batch_size = m.at("batch_size").get<int>();
    out.meta.seed = m.at("seed").get<std::uint64_t>();
    out.meta.clip_norm = m.at("clip_norm").get<double>();
    out.meta.decay_power = m.value("decay_power", 0.0);
    out.meta.decay_offset = m.value("decay_offset", 1000.0);
    out.meta.clipped_steps = m.value("clipped_steps", 0);
    const auto count = manifest.at("count").get<std::size_t>();
    for (std::size_t i = 0; i < count; ++i) {
      out.draws.push_back(nnet::read_param_blob(dir / draw_name(i), out.arch.param_count()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed draw manifest in " + dir.string() + ": " + e.what());
  }
  return out;
}

DiagLaplace diag_laplace(const nnet::MlpArchitecture& arch, const ObjectiveData& data,
                         double eta, double tau2, const nnet::ParamVector& map_point,
                         const LaplaceOptions& options) {
  arch.validate();
  if (!(eta >= 0.0) || !(tau2 > 0.0)) throw InvalidArgument("eta >= 0 and tau2 > 0 required");
  if (!(options.fd_step > 0.0) || !(options.variance_floor > 0.0)) {
    throw InvalidArgument("fd_step and variance_floor must be positive");
  }
  auto gradient = [&](const nnet::ParamVector& p) {
    Vector g;
    map_objective(arch, p, data, eta, tau2, 1.0, &g);
    return g;
  };
  DiagLaplace out;
  out.grad_max_norm = gradient(map_point).cwiseAbs().maxCoeff();
  if (options.require_stationary && out.grad_max_norm >= options.stationarity_tol) {
    throw InvalidArgument("map_point is not stationary: max |gradient| = " +
                          std::to_string(out.grad_max_norm));
  }
  const auto dim = map_point.values.size();
  out.curvature.resize(dim);
  out.variance.resize(dim);
  const double h = options.fd_step;
  for (Eigen::Index j = 0; j < dim; ++j) {
    nnet::ParamVector plus = map_point, minus = map_point;
    plus.values[j] += h;
    minus.values[j] -= h;
    const double hjj = (gradient(plus)[j] - gradient(minus)[j]) / (2.0 * h);
    out.curvature[j] = hjj;
    if (!(hjj > 0.0)) {
      out.negative_curvature.push_back(static_cast<std::size_t>(j));
      out.variance[j] = options.variance_floor;
    } else {
      out.variance[j] = std::max(1.0 / hjj, options.variance_floor);
    }
  }
  return out;
}

CredibleInterval credible_interval(std::vector<double> values, double level) {
  if (values.empty()) throw InvalidArgument("no draws to summarize");
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("level must lie in (0, 1)");
  CredibleInterval ci;
  ci.mean = stats::mean(values);
  const double tail = (1.0 - level) / 2.0;
  ci.lo = stats::quantile(values, tail);
  ci.hi = stats::quantile(values, 1.0 - tail);
  ci.welfare = std::move(values);
  return ci;
}

CredibleInterval welfare_credible_interval(const PosteriorDraws& draws, const Matrix& x_test,
                                           const Matrix& y_test, DecisionRule rule,
                                           double level) {
  if (draws.draws.empty()) throw InvalidArgument("no draws to summarize");
  if (x_test.rows() != y_test.rows()) throw DimensionMismatch("test x and y row counts differ");
  std::vector<double> welfare;
  welfare.reserve(draws.draws.size());
  for (const auto& p : draws.draws) {
    const Matrix out = nnet::forward(draws.arch, p, x_test);
    const Matrix d = decisions_from_output(draws.arch.head, out, rule);
    if (d.cols() != y_test.cols()) throw DimensionMismatch("policy and outcome widths differ");
    welfare.push_back(surrogate::empirical_welfare(y_test, d));
  }
  return credible_interval(std::move(welfare), level);
}

}  // namespace gbpl::posterior
