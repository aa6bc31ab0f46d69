#include "gbpl/baselines.hpp"

#include <string>

#include "gbpl/error.hpp"
#include "gbpl/losses.hpp"
#include "gbpl/rng.hpp"

namespace gbpl::baselines {
namespace {

using losses::LossAdapter;

PolicyNet train_net(const nnet::MlpArchitecture& arch, const Matrix& x_train,
                    const LossAdapter& loss_train, const Matrix& x_val, const LossAdapter& loss_val,
                    const BaselineConfig& config, std::uint64_t seed) {
  surrogate::GibbsConfig gibbs;
  gibbs.eta = 1.0;
  gibbs.tau2 = config.tau2;
  posterior::TrainConfig train = config.train;
  train.seed = seed;
  auto result = posterior::map_train(arch, {x_train, loss_train}, {x_val, loss_val}, gibbs, train);
  return {arch, std::move(result.params)};
}

nnet::MlpArchitecture arch_for(const BaselineConfig& c, Eigen::Index d, int out, nnet::Head head) {
  return {static_cast<int>(d), c.hidden_dims, out, head};
}

FittedPolicy make_policy(BaselineKind kind, ScoreKind score, int K) {
  FittedPolicy p;
  p.method = std::string(to_string(kind));
  p.score = score;
  p.K = K;
  return p;
}

void check_kind(BaselineKind kind, int K) {
  if (!supports(kind, K)) {
    throw InvalidArgument(std::string(to_string(kind)) + " does not support K = " +
                          std::to_string(K));
  }
}

Vector column_gap(const Matrix& y) {
  if (y.cols() != 2) throw DimensionMismatch("binary baselines need two outcome columns");
  return y.col(kBinaryTreatColumn) - y.col(kBinaryControlColumn);
}

// Fits shared by both feedback modes once targets are an outcome table.
FittedPolicy fit_on_table(BaselineKind kind, const Matrix& x_train, const Matrix& y_train,
                          const Matrix& x_val, const Matrix& y_val, const BaselineConfig& config) {
  const int K = static_cast<int>(y_train.cols());
  const auto d = x_train.cols();
  const std::uint64_t seed = config.train.seed;
  switch (kind) {
    case BaselineKind::DiffReg: {
      auto p = make_policy(kind, ScoreKind::Threshold, K);
      const losses::SquaredErrorLoss lt(Matrix(column_gap(y_train)));
      const losses::SquaredErrorLoss lv(Matrix(column_gap(y_val)));
      p.nets.push_back(train_net(arch_for(config, d, 1, nnet::Head::Identity), x_train, lt, x_val,
                                 lv, config, seed));
      return p;
    }
    case BaselineKind::WeightedLogistic: {
      auto p = make_policy(kind, ScoreKind::Threshold, K);
      auto labels_weights = [](const Vector& u) {
        return std::pair<Vector, Vector>((u.array() > 0.0).cast<double>(), u.cwiseAbs());
      };
      const auto [lab_t, w_t] = labels_weights(column_gap(y_train));
      const auto [lab_v, w_v] = labels_weights(column_gap(y_val));
      const losses::WeightedLogisticLoss lt(lab_t, w_t);
      const losses::WeightedLogisticLoss lv(lab_v, w_v);
      p.nets.push_back(train_net(arch_for(config, d, 1, nnet::Head::Identity), x_train, lt, x_val,
                                 lv, config, seed));
      return p;
    }
    case BaselineKind::PluginReg: {
      auto p = make_policy(kind, ScoreKind::OutcomeArgmax, K);
      for (int a = 0; a < K; ++a) {
        const losses::SquaredErrorLoss lt(Matrix(y_train.col(a)));
        const losses::SquaredErrorLoss lv(Matrix(y_val.col(a)));
        p.nets.push_back(train_net(arch_for(config, d, 1, nnet::Head::Identity), x_train, lt,
                                   x_val, lv, config,
                                   SeededRng::derive(seed, static_cast<std::uint64_t>(a))));
      }
      return p;
    }
    case BaselineKind::PluginRegK: {
      auto p = make_policy(kind, ScoreKind::OutcomeArgmax, K);
      const losses::SquaredErrorLoss lt(y_train);
      const losses::SquaredErrorLoss lv(y_val);
      p.nets.push_back(train_net(arch_for(config, d, K, nnet::Head::Identity), x_train, lt, x_val,
                                 lv, config, seed));
      return p;
    }
    case BaselineKind::DirectWelfare: {
      auto p = make_policy(kind, ScoreKind::Softmax, K);
      const losses::NegativeWelfareLoss lt(y_train);
      const losses::NegativeWelfareLoss lv(y_val);
      p.nets.push_back(train_net(arch_for(config, d, K, nnet::Head::SoftmaxVector), x_train, lt,
                                 x_val, lv, config, seed));
      return p;
    }
  }
  throw InvalidArgument("unknown baseline");
}

std::vector<std::size_t> rows_with_action(const LoggedDataset& lg, int a) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < lg.actions.size(); ++i) {
    if (lg.actions[i] == a) rows.push_back(i);
  }
  return rows;
}

}  // namespace

std::string_view to_string(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::DiffReg:
      return "DiffReg";
    case BaselineKind::PluginReg:
      return "PluginReg";
    case BaselineKind::PluginRegK:
      return "PluginRegK";
    case BaselineKind::WeightedLogistic:
      return "WeightedLogistic";
    case BaselineKind::DirectWelfare:
      return "DirectWelfare";
  }
  return "unknown";
}

BaselineKind baseline_from_string(std::string_view name) {
  for (auto k : {BaselineKind::DiffReg, BaselineKind::PluginReg, BaselineKind::PluginRegK,
                 BaselineKind::WeightedLogistic, BaselineKind::DirectWelfare}) {
    if (name == to_string(k)) return k;
  }
  throw InvalidArgument("unknown baseline '" + std::string(name) + "'");
}

bool supports(BaselineKind kind, int K) {
  if (K < 2) return false;
  if (kind == BaselineKind::DiffReg || kind == BaselineKind::WeightedLogistic) return K == 2;
  return true;
}

FittedPolicy fit_baseline(BaselineKind kind, const FullFeedbackDataset& train,
                          const FullFeedbackDataset& val, const BaselineConfig& config) {
  train.validate();
  val.validate();
  if (train.K() != val.K() || train.d() != val.d()) {
    throw DimensionMismatch("train and validation shapes differ");
  }
  check_kind(kind, train.K());
  return fit_on_table(kind, train.x, train.y, val.x, val.y, config);
}

FittedPolicy fit_baseline_logged(BaselineKind kind, const LoggedDataset& train,
                                 const Matrix& pseudo_train, const LoggedDataset& val,
                                 const Matrix& pseudo_val, const BaselineConfig& config) {
  train.validate();
  val.validate();
  if (train.K != val.K || train.d() != val.d()) {
    throw DimensionMismatch("train and validation shapes differ");
  }
  check_kind(kind, train.K);
  const int K = train.K;
  const auto d = train.d();
  const std::uint64_t seed = config.train.seed;
  if (kind == BaselineKind::PluginRegK) {
    auto p = make_policy(kind, ScoreKind::OutcomeArgmax, K);
    const losses::MaskedSquaredLoss lt(train.y_obs, train.actions, K);
    const losses::MaskedSquaredLoss lv(val.y_obs, val.actions, K);
    p.nets.push_back(
        train_net(arch_for(config, d, K, nnet::Head::Identity), train.x, lt, val.x, lv, config, seed));
    return p;
  }
  if (kind == BaselineKind::PluginReg) {
    auto p = make_policy(kind, ScoreKind::OutcomeArgmax, K);
    for (int a = 0; a < K; ++a) {
      const auto rt = rows_with_action(train, a);
      const auto rv = rows_with_action(val, a);
      if (rt.empty() || rv.empty()) {
        throw InvalidArgument("action " + std::to_string(a + 1) +
                              " is missing from the training or validation log");
      }
      const losses::SquaredErrorLoss lt(Matrix(select_rows(train.y_obs, rt)));
      const losses::SquaredErrorLoss lv(Matrix(select_rows(val.y_obs, rv)));
      p.nets.push_back(train_net(arch_for(config, d, 1, nnet::Head::Identity),
                                 select_rows(train.x, rt), lt, select_rows(val.x, rv), lv, config,
                                 SeededRng::derive(seed, static_cast<std::uint64_t>(a))));
    }
    return p;
  }
  if (pseudo_train.rows() != train.n() || pseudo_train.cols() != K ||
      pseudo_val.rows() != val.n() || pseudo_val.cols() != K) {
    throw DimensionMismatch("pseudo-outcome tables must be n x K");
  }
  return fit_on_table(kind, train.x, pseudo_train, val.x, pseudo_val, config);
}

}  // namespace gbpl::baselines
