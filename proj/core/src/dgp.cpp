#include "gbpl/dgp.hpp"

#include <cmath>
#include <numbers>

#include "gbpl/counterfactual.hpp"
#include "gbpl/csv.hpp"
#include "gbpl/error.hpp"
#include "gbpl/rng.hpp"

namespace gbpl::dgp {
namespace {

bool is_binary(Family f) {
  return f == Family::Binary1 || f == Family::Binary2 || f == Family::Binary3;
}

bool is_multi(Family f) {
  return f == Family::Multi1 || f == Family::Multi2 || f == Family::Multi3;
}

/// Baseline mean shared by DGPk and MultiK.
double baseline(int variant, const double* x) {
  switch (variant) {
    case 1:
      return x[0] + 0.5 * x[1] * x[1] - 0.25 * x[2] * x[3];
    case 2:
      return 0.5 * std::sin(x[0]) + 0.3 * x[1] - 0.2 * x[2] * x[2];
    default:
      return 0.2 * x[0] - 0.1 * x[1] + 0.1 * std::tanh(x[2]);
  }
}

int variant_of(Family f) {
  switch (f) {
    case Family::Binary1:
    case Family::Multi1:
      return 1;
    case Family::Binary2:
    case Family::Multi2:
      return 2;
    default:
      return 3;
  }
}

Matrix unit_directions(SeededRng& rng, int d, int m) {
  Matrix w(d, m);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < d; ++k) w(k, j) = rng.normal();
    w.col(j).normalize();
  }
  return w;
}

int direction_count(const DgpSpec& spec) {
  if (spec.family == Family::Binary1) return 1;
  if (is_multi(spec.family)) return spec.K;
  return 0;
}

std::vector<int> row_argmax(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < m.cols(); ++a) {
      if (m(i, a) > m(i, best)) best = a;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

std::vector<std::string> numbered(const std::string& prefix, Eigen::Index count) {
  std::vector<std::string> names;
  for (Eigen::Index j = 1; j <= count; ++j) names.push_back(prefix + std::to_string(j));
  return names;
}

}  // namespace

std::string_view to_string(Family family) {
  switch (family) {
    case Family::Binary1:
      return "binary1";
    case Family::Binary2:
      return "binary2";
    case Family::Binary3:
      return "binary3";
    case Family::Multi1:
      return "multi1";
    case Family::Multi2:
      return "multi2";
    case Family::Multi3:
      return "multi3";
    case Family::OneDimViz:
      return "onedim_viz";
    case Family::SemiSyntheticCsv:
      return "semisynthetic_csv";
  }
  return "unknown";
}

Family family_from_string(std::string_view name) {
  for (Family f : {Family::Binary1, Family::Binary2, Family::Binary3, Family::Multi1,
                   Family::Multi2, Family::Multi3, Family::OneDimViz, Family::SemiSyntheticCsv}) {
    if (name == to_string(f)) return f;
  }
  throw InvalidArgument("unknown DGP family '" + std::string(name) + "'");
}

DgpSpec DgpSpec::preset(Family family, int n, std::uint64_t seed) {
  DgpSpec s;
  s.family = family;
  s.n = n;
  s.seed = seed;
  if (is_multi(family)) {
    s.K = 5;
  } else if (family == Family::OneDimViz) {
    s.d = 1;
    s.noise_sd = 0.6;
  }
  return s;
}

void DgpSpec::validate() const {
  if (family == Family::SemiSyntheticCsv) {
    if (csv_path.empty()) throw InvalidArgument("semi-synthetic DGP needs csv_path");
    if (K < 2) throw InvalidArgument("K must be at least 2");
    return;
  }
  if (n < 1) throw InvalidArgument("n must be positive");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
    throw InvalidArgument("noise_sd must be nonnegative");
  }
  if (is_binary(family)) {
    if (K != 2) throw InvalidArgument("binary DGPs require K = 2");
    if (d < 4) throw InvalidArgument("binary DGPs need d >= 4");
  } else if (is_multi(family)) {
    if (K < 2) throw InvalidArgument("multi-action DGPs need K >= 2");
    if (d < 4) throw InvalidArgument("multi-action DGPs need d >= 4");
  } else if (family == Family::OneDimViz) {
    if (d != 1 || K != 2) throw InvalidArgument("OneDimViz requires d = 1 and K = 2");
  }
}

Vector binary_effect(Family family, const Matrix& x, const Matrix& directions) {
  Vector tau(x.rows());
  const double root_d = std::sqrt(static_cast<double>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    switch (family) {
      case Family::Binary1:
        tau[i] = 2.0 * std::tanh(x.row(i).dot(directions.col(0)) / root_d);
        break;
      case Family::Binary2:
        tau[i] = 1.5 * std::sin(x(i, 0) + x(i, 1));
        break;
      case Family::Binary3:
        tau[i] = 2.5 * ((x(i, 0) > 0.0 ? 1.0 : 0.0) - 0.5 + 0.2 * x(i, 1));
        break;
      case Family::OneDimViz:
        tau[i] = 1.2 * std::sin(x(i, 0));
        break;
      default:
        throw InvalidArgument("not a binary family");
    }
  }
  return tau;
}

Matrix conditional_means(Family family, const Matrix& x, const Matrix& directions) {
  const Eigen::Index n = x.rows();
  if (is_binary(family) || family == Family::OneDimViz) {
    const Vector tau = binary_effect(family, x, directions);
    Matrix g(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::RowVectorXd row = x.row(i);
      const double g0 = family == Family::OneDimViz
                            ? 0.2 * row[0] + 0.2 * std::sin(1.5 * row[0])
                            : baseline(variant_of(family), row.data());
      g(i, kBinaryTreatColumn) = g0 + tau[i];
      g(i, kBinaryControlColumn) = g0;
    }
    return g;
  }
  if (!is_multi(family)) throw InvalidArgument("family has no closed-form means");
  const Eigen::Index K = directions.cols();
  const double root_d = std::sqrt(static_cast<double>(x.cols()));
  const int variant = variant_of(family);
  Matrix g(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::RowVectorXd row = x.row(i);
    const double b = baseline(variant, row.data());
    for (Eigen::Index col = 0; col < K; ++col) {
      const double a = static_cast<double>(col + 1);
      const double index = row.dot(directions.col(col)) / root_d;
      double effect = 0.0;
      if (variant == 1) {
        effect = 1.5 * std::sin(index + 0.3 * a);
      } else if (variant == 2) {
        effect = 2.0 * std::tanh(index - 0.2 * a);
      } else {
        effect = 1.0 * (index > 0.0 ? 1.0 : 0.0) + 0.1 * a;
      }
      g(i, col) = b + effect;
    }
  }
  return g;
}

GeneratedData generate_full_feedback(const DgpSpec& spec) {
  spec.validate();
  if (spec.family == Family::SemiSyntheticCsv) {
    return semisynthetic_from_csv(spec.csv_path, spec.K, spec.seed, spec.response_column);
  }
  SeededRng cov_rng(SeededRng::derive(spec.seed, "covariates"));
  SeededRng dir_rng(SeededRng::derive(spec.seed, "directions"));
  SeededRng noise_rng(SeededRng::derive(spec.seed, "noise"));

  GeneratedData out;
  Matrix x(spec.n, spec.d);
  for (int i = 0; i < spec.n; ++i) {
    for (int j = 0; j < spec.d; ++j) {
      x(i, j) = spec.family == Family::OneDimViz ? cov_rng.uniform(-2.5, 2.5) : cov_rng.normal();
    }
  }
  out.directions = unit_directions(dir_rng, spec.d, direction_count(spec));
  out.gamma = conditional_means(spec.family, x, out.directions);
  Matrix y = out.gamma;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    for (Eigen::Index a = 0; a < y.cols(); ++a) y(i, a) += spec.noise_sd * noise_rng.normal();
  }
  out.oracle_actions = row_argmax(out.gamma);
  out.data = FullFeedbackDataset{std::move(x), std::move(y)};
  return out;
}

std::string_view to_string(LoggingKind kind) {
  return kind == LoggingKind::LogisticRandomIndex ? "logistic_random_index"
                                                  : "softmax_random_logits";
}

LoggingKind logging_from_string(std::string_view name) {
  if (name == "logistic_random_index") return LoggingKind::LogisticRandomIndex;
  if (name == "softmax_random_logits") return LoggingKind::SoftmaxRandomLogits;
  throw InvalidArgument("unknown logging policy '" + std::string(name) + "'");
}

GeneratedLogged generate_logged(const DgpSpec& spec, const LoggingSpec& logging,
                                std::uint64_t seed) {
  GeneratedLogged out;
  out.hidden = generate_full_feedback(spec);
  const Matrix& x = out.hidden.data.x;
  const Eigen::Index n = x.rows(), d = x.cols();
  const int K = out.hidden.data.K();
  if (!(logging.clip > 0.0) || logging.clip > 1.0 / K + 1e-15) {
    throw InvalidArgument("logging clip must lie in (0, 1/K]");
  }
  SeededRng coef_rng(SeededRng::derive(seed, "logging"));
  SeededRng action_rng(SeededRng::derive(seed, "actions"));
  const double root_d = std::sqrt(static_cast<double>(d));

  Matrix e(n, K);
  if (logging.kind == LoggingKind::LogisticRandomIndex) {
    if (K != 2) throw InvalidArgument("logistic logging requires K = 2");
    Vector beta(d);
    for (Eigen::Index k = 0; k < d; ++k) beta[k] = coef_rng.normal() / root_d;
    const Vector index = logging.scale * (x * beta);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = 1.0 / (1.0 + std::exp(-index[i]));
      e(i, kBinaryTreatColumn) = p;
      e(i, kBinaryControlColumn) = 1.0 - p;
    }
  } else {
    Matrix coef(d, K);
    for (Eigen::Index k = 0; k < d; ++k) {
      for (int a = 0; a < K; ++a) coef(k, a) = coef_rng.normal() / root_d;
    }
    const Matrix logits = logging.scale * (x * coef);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      e.row(i) = (logits.row(i).array() - m).exp().matrix();
      e.row(i) /= e.row(i).sum();
    }
  }
  e = counterfactual::clip_to_overlap(e, logging.clip);

  LoggedDataset& lg = out.logged;
  lg.x = x;
  lg.K = K;
  lg.actions.resize(static_cast<std::size_t>(n));
  lg.y_obs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = action_rng.uniform01();
    double cumulative = 0.0;
    int chosen = K - 1;
    for (int a = 0; a < K; ++a) {
      cumulative += e(i, a);
      if (u < cumulative) {
        chosen = a;
        break;
      }
    }
    lg.actions[static_cast<std::size_t>(i)] = chosen;
    lg.y_obs[i] = out.hidden.data.y(i, chosen);
  }
  lg.true_propensity = std::move(e);
  lg.validate();
  return out;
}

GeneratedData semisynthetic_from_csv(const std::filesystem::path& path, int K,
                                     std::uint64_t effect_seed,
                                     const std::string& response_column) {
  if (K < 2) throw InvalidArgument("K must be at least 2");
  const auto table = csv::read(path);
  if (table.values.rows() < 2) throw InvalidArgument("semi-synthetic CSV needs at least 2 rows");
  if (table.values.cols() < 2) {
    throw InvalidArgument("semi-synthetic CSV needs a feature column and a response column");
  }
  const Eigen::Index resp = response_column.empty() ? table.values.cols() - 1
                                                    : table.column(response_column);
  const Eigen::Index n = table.values.rows();
  const Eigen::Index d = table.values.cols() - 1;
  Matrix x(n, d);
  for (Eigen::Index j = 0, k = 0; j < table.values.cols(); ++j) {
    if (j != resp) x.col(k++) = table.values.col(j);
  }
  auto standardize = [n](Vector v, bool require_spread, const char* what) {
    const double mean = v.mean();
    v.array() -= mean;
    const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(n - 1));
    if (!(sd > 0.0)) {
      if (require_spread) throw InvalidArgument(std::string(what) + " has zero variance");
      return v;
    }
    return Vector(v / sd);
  };
  const Vector r = standardize(table.values.col(resp), true, "response column");
  for (Eigen::Index j = 0; j < d; ++j) x.col(j) = standardize(x.col(j), false, "feature");

  SeededRng dir_rng(SeededRng::derive(effect_seed, "directions"));
  SeededRng offset_rng(SeededRng::derive(effect_seed, "offsets"));
  GeneratedData out;
  out.directions = unit_directions(dir_rng, static_cast<int>(d), K);
  Vector c(K);
  for (int a = 0; a < K; ++a) c[a] = offset_rng.uniform(-1.0, 1.0);
  const double root_d = std::sqrt(static_cast<double>(d));
  Matrix y(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int a = 0; a < K; ++a) {
      y(i, a) = r[i] + std::tanh(x.row(i).dot(out.directions.col(a)) / root_d + c[a]);
    }
  }
  out.gamma = y;
  out.oracle_actions = row_argmax(y);
  out.data = FullFeedbackDataset{std::move(x), std::move(y)};
  return out;
}

void write_full_feedback_csv(const std::filesystem::path& path, const FullFeedbackDataset& data) {
  auto header = numbered("x_", data.d());
  const auto ys = numbered("y_", data.K());
  header.insert(header.end(), ys.begin(), ys.end());
  Matrix values(data.n(), data.d() + data.K());
  values << data.x, data.y;
  csv::write(path, header, values);
}

FullFeedbackDataset read_full_feedback_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  std::vector<Eigen::Index> xs, ys;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j].rfind("x_", 0) == 0) xs.push_back(static_cast<Eigen::Index>(j));
    if (t.header[j].rfind("y_", 0) == 0) ys.push_back(static_cast<Eigen::Index>(j));
  }
  if (xs.empty() || ys.size() < 2) throw IoError(path.string() + " needs x_* and y_* columns");
  FullFeedbackDataset data{Matrix(t.values.rows(), static_cast<Eigen::Index>(xs.size())),
                           Matrix(t.values.rows(), static_cast<Eigen::Index>(ys.size()))};
  for (std::size_t j = 0; j < xs.size(); ++j) data.x.col(static_cast<Eigen::Index>(j)) = t.values.col(xs[j]);
  for (std::size_t j = 0; j < ys.size(); ++j) data.y.col(static_cast<Eigen::Index>(j)) = t.values.col(ys[j]);
  data.validate();
  return data;
}

void write_logged_csv(const std::filesystem::path& path, const LoggedDataset& logged) {
  auto header = numbered("x_", logged.d());
  header.emplace_back("action");
  header.emplace_back("y_obs");
  const Eigen::Index extra = logged.true_propensity ? logged.K : 0;
  if (extra) {
    const auto es = numbered("e_", logged.K);
    header.insert(header.end(), es.begin(), es.end());
  }
  Matrix values(logged.n(), logged.d() + 2 + extra);
  values.leftCols(logged.d()) = logged.x;
  for (Eigen::Index i = 0; i < logged.n(); ++i) {
    values(i, logged.d()) = logged.actions[static_cast<std::size_t>(i)] + 1;
  }
  values.col(logged.d() + 1) = logged.y_obs;
  if (extra) values.rightCols(extra) = *logged.true_propensity;
  csv::write(path, header, values);
}

LoggedDataset read_logged_csv(const std::filesystem::path& path) {
  const auto t = csv::read(path);
  std::vector<Eigen::Index> xs, es;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j].rfind("x_", 0) == 0) xs.push_back(static_cast<Eigen::Index>(j));
    if (t.header[j].rfind("e_", 0) == 0) es.push_back(static_cast<Eigen::Index>(j));
  }
  const Eigen::Index a_col = t.column("action");
  const Eigen::Index y_col = t.column("y_obs");
  LoggedDataset lg;
  lg.x.resize(t.values.rows(), static_cast<Eigen::Index>(xs.size()));
  for (std::size_t j = 0; j < xs.size(); ++j) lg.x.col(static_cast<Eigen::Index>(j)) = t.values.col(xs[j]);
  lg.y_obs = t.values.col(y_col);
  int max_action = 0;
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    const double a = t.values(i, a_col);
    if (a != std::floor(a) || a < 1) throw IoError("actions must be integers in 1..K");
    lg.actions.push_back(static_cast<int>(a) - 1);
    max_action = std::max(max_action, static_cast<int>(a));
  }
  lg.K = es.empty() ? std::max(2, max_action) : static_cast<int>(es.size());
  if (!es.empty()) {
    Matrix e(t.values.rows(), static_cast<Eigen::Index>(es.size()));
    for (std::size_t j = 0; j < es.size(); ++j) e.col(static_cast<Eigen::Index>(j)) = t.values.col(es[j]);
    lg.true_propensity = std::move(e);
  }
  lg.validate();
  return lg;
}

}  // namespace gbpl::dgp
