#include "gbpl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "gbpl/csv.hpp"
#include "gbpl/error.hpp"
#include "gbpl/stats.hpp"
#include "gbpl/surrogate.hpp"

namespace gbpl::eval {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

std::vector<std::string> method_order(std::span<const TrialResult> trials) {
  std::vector<std::string> order;
  for (const auto& t : trials) {
    if (std::find(order.begin(), order.end(), t.method_id) == order.end()) {
      order.push_back(t.method_id);
    }
  }
  return order;
}

}  // namespace

double oracle_welfare(const Matrix& y) {
  if (y.rows() == 0) throw InvalidArgument("oracle welfare of an empty table");
  return y.rowwise().maxCoeff().mean();
}

double oracle_welfare(const FullFeedbackDataset& test) { return oracle_welfare(test.y); }

double test_welfare(const FullFeedbackDataset& test, const FittedPolicy& policy,
                    DecisionRule rule) {
  return surrogate::empirical_welfare(test.y, policy.decide(test.x, rule));
}

std::size_t select_zeta_index(const std::vector<ZetaCandidate>& candidates,
                              const Matrix& val_outcomes) {
  if (candidates.empty()) throw InvalidArgument("no zeta candidates");
  std::size_t best = 0;
  double best_w = surrogate::empirical_welfare(val_outcomes, candidates[0].val_decisions);
  for (std::size_t j = 1; j < candidates.size(); ++j) {
    const double w = surrogate::empirical_welfare(val_outcomes, candidates[j].val_decisions);
    if (w > best_w || (w == best_w && candidates[j].zeta < candidates[best].zeta)) {
      best = j;
      best_w = w;
    }
  }
  return best;
}

double select_zeta_by_validation(const std::vector<ZetaCandidate>& candidates,
                                 const Matrix& val_outcomes) {
  return candidates[select_zeta_index(candidates, val_outcomes)].zeta;
}

void PacBayesInputs::validate_base() const {
  if (!std::isfinite(empirical_risk_mean)) throw InvalidArgument("empirical risk must be finite");
  if (!(kl >= 0.0) || !std::isfinite(kl)) throw InvalidArgument("KL must be nonnegative");
  if (n < 1) throw InvalidArgument("n must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in (0, 1]");
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("v must be positive");
  if (!(b > 0.0) || !std::isfinite(b)) throw InvalidArgument("b must be positive");
}

void PacBayesInputs::validate() const {
  validate_base();
  if (!(lambda > 0.0) || !(lambda * b < 1.0)) {
    throw InvalidArgument("lambda must lie in (0, 1/b)");
  }
}

double pac_bayes_bound(const PacBayesInputs& in) {
  in.validate();
  const double nl = in.lambda * static_cast<double>(in.n);
  return in.empirical_risk_mean + (in.kl + std::log(1.0 / in.delta)) / nl + in.lambda * in.v / 2.0;
}

double pac_bayes_two_sided(const PacBayesInputs& in) {
  in.validate();
  const double nl = in.lambda * static_cast<double>(in.n);
  return (in.kl + std::log(2.0 / in.delta)) / nl + in.lambda * in.v / 2.0;
}

double optimal_lambda(const PacBayesInputs& in) {
  in.validate_base();
  const double cap = (1.0 - 1e-9) / in.b;
  const double c = in.kl + std::log(1.0 / in.delta);
  if (c <= 0.0) return cap * 1e-9;
  return std::min(std::sqrt(2.0 * c / (static_cast<double>(in.n) * in.v)), cap);
}

AggregateRow aggregate(std::span<const TrialResult> trials) {
  if (trials.size() < 2) throw InvalidArgument("aggregation needs at least 2 trials");
  std::vector<double> w, r;
  for (const auto& t : trials) {
    w.push_back(t.welfare);
    r.push_back(t.regret);
  }
  AggregateRow row;
  row.method_id = trials.front().method_id;
  row.trials = static_cast<int>(trials.size());
  const double n = static_cast<double>(trials.size());
  row.welfare_mean = stats::mean(w);
  row.welfare_var = stats::sample_variance(w);
  row.welfare_se = std::sqrt(row.welfare_var / n);
  row.regret_mean = stats::mean(r);
  row.regret_se = std::sqrt(stats::sample_variance(r) / n);
  return row;
}

std::vector<AggregateRow> aggregate_by_method(std::span<const TrialResult> trials) {
  std::vector<AggregateRow> rows;
  for (const auto& m : method_order(trials)) {
    std::vector<TrialResult> mine;
    for (const auto& t : trials) {
      if (t.method_id == m) mine.push_back(t);
    }
    rows.push_back(aggregate(mine));
  }
  return rows;
}

void write_trials_csv(const std::filesystem::path& path, std::span<const TrialResult> trials) {
  auto out = open_out(path);
  out << "method,trial,seed,welfare,regret,selected_zeta\n";
  for (const auto& t : trials) {
    out << t.method_id << ',' << t.trial << ',' << t.seed << ',' << csv::format_number(t.welfare)
        << ',' << csv::format_number(t.regret) << ','
        << (t.selected_zeta ? csv::format_number(*t.selected_zeta) : std::string()) << '\n';
  }
}

void write_aggregate_csv(const std::filesystem::path& path, std::span<const AggregateRow> rows) {
  auto out = open_out(path);
  out << "method,welfare_mean,welfare_var,welfare_se,regret_mean,regret_se,trials\n";
  for (const auto& r : rows) {
    out << r.method_id << ',' << csv::format_number(r.welfare_mean) << ','
        << csv::format_number(r.welfare_var) << ',' << csv::format_number(r.welfare_se) << ','
        << csv::format_number(r.regret_mean) << ',' << csv::format_number(r.regret_se) << ','
        << r.trials << '\n';
  }
}

void write_welfare_lists_csv(const std::filesystem::path& path,
                             std::span<const TrialResult> trials) {
  const auto methods = method_order(trials);
  std::map<int, std::map<std::string, double>> by_trial;
  for (const auto& t : trials) by_trial[t.trial][t.method_id] = t.welfare;
  auto out = open_out(path);
  out << "trial";
  for (const auto& m : methods) out << ',' << m;
  out << '\n';
  for (const auto& [trial, values] : by_trial) {
    out << trial;
    for (const auto& m : methods) {
      out << ',';
      if (auto it = values.find(m); it != values.end()) out << csv::format_number(it->second);
    }
    out << '\n';
  }
}

}  // namespace gbpl::eval
