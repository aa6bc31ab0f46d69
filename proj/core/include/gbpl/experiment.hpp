#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gbpl/baselines.hpp"
#include "gbpl/counterfactual.hpp"
#include "gbpl/dgp.hpp"
#include "gbpl/eval.hpp"
#include "gbpl/policy.hpp"
#include "gbpl/posterior.hpp"
#include "gbpl/surrogate.hpp"

namespace gbpl::experiment {

enum class PropensitySource { True, Estimated };

struct FeedbackConfig {
  bool logged = false;
  dgp::LoggingSpec logging;
  counterfactual::PseudoKind pseudo = counterfactual::PseudoKind::IPW;
  PropensitySource propensity = PropensitySource::True;
  double epsilon_clip = counterfactual::kDefaultClip;
  /// 0 disables cross-fitting of the outcome regression.
  int cross_fit_folds = 0;
  std::vector<int> outcome_hidden{64, 64};
};

struct MethodConfig {
  enum class Type { Gbpl, Baseline };
  Type type = Type::Gbpl;
  std::string id;
  // Gbpl
  surrogate::SurrogateKind surrogate = surrogate::SurrogateKind::BinaryDiff;
  std::vector<double> zetas{1.0};
  bool cv = false;
  double eta = 1.0;
  double tau2 = 1.0;
  int baseline_action = 0;
  // Baseline
  baselines::BaselineKind baseline = baselines::BaselineKind::DiffReg;
  DecisionRule rule = DecisionRule::Deterministic;
};

struct ExperimentConfig {
  std::string name = "experiment";
  dgp::DgpSpec dgp;
  FeedbackConfig feedback;
  std::vector<MethodConfig> methods;
  std::vector<int> hidden_dims{128, 128};
  posterior::TrainConfig train;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  int trials = 2;
  std::uint64_t base_seed = 0;
  std::filesystem::path output_dir = "results";

  void validate() const;
};

/// JSON Schema (draft 2020-12) of the config file.
std::string config_schema();

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Resolved config with every default filled in.
std::string config_to_json(const ExperimentConfig& config);

/// Row indices of a 0.6/0.2/0.2-style split: validation and test get
/// floor(fraction * n) rows and training takes the remainder.
struct SplitRows {
  std::vector<std::size_t> train, val, test;
};
SplitRows split_rows(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

/// `requested` unless GBPL_JOBS is set; at least 1.
int resolve_jobs(int requested);

struct ExperimentResult {
  std::vector<eval::TrialResult> trials;  // trial-major, methods in config order
  std::vector<eval::AggregateRow> aggregate;
};

/// Runs every trial (concurrently up to `jobs`) and writes trials.csv,
/// aggregate.csv, welfare_lists.csv and manifest.json into output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, int jobs = 1);

/// Results of one trial, without writing anything.
std::vector<eval::TrialResult> run_trial(const ExperimentConfig& config, int trial);

struct VizConfig {
  int n = 1500;
  std::vector<int> hidden_dims{64, 64};
  surrogate::GibbsConfig gibbs;  // zeta = eta = tau2 = 1
  posterior::TrainConfig train;  // weight decay 1e-4
  posterior::SgldConfig sgld;
  std::array<double, 3> split{0.6, 0.2, 0.2};
  std::uint64_t seed = 0;
  int grid_points = 200;
  double level = 0.95;
  std::vector<double> x0{-2.0, -1.0, 0.0, 1.0, 2.0};
  std::filesystem::path output_dir = "results/posterior_viz";

  VizConfig();
};

struct VizResult {
  Matrix grid;  // columns x, f_mean, f_lo, f_hi, target
  posterior::CredibleInterval welfare;
  double map_mean_sq_deviation = 0.0;  // MAP f vs target on the grid
  int clipped_steps = 0;
};

/// MAP fit on OneDimViz data, SGLD from the MAP point, and CSV/JSON summaries
/// of the score-function draws and the welfare distribution.
VizResult run_posterior_viz(const VizConfig& config);

}  // namespace gbpl::experiment
