#include "gbpl/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include "gbpl/csv.hpp"
#include "gbpl/error.hpp"
#include "gbpl/losses.hpp"
#include "gbpl/rng.hpp"
#include "gbpl/stats.hpp"
#include "json_io.hpp"

namespace gbpl::experiment {
namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  if (!obj.is_object()) throw InvalidArgument(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; }) ==
        allowed.end()) {
      throw InvalidArgument("unknown key '" + key + "' in " + where);
    }
  }
}

template <class T>
void read_if(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

dgp::DgpSpec parse_dgp(const json& j) {
  reject_unknown_keys(j, {"family", "n", "d", "K", "noise_sd", "csv_path", "response_column"},
                      "dgp");
  const auto family = dgp::family_from_string(j.at("family").get<std::string>());
  auto spec = dgp::DgpSpec::preset(family, j.value("n", 1000), 0);
  read_if(j, "d", spec.d);
  read_if(j, "K", spec.K);
  read_if(j, "noise_sd", spec.noise_sd);
  read_if(j, "csv_path", spec.csv_path);
  read_if(j, "response_column", spec.response_column);
  return spec;
}

FeedbackConfig parse_feedback(const json& j) {
  reject_unknown_keys(j,
                      {"mode", "logging", "logging_clip", "logging_scale", "pseudo", "propensity",
                       "epsilon_clip", "cross_fit_folds", "outcome_hidden"},
                      "feedback");
  FeedbackConfig f;
  const auto mode = j.value("mode", std::string("full"));
  if (mode == "full") return f;
  if (mode != "logged") throw InvalidArgument("feedback.mode must be 'full' or 'logged'");
  f.logged = true;
  if (j.contains("logging")) f.logging.kind = dgp::logging_from_string(j.at("logging").get<std::string>());
  read_if(j, "logging_clip", f.logging.clip);
  read_if(j, "logging_scale", f.logging.scale);
  if (j.contains("pseudo")) {
    f.pseudo = counterfactual::pseudo_kind_from_string(j.at("pseudo").get<std::string>());
  }
  const auto prop = j.value("propensity", std::string("true"));
  if (prop == "true") {
    f.propensity = PropensitySource::True;
  } else if (prop == "estimated") {
    f.propensity = PropensitySource::Estimated;
  } else {
    throw InvalidArgument("feedback.propensity must be 'true' or 'estimated'");
  }
  read_if(j, "epsilon_clip", f.epsilon_clip);
  read_if(j, "cross_fit_folds", f.cross_fit_folds);
  read_if(j, "outcome_hidden", f.outcome_hidden);
  return f;
}

std::string zeta_label(double z) { return csv::format_number(z); }

MethodConfig parse_method(const json& j) {
  reject_unknown_keys(j,
                      {"type", "id", "surrogate", "zeta", "cv", "eta", "tau2", "baseline_action",
                       "kind", "rule"},
                      "method");
  MethodConfig m;
  const auto type = j.at("type").get<std::string>();
  if (type == "gbpl") {
    m.type = MethodConfig::Type::Gbpl;
    if (j.contains("surrogate")) {
      m.surrogate = surrogate::kind_from_string(j.at("surrogate").get<std::string>());
    }
    if (j.contains("zeta")) {
      const auto& z = j.at("zeta");
      m.zetas = z.is_array() ? z.get<std::vector<double>>() : std::vector<double>{z.get<double>()};
    }
    read_if(j, "cv", m.cv);
    if (m.cv && !j.contains("zeta")) m.zetas = eval::kDefaultZetaGrid;
    read_if(j, "eta", m.eta);
    read_if(j, "tau2", m.tau2);
    read_if(j, "baseline_action", m.baseline_action);
    m.id = m.cv ? "GBPLNet(cv)" : "GBPLNet(zeta=" + zeta_label(m.zetas.front()) + ")";
  } else if (type == "baseline") {
    m.type = MethodConfig::Type::Baseline;
    m.baseline = baselines::baseline_from_string(j.at("kind").get<std::string>());
    m.id = std::string(baselines::to_string(m.baseline));
  } else {
    throw InvalidArgument("method.type must be 'gbpl' or 'baseline'");
  }
  if (j.contains("rule")) m.rule = rule_from_string(j.at("rule").get<std::string>());
  read_if(j, "id", m.id);
  return m;
}

posterior::TrainConfig parse_train(const json& j) {
  reject_unknown_keys(j, {"learning_rate", "batch_size", "max_epochs", "patience", "weight_decay"},
                      "train");
  posterior::TrainConfig t;
  read_if(j, "learning_rate", t.learning_rate);
  read_if(j, "batch_size", t.batch_size);
  read_if(j, "max_epochs", t.max_epochs);
  read_if(j, "patience", t.patience);
  read_if(j, "weight_decay", t.weight_decay);
  return t;
}

json method_to_json(const MethodConfig& m) {
  json j;
  j["id"] = m.id;
  if (m.type == MethodConfig::Type::Gbpl) {
    j["type"] = "gbpl";
    j["surrogate"] = std::string(surrogate::to_string(m.surrogate));
    j["zeta"] = m.zetas;
    j["cv"] = m.cv;
    j["eta"] = m.eta;
    j["tau2"] = m.tau2;
    j["baseline_action"] = m.baseline_action;
  } else {
    j["type"] = "baseline";
    j["kind"] = std::string(baselines::to_string(m.baseline));
  }
  j["rule"] = std::string(to_string(m.rule));
  return j;
}

// Everything a method sees in one trial. y_* hold true outcomes under full
// feedback and pseudo-outcomes under logged feedback.
struct TrialData {
  Matrix x_train, x_val, x_test;
  Matrix y_train, y_val;
  Matrix y_test;
  std::optional<LoggedDataset> log_train, log_val;
};

TrialData prepare_trial(const ExperimentConfig& config, std::uint64_t trial_seed) {
  auto spec = config.dgp;
  spec.seed = trial_seed;
  TrialData t;
  if (!config.feedback.logged) {
    const auto gen = dgp::generate_full_feedback(spec);
    const auto s = split_rows(static_cast<std::size_t>(gen.data.n()), config.split,
                              SeededRng::derive(trial_seed, "split"));
    t.x_train = select_rows(gen.data.x, s.train);
    t.x_val = select_rows(gen.data.x, s.val);
    t.x_test = select_rows(gen.data.x, s.test);
    t.y_train = select_rows(gen.data.y, s.train);
    t.y_val = select_rows(gen.data.y, s.val);
    t.y_test = select_rows(gen.data.y, s.test);
    return t;
  }

  const auto& fb = config.feedback;
  const auto gen = dgp::generate_logged(spec, fb.logging, SeededRng::derive(trial_seed, "logging"));
  const auto s = split_rows(static_cast<std::size_t>(gen.logged.n()), config.split,
                            SeededRng::derive(trial_seed, "split"));
  auto lt = gen.logged.subset(s.train);
  auto lv = gen.logged.subset(s.val);
  t.x_train = lt.x;
  t.x_val = lv.x;
  t.x_test = select_rows(gen.hidden.data.x, s.test);
  t.y_test = select_rows(gen.hidden.data.y, s.test);

  Matrix e_train, e_val;
  if (fb.propensity == PropensitySource::True) {
    e_train = counterfactual::clip_to_overlap(*lt.true_propensity, fb.epsilon_clip);
    e_val = counterfactual::clip_to_overlap(*lv.true_propensity, fb.epsilon_clip);
  } else {
    auto tc = config.train;
    tc.seed = SeededRng::derive(trial_seed, "propensity");
    const auto kind = lt.K == 2 ? counterfactual::PropensityModelKind::Logistic
                                : counterfactual::PropensityModelKind::SoftmaxLinear;
    const auto model = counterfactual::fit_propensity_model(lt, kind, fb.epsilon_clip, tc);
    e_train = model.predict(lt.x);
    e_val = model.predict(lv.x);
  }

  if (fb.pseudo == counterfactual::PseudoKind::IPW) {
    t.y_train = counterfactual::ipw_pseudo_outcomes(lt, e_train);
    t.y_val = counterfactual::ipw_pseudo_outcomes(lv, e_val);
  } else {
    auto tc = config.train;
    tc.seed = SeededRng::derive(trial_seed, "outcome");
    std::optional<std::vector<int>> folds;
    if (fb.cross_fit_folds >= 2) {
      folds = counterfactual::make_folds(static_cast<std::size_t>(lt.n()), fb.cross_fit_folds,
                                         SeededRng::derive(trial_seed, "folds"));
    }
    const auto fit = counterfactual::fit_outcome_regression(lt, fb.outcome_hidden, tc, folds);
    t.y_train = counterfactual::dr_pseudo_outcomes(lt, e_train, fit.gamma_hat);
    t.y_val = counterfactual::dr_pseudo_outcomes(lv, e_val, fit.predict(lv.x));
  }
  t.log_train = std::move(lt);
  t.log_val = std::move(lv);
  return t;
}

eval::TrialResult run_method(const ExperimentConfig& config, const MethodConfig& m,
                             const TrialData& t, int trial, std::uint64_t trial_seed) {
  eval::TrialResult r;
  r.method_id = m.id;
  r.trial = trial;
  r.seed = trial_seed;
  const std::uint64_t method_seed = SeededRng::derive(trial_seed, m.id);
  auto train = config.train;
  train.seed = method_seed;

  FittedPolicy policy;
  if (m.type == MethodConfig::Type::Gbpl) {
    std::vector<FittedPolicy> fits;
    std::vector<eval::ZetaCandidate> candidates;
    for (double zeta : m.zetas) {
      surrogate::GibbsConfig g{zeta, m.eta, m.tau2, m.surrogate, m.baseline_action};
      fits.push_back(posterior::fit_policy_map(t.x_train, t.y_train, t.x_val, t.y_val, g,
                                               config.hidden_dims, train));
      candidates.push_back({zeta, fits.back().decide(t.x_val, m.rule)});
    }
    const std::size_t pick = m.cv ? eval::select_zeta_index(candidates, t.y_val) : 0;
    policy = std::move(fits[pick]);
    r.selected_zeta = m.zetas[pick];
  } else {
    baselines::BaselineConfig bc;
    bc.hidden_dims = config.hidden_dims;
    bc.train = train;
    if (config.feedback.logged) {
      policy = baselines::fit_baseline_logged(m.baseline, *t.log_train, t.y_train, *t.log_val,
                                              t.y_val, bc);
    } else {
      policy = baselines::fit_baseline(m.baseline, {t.x_train, t.y_train}, {t.x_val, t.y_val}, bc);
    }
  }
  r.welfare = surrogate::empirical_welfare(t.y_test, policy.decide(t.x_test, m.rule));
  r.regret = eval::oracle_welfare(t.y_test) - r.welfare;
  return r;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dgp.family != dgp::Family::SemiSyntheticCsv) dgp.validate();
  if (trials < 1) throw InvalidArgument("trials must be positive");
  if (methods.empty()) throw InvalidArgument("at least one method is required");
  double sum = 0.0;
  for (double f : split) {
    if (!(f > 0.0)) throw InvalidArgument("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("split fractions must sum to 1");
  train.validate();
  for (int h : hidden_dims) {
    if (h < 1) throw InvalidArgument("hidden widths must be positive");
  }
  const int K = dgp.K;
  std::vector<std::string> ids;
  for (const auto& m : methods) {
    if (std::find(ids.begin(), ids.end(), m.id) != ids.end()) {
      throw InvalidArgument("duplicate method id '" + m.id + "'");
    }
    ids.push_back(m.id);
    if (m.type == MethodConfig::Type::Gbpl) {
      if (m.zetas.empty()) throw InvalidArgument(m.id + ": zeta list is empty");
      if (!m.cv && m.zetas.size() != 1) {
        throw InvalidArgument(m.id + ": several zeta values need cv = true");
      }
      for (double z : m.zetas) {
        surrogate::GibbsConfig{z, m.eta, m.tau2, m.surrogate, m.baseline_action}.validate();
      }
      if (m.surrogate == surrogate::SurrogateKind::BinaryDiff && K != 2) {
        throw InvalidArgument(m.id + ": binary_diff needs K = 2");
      }
      if (m.baseline_action < 0 || m.baseline_action >= K) {
        throw InvalidArgument(m.id + ": baseline_action out of range");
      }
    } else if (!baselines::supports(m.baseline, K)) {
      throw InvalidArgument(m.id + ": baseline does not support K = " + std::to_string(K));
    }
  }
  if (feedback.logged) {
    if (!(feedback.epsilon_clip > 0.0) || feedback.epsilon_clip * K > 1.0 + 1e-12) {
      throw InvalidArgument("epsilon_clip must lie in (0, 1/K]");
    }
    if (feedback.cross_fit_folds == 1 || feedback.cross_fit_folds < 0) {
      throw InvalidArgument("cross_fit_folds must be 0 or at least 2");
    }
  }
}

std::string config_schema() {
  static const char* kSchema = R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "gbpl experiment",
  "type": "object",
  "required": ["dgp", "methods"],
  "additionalProperties": false,
  "properties": {
    "name": {"type": "string"},
    "dgp": {
      "type": "object",
      "required": ["family"],
      "additionalProperties": false,
      "properties": {
        "family": {"enum": ["binary1", "binary2", "binary3", "multi1", "multi2", "multi3",
                            "onedim_viz", "semisynthetic_csv"]},
        "n": {"type": "integer", "minimum": 1},
        "d": {"type": "integer", "minimum": 1},
        "K": {"type": "integer", "minimum": 2},
        "noise_sd": {"type": "number", "minimum": 0},
        "csv_path": {"type": "string"},
        "response_column": {"type": "string"}
      }
    },
    "feedback": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "mode": {"enum": ["full", "logged"]},
        "logging": {"enum": ["logistic_random_index", "softmax_random_logits"]},
        "logging_clip": {"type": "number", "exclusiveMinimum": 0},
        "logging_scale": {"type": "number"},
        "pseudo": {"enum": ["ipw", "dr"]},
        "propensity": {"enum": ["true", "estimated"]},
        "epsilon_clip": {"type": "number", "exclusiveMinimum": 0},
        "cross_fit_folds": {"type": "integer", "minimum": 0},
        "outcome_hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}}
      }
    },
    "methods": {
      "type": "array",
      "minItems": 1,
      "items": {
        "type": "object",
        "required": ["type"],
        "additionalProperties": false,
        "properties": {
          "type": {"enum": ["gbpl", "baseline"]},
          "id": {"type": "string"},
          "surrogate": {"enum": ["binary_diff", "baseline_gap", "full_vector"]},
          "zeta": {"oneOf": [{"type": "number", "exclusiveMinimum": 0},
                             {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}}]},
          "cv": {"type": "boolean"},
          "eta": {"type": "number", "exclusiveMinimum": 0},
          "tau2": {"type": "number", "exclusiveMinimum": 0},
          "baseline_action": {"type": "integer", "minimum": 0},
          "kind": {"enum": ["DiffReg", "PluginReg", "PluginRegK", "WeightedLogistic",
                            "DirectWelfare"]},
          "rule": {"enum": ["deterministic", "randomized"]}
        }
      }
    },
    "hidden": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    "train": {
      "type": "object",
      "additionalProperties": false,
      "properties": {
        "learning_rate": {"type": "number", "exclusiveMinimum": 0},
        "batch_size": {"type": "integer", "minimum": 1},
        "max_epochs": {"type": "integer", "minimum": 1},
        "patience": {"type": "integer", "minimum": 1},
        "weight_decay": {"type": "number", "minimum": 0}
      }
    },
    "split": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
              "minItems": 3, "maxItems": 3},
    "trials": {"type": "integer", "minimum": 1},
    "base_seed": {"type": "integer", "minimum": 0},
    "output_dir": {"type": "string"}
  }
}
)";
  return kSchema;
}

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig c;
  try {
    const json j = json::parse(json_text);
    reject_unknown_keys(j,
                        {"name", "dgp", "feedback", "methods", "hidden", "train", "split",
                         "trials", "base_seed", "output_dir"},
                        "config");
    read_if(j, "name", c.name);
    c.dgp = parse_dgp(j.at("dgp"));
    if (j.contains("feedback")) c.feedback = parse_feedback(j.at("feedback"));
    for (const auto& m : j.at("methods")) c.methods.push_back(parse_method(m));
    read_if(j, "hidden", c.hidden_dims);
    if (j.contains("train")) c.train = parse_train(j.at("train"));
    if (j.contains("split")) {
      const auto s = j.at("split").get<std::vector<double>>();
      if (s.size() != 3) throw InvalidArgument("split needs three fractions");
      c.split = {s[0], s[1], s[2]};
    }
    read_if(j, "trials", c.trials);
    read_if(j, "base_seed", c.base_seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw InvalidArgument("invalid experiment config: " + std::string(e.what()));
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(detail::read_json_file(path).dump());
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["dgp"] = {{"family", std::string(dgp::to_string(c.dgp.family))},
              {"n", c.dgp.n},
              {"d", c.dgp.d},
              {"K", c.dgp.K},
              {"noise_sd", c.dgp.noise_sd}};
  if (c.dgp.family == dgp::Family::SemiSyntheticCsv) {
    j["dgp"]["csv_path"] = c.dgp.csv_path;
    j["dgp"]["response_column"] = c.dgp.response_column;
  }
  if (c.feedback.logged) {
    const auto& f = c.feedback;
    j["feedback"] = {{"mode", "logged"},
                     {"logging", std::string(dgp::to_string(f.logging.kind))},
                     {"logging_clip", f.logging.clip},
                     {"logging_scale", f.logging.scale},
                     {"pseudo", std::string(counterfactual::to_string(f.pseudo))},
                     {"propensity", f.propensity == PropensitySource::True ? "true" : "estimated"},
                     {"epsilon_clip", f.epsilon_clip},
                     {"cross_fit_folds", f.cross_fit_folds},
                     {"outcome_hidden", f.outcome_hidden}};
  } else {
    j["feedback"] = {{"mode", "full"}};
  }
  j["methods"] = json::array();
  for (const auto& m : c.methods) j["methods"].push_back(method_to_json(m));
  j["hidden"] = c.hidden_dims;
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"weight_decay", c.train.weight_decay}};
  j["split"] = c.split;
  j["trials"] = c.trials;
  j["base_seed"] = c.base_seed;
  j["output_dir"] = c.output_dir.string();
  return j.dump(2) + "\n";
}

SplitRows split_rows(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  const auto n_val = static_cast<std::size_t>(std::floor(fractions[1] * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::floor(fractions[2] * static_cast<double>(n)));
  if (n_val < 1 || n_test < 1 || n_val + n_test >= n) {
    throw InvalidArgument("sample of " + std::to_string(n) + " rows is too small to split");
  }
  SeededRng rng(seed);
  const auto perm = rng.permutation(n);
  SplitRows s;
  s.val.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val),
                perm.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), perm.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

int resolve_jobs(int requested) {
  if (const char* env = std::getenv("GBPL_JOBS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) throw InvalidArgument("GBPL_JOBS must be a positive integer");
    return static_cast<int>(v);
  }
  return std::max(1, requested);
}

std::vector<eval::TrialResult> run_trial(const ExperimentConfig& config, int trial) {
  const std::uint64_t trial_seed = config.base_seed + static_cast<std::uint64_t>(trial);
  const TrialData data = prepare_trial(config, trial_seed);
  std::vector<eval::TrialResult> out;
  for (const auto& m : config.methods) out.push_back(run_method(config, m, data, trial, trial_seed));
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config, int jobs) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  if (!std::filesystem::is_directory(config.output_dir)) {
    throw IoError("cannot create " + config.output_dir.string());
  }

  const int workers = std::min(resolve_jobs(jobs), config.trials);
  std::vector<std::vector<eval::TrialResult>> per_trial(static_cast<std::size_t>(config.trials));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(config.trials));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int t = next++; t < config.trials; t = next++) {
      try {
        per_trial[static_cast<std::size_t>(t)] = run_trial(config, t);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentResult result;
  for (auto& rows : per_trial) {
    result.trials.insert(result.trials.end(), rows.begin(), rows.end());
  }
  if (config.trials >= 2) result.aggregate = eval::aggregate_by_method(result.trials);

  const auto& dir = config.output_dir;
  eval::write_trials_csv(dir / "trials.csv", result.trials);
  eval::write_aggregate_csv(dir / "aggregate.csv", result.aggregate);
  eval::write_welfare_lists_csv(dir / "welfare_lists.csv", result.trials);
  json manifest;
  manifest["config"] = json::parse(config_to_json(config));
  manifest["outputs"] = {"trials.csv", "aggregate.csv", "welfare_lists.csv"};
  manifest["trial_seeds"] = json::array();
  for (int t = 0; t < config.trials; ++t) {
    manifest["trial_seeds"].push_back(config.base_seed + static_cast<std::uint64_t>(t));
  }
  detail::write_json_file(dir / "manifest.json", manifest);
  return result;
}

VizConfig::VizConfig() {
  gibbs.zeta = 1.0;
  gibbs.eta = 1.0;
  gibbs.tau2 = 1.0;
  gibbs.kind = surrogate::SurrogateKind::BinaryDiff;
  train.learning_rate = 1e-3;
  train.batch_size = 128;
  train.weight_decay = 1e-4;
}

VizResult run_posterior_viz(const VizConfig& config) {
  if (config.gibbs.kind != surrogate::SurrogateKind::BinaryDiff) {
    throw InvalidArgument("posterior visualization uses the binary surrogate");
  }
  if (config.grid_points < 2) throw InvalidArgument("grid needs at least 2 points");
  const auto spec = dgp::DgpSpec::preset(dgp::Family::OneDimViz, config.n, config.seed);
  const auto gen = dgp::generate_full_feedback(spec);
  const auto s = split_rows(static_cast<std::size_t>(config.n), config.split,
                            SeededRng::derive(config.seed, "split"));
  const Matrix x_tr = select_rows(gen.data.x, s.train);
  const Matrix y_tr = select_rows(gen.data.y, s.train);
  const Matrix x_te = select_rows(gen.data.x, s.test);
  const Matrix y_te = select_rows(gen.data.y, s.test);

  auto train = config.train;
  train.seed = SeededRng::derive(config.seed, "map");
  const auto map = posterior::fit_policy_map(x_tr, y_tr, select_rows(gen.data.x, s.val),
                                             select_rows(gen.data.y, s.val), config.gibbs,
                                             config.hidden_dims, train);
  const auto& arch = map.nets.front().arch;
  const auto loss = surrogate::make_surrogate_loss(config.gibbs, y_tr);
  auto sgld = config.sgld;
  sgld.seed = SeededRng::derive(config.seed, "sgld");
  const auto draws =
      posterior::sgld_sample(arch, {x_tr, *loss}, config.gibbs, map.nets.front().params, sgld);

  const int G = config.grid_points;
  Matrix xg(G, 1);
  for (int g = 0; g < G; ++g) xg(g, 0) = -2.5 + 5.0 * g / (G - 1);
  const double alpha = (1.0 - config.level) / 2.0;
  Matrix f_draws(G, static_cast<Eigen::Index>(draws.draws.size()));
  for (std::size_t k = 0; k < draws.draws.size(); ++k) {
    f_draws.col(static_cast<Eigen::Index>(k)) = nnet::forward(arch, draws.draws[k], xg).col(0);
  }
  VizResult out;
  out.grid.resize(G, 5);
  const Matrix f_map = map.scores(xg);
  double msd = 0.0;
  for (int g = 0; g < G; ++g) {
    std::vector<double> v(static_cast<std::size_t>(f_draws.cols()));
    for (Eigen::Index k = 0; k < f_draws.cols(); ++k) v[static_cast<std::size_t>(k)] = f_draws(g, k);
    const double target = std::clamp(1.2 * std::sin(xg(g, 0)) / config.gibbs.zeta, -1.0, 1.0);
    out.grid.row(g) << xg(g, 0), stats::mean(v), stats::quantile(v, alpha),
        stats::quantile(v, 1.0 - alpha), target;
    msd += (f_map(g, 0) - target) * (f_map(g, 0) - target);
  }
  out.map_mean_sq_deviation = msd / G;
  out.welfare = posterior::welfare_credible_interval(draws, x_te, y_te,
                                                     DecisionRule::Deterministic, config.level);
  out.clipped_steps = draws.meta.clipped_steps;

  const auto& dir = config.output_dir;
  std::filesystem::create_directories(dir);
  csv::write(dir / "grid.csv", {"x", "f_mean", "f_lo", "f_hi", "target"}, out.grid);
  Matrix wd(static_cast<Eigen::Index>(out.welfare.welfare.size()), 2);
  for (Eigen::Index k = 0; k < wd.rows(); ++k) {
    wd(k, 0) = static_cast<double>(k);
    wd(k, 1) = out.welfare.welfare[static_cast<std::size_t>(k)];
  }
  csv::write(dir / "welfare_draws.csv", {"draw", "welfare"}, wd);

  Matrix x0(static_cast<Eigen::Index>(config.x0.size()), 1);
  std::vector<std::string> header{"draw"};
  for (std::size_t j = 0; j < config.x0.size(); ++j) {
    x0(static_cast<Eigen::Index>(j), 0) = config.x0[j];
    header.push_back("f(" + csv::format_number(config.x0[j]) + ")");
  }
  Matrix fx0(static_cast<Eigen::Index>(draws.draws.size()), x0.rows() + 1);
  for (std::size_t k = 0; k < draws.draws.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    fx0(kk, 0) = static_cast<double>(k);
    fx0.row(kk).tail(x0.rows()) = nnet::forward(arch, draws.draws[k], x0).col(0).transpose();
  }
  csv::write(dir / "fx0_draws.csv", header, fx0);

  json ci;
  ci["level"] = config.level;
  ci["mean"] = out.welfare.mean;
  ci["lo"] = out.welfare.lo;
  ci["hi"] = out.welfare.hi;
  ci["draws"] = out.welfare.welfare.size();
  ci["map_welfare"] =
      surrogate::empirical_welfare(y_te, map.decide(x_te, DecisionRule::Deterministic));
  ci["clipped_steps"] = out.clipped_steps;
  detail::write_json_file(dir / "welfare_ci.json", ci);

  json manifest;
  manifest["n"] = config.n;
  manifest["seed"] = config.seed;
  manifest["hidden"] = config.hidden_dims;
  manifest["gibbs"] = {{"zeta", config.gibbs.zeta},
                       {"eta", config.gibbs.eta},
                       {"tau2", config.gibbs.tau2}};
  manifest["train"] = {{"learning_rate", config.train.learning_rate},
                       {"batch_size", config.train.batch_size},
                       {"max_epochs", config.train.max_epochs},
                       {"patience", config.train.patience},
                       {"weight_decay", config.train.weight_decay}};
  manifest["sgld"] = {{"step_size", config.sgld.step_size},
                      {"burn_in", config.sgld.burn_in},
                      {"num_draws", config.sgld.num_draws},
                      {"thin", config.sgld.thin},
                      {"batch_size", config.sgld.batch_size},
                      {"clip_norm", config.sgld.clip_norm}};
  manifest["outputs"] = {"grid.csv", "welfare_draws.csv", "fx0_draws.csv", "welfare_ci.json"};
  detail::write_json_file(dir / "manifest.json", manifest);
  return out;
}

}  // namespace gbpl::experiment
