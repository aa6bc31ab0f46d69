#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "gbpl/baselines.hpp"
#include "gbpl/counterfactual.hpp"
#include "gbpl/csv.hpp"
#include "gbpl/dgp.hpp"
#include "gbpl/error.hpp"
#include "gbpl/eval.hpp"
#include "gbpl/experiment.hpp"
#include "gbpl/posterior.hpp"

using namespace gbpl;

namespace {

struct SimulateOpts {
  std::string family = "binary1";
  int n = 1000;
  std::optional<int> d, K;
  std::optional<double> noise_sd;
  std::uint64_t seed = 0;
  std::string csv_path, response;
  bool logged = false;
  std::string logging = "logistic_random_index";
  double clip = 0.05;
  double scale = 1.0;
  std::string out;
  std::string hidden_out;
};

struct TrainOpts {
  std::string data, logged_data;
  std::string method = "gbpl";
  std::string surrogate = "binary_diff";
  double zeta = 1.0, eta = 1.0, tau2 = 1.0;
  int baseline_action = 0;
  std::vector<int> hidden{128, 128};
  posterior::TrainConfig train;
  double val_fraction = 0.25;
  std::string pseudo = "ipw";
  bool estimate_propensity = false;
  double epsilon_clip = counterfactual::kDefaultClip;
  std::string out;
};

struct EvaluateOpts {
  std::string policy, data, rule = "deterministic";
};

struct PacOpts {
  double risk = 0.0, kl = 0.0, delta = 0.05, v = 1.0, b = 1.0;
  long long n = 100;
  std::optional<double> lambda;
};

void run_simulate(const SimulateOpts& o) {
  auto spec = dgp::DgpSpec::preset(dgp::family_from_string(o.family), o.n, o.seed);
  if (o.d) spec.d = *o.d;
  if (o.K) spec.K = *o.K;
  if (o.noise_sd) spec.noise_sd = *o.noise_sd;
  spec.csv_path = o.csv_path;
  spec.response_column = o.response;
  if (!o.logged) {
    const auto g = dgp::generate_full_feedback(spec);
    dgp::write_full_feedback_csv(o.out, g.data);
    std::cout << "wrote " << g.data.n() << " rows to " << o.out << "\n";
    return;
  }
  const dgp::LoggingSpec ls{dgp::logging_from_string(o.logging), o.clip, o.scale};
  const auto g = dgp::generate_logged(spec, ls, SeededRng::derive(o.seed, "logging"));
  dgp::write_logged_csv(o.out, g.logged);
  if (!o.hidden_out.empty()) dgp::write_full_feedback_csv(o.hidden_out, g.hidden.data);
  std::cout << "wrote " << g.logged.n() << " logged rows to " << o.out << "\n";
}

void run_train(const TrainOpts& o) {
  if (o.data.empty() == o.logged_data.empty()) {
    throw InvalidArgument("pass exactly one of --data or --logged-data");
  }
  const bool logged = !o.logged_data.empty();
  std::optional<FullFeedbackDataset> full;
  std::optional<LoggedDataset> log;
  Eigen::Index n = 0;
  if (logged) {
    log = dgp::read_logged_csv(o.logged_data);
    n = log->n();
  } else {
    full = dgp::read_full_feedback_csv(o.data);
    n = full->n();
  }
  auto [tr, va] = counterfactual::holdout_split(static_cast<std::size_t>(n), o.val_fraction,
                                                SeededRng::derive(o.train.seed, "holdout"));

  Matrix x_tr, x_va, y_tr, y_va;
  std::optional<LoggedDataset> log_tr, log_va;
  if (logged) {
    log_tr = log->subset(tr);
    log_va = log->subset(va);
    Matrix e_tr, e_va;
    if (o.estimate_propensity || !log->true_propensity) {
      auto tc = o.train;
      tc.seed = SeededRng::derive(o.train.seed, "propensity");
      const auto kind = log->K == 2 ? counterfactual::PropensityModelKind::Logistic
                                    : counterfactual::PropensityModelKind::SoftmaxLinear;
      const auto model = counterfactual::fit_propensity_model(*log_tr, kind, o.epsilon_clip, tc);
      e_tr = model.predict(log_tr->x);
      e_va = model.predict(log_va->x);
    } else {
      e_tr = counterfactual::clip_to_overlap(*log_tr->true_propensity, o.epsilon_clip);
      e_va = counterfactual::clip_to_overlap(*log_va->true_propensity, o.epsilon_clip);
    }
    if (counterfactual::pseudo_kind_from_string(o.pseudo) == counterfactual::PseudoKind::IPW) {
      y_tr = counterfactual::ipw_pseudo_outcomes(*log_tr, e_tr);
      y_va = counterfactual::ipw_pseudo_outcomes(*log_va, e_va);
    } else {
      auto tc = o.train;
      tc.seed = SeededRng::derive(o.train.seed, "outcome");
      const auto fit = counterfactual::fit_outcome_regression(*log_tr, {64, 64}, tc);
      y_tr = counterfactual::dr_pseudo_outcomes(*log_tr, e_tr, fit.gamma_hat);
      y_va = counterfactual::dr_pseudo_outcomes(*log_va, e_va, fit.predict(log_va->x));
    }
    x_tr = log_tr->x;
    x_va = log_va->x;
  } else {
    x_tr = select_rows(full->x, tr);
    x_va = select_rows(full->x, va);
    y_tr = select_rows(full->y, tr);
    y_va = select_rows(full->y, va);
  }

  FittedPolicy policy;
  if (o.method == "gbpl") {
    const surrogate::GibbsConfig g{o.zeta, o.eta, o.tau2, surrogate::kind_from_string(o.surrogate),
                                   o.baseline_action};
    posterior::TrainResult info;
    policy = posterior::fit_policy_map(x_tr, y_tr, x_va, y_va, g, o.hidden, o.train, &info);
    std::cout << "best validation objective " << info.best_val_objective << " at epoch "
              << info.best_epoch << " of " << info.epochs_run << "\n";
  } else {
    baselines::BaselineConfig bc;
    bc.hidden_dims = o.hidden;
    bc.train = o.train;
    const auto kind = baselines::baseline_from_string(o.method);
    policy = logged ? baselines::fit_baseline_logged(kind, *log_tr, y_tr, *log_va, y_va, bc)
                    : baselines::fit_baseline(kind, {x_tr, y_tr}, {x_va, y_va}, bc);
  }
  policy.save(o.out);
  std::cout << "saved " << policy.method << " policy to " << o.out << "\n";
}

void run_evaluate(const EvaluateOpts& o) {
  const auto policy = FittedPolicy::load(o.policy);
  const auto data = dgp::read_full_feedback_csv(o.data);
  const double w = eval::test_welfare(data, policy, rule_from_string(o.rule));
  const double oracle = eval::oracle_welfare(data);
  std::cout << "{\"method\": \"" << policy.method << "\", \"rule\": \"" << o.rule
            << "\", \"welfare\": " << csv::format_number(w)
            << ", \"oracle_welfare\": " << csv::format_number(oracle)
            << ", \"regret\": " << csv::format_number(oracle - w) << "}\n";
}

void run_paccheck(const PacOpts& o) {
  eval::PacBayesInputs in{o.risk, o.kl, o.n, o.delta, o.v, o.b, 0.0};
  in.lambda = o.lambda ? *o.lambda : eval::optimal_lambda(in);
  std::cout << "lambda          " << csv::format_number(in.lambda) << "\n"
            << "lambda_star     " << csv::format_number(eval::optimal_lambda(in)) << "\n"
            << "bound           " << csv::format_number(eval::pac_bayes_bound(in)) << "\n"
            << "two_sided_gap   " << csv::format_number(eval::pac_bayes_two_sided(in)) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized Bayesian policy learning"};
  app.require_subcommand(1);

  SimulateOpts sim;
  auto* s = app.add_subcommand("simulate", "Generate a synthetic data set as CSV");
  s->add_option("--family", sim.family,
                "binary1|binary2|binary3|multi1|multi2|multi3|onedim_viz|semisynthetic_csv")
      ->capture_default_str();
  s->add_option("-n,--n", sim.n, "Sample size")->capture_default_str();
  s->add_option("--d", sim.d, "Covariate dimension");
  s->add_option("--K", sim.K, "Number of actions");
  s->add_option("--noise-sd", sim.noise_sd, "Outcome noise standard deviation");
  s->add_option("--seed", sim.seed)->capture_default_str();
  s->add_option("--csv", sim.csv_path, "Source CSV for semisynthetic_csv");
  s->add_option("--response", sim.response, "Response column of the source CSV");
  s->add_flag("--logged", sim.logged, "Emit logged bandit feedback");
  s->add_option("--logging", sim.logging, "logistic_random_index|softmax_random_logits")
      ->capture_default_str();
  s->add_option("--clip", sim.clip, "Overlap floor of the logging policy")->capture_default_str();
  s->add_option("--scale", sim.scale, "Logit scale of the logging policy")->capture_default_str();
  s->add_option("--hidden-out", sim.hidden_out, "Also write the full table (logged mode)");
  s->add_option("-o,--out", sim.out, "Output CSV")->required();

  TrainOpts tr;
  auto* t = app.add_subcommand("train", "Fit a policy and save it");
  t->add_option("--data", tr.data, "Full-feedback CSV (x_*, y_*)");
  t->add_option("--logged-data", tr.logged_data, "Logged CSV (x_*, action, y_obs, e_*)");
  t->add_option("--method", tr.method,
                "gbpl|DiffReg|PluginReg|PluginRegK|WeightedLogistic|DirectWelfare")
      ->capture_default_str();
  t->add_option("--surrogate", tr.surrogate, "binary_diff|baseline_gap|full_vector")
      ->capture_default_str();
  t->add_option("--zeta", tr.zeta)->capture_default_str();
  t->add_option("--eta", tr.eta)->capture_default_str();
  t->add_option("--tau2", tr.tau2, "Prior variance")->capture_default_str();
  t->add_option("--baseline-action", tr.baseline_action, "Reference column for baseline_gap");
  t->add_option("--hidden", tr.hidden, "Hidden layer widths")->capture_default_str();
  t->add_option("--lr", tr.train.learning_rate)->capture_default_str();
  t->add_option("--batch-size", tr.train.batch_size)->capture_default_str();
  t->add_option("--epochs", tr.train.max_epochs)->capture_default_str();
  t->add_option("--patience", tr.train.patience)->capture_default_str();
  t->add_option("--weight-decay", tr.train.weight_decay)->capture_default_str();
  t->add_option("--seed", tr.train.seed)->capture_default_str();
  t->add_option("--val-fraction", tr.val_fraction)->capture_default_str();
  t->add_option("--pseudo", tr.pseudo, "ipw|dr (logged data)")->capture_default_str();
  t->add_flag("--estimate-propensity", tr.estimate_propensity,
              "Fit propensities even when e_* columns are present");
  t->add_option("--epsilon-clip", tr.epsilon_clip)->capture_default_str();
  t->add_option("-o,--out", tr.out, "Output directory")->required();

  EvaluateOpts ev;
  auto* e = app.add_subcommand("evaluate", "Test welfare of a saved policy");
  e->add_option("--policy", ev.policy, "Directory written by train")->required();
  e->add_option("--data", ev.data, "Full-feedback CSV")->required();
  e->add_option("--rule", ev.rule, "deterministic|randomized")->capture_default_str();

  std::string config_path, output_override;
  int jobs = 1;
  bool print_schema = false;
  auto* x = app.add_subcommand("experiment", "Run a multi-trial experiment from a JSON config");
  x->add_option("-c,--config", config_path, "Experiment config (JSON)");
  x->add_option("-j,--jobs", jobs, "Concurrent trials (GBPL_JOBS overrides)")->capture_default_str();
  x->add_option("-o,--output", output_override, "Override output_dir");
  x->add_flag("--print-schema", print_schema, "Print the config JSON schema and exit");

  experiment::VizConfig viz;
  std::string viz_out = viz.output_dir.string();
  auto* p = app.add_subcommand("posterior-viz", "Posterior draws on the one-dimensional example");
  p->add_option("-n,--n", viz.n)->capture_default_str();
  p->add_option("--seed", viz.seed)->capture_default_str();
  p->add_option("--zeta", viz.gibbs.zeta)->capture_default_str();
  p->add_option("--eta", viz.gibbs.eta)->capture_default_str();
  p->add_option("--tau2", viz.gibbs.tau2)->capture_default_str();
  p->add_option("--hidden", viz.hidden_dims)->capture_default_str();
  p->add_option("--step-size", viz.sgld.step_size)->capture_default_str();
  p->add_option("--burn-in", viz.sgld.burn_in)->capture_default_str();
  p->add_option("--draws", viz.sgld.num_draws)->capture_default_str();
  p->add_option("--thin", viz.sgld.thin)->capture_default_str();
  p->add_option("--clip-norm", viz.sgld.clip_norm)->capture_default_str();
  p->add_option("-o,--output", viz_out)->capture_default_str();

  PacOpts pac;
  auto* k = app.add_subcommand("paccheck", "Evaluate the PAC-Bayes bound");
  k->add_option("--risk", pac.risk, "Posterior mean empirical risk")->capture_default_str();
  k->add_option("--kl", pac.kl, "KL(Q || prior)")->capture_default_str();
  k->add_option("-n,--n", pac.n)->capture_default_str();
  k->add_option("--delta", pac.delta)->capture_default_str();
  k->add_option("--v", pac.v, "Variance proxy")->capture_default_str();
  k->add_option("--b", pac.b, "Loss range bound")->capture_default_str();
  k->add_option("--lambda", pac.lambda, "Defaults to the minimizing value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*s) run_simulate(sim);
    if (*t) run_train(tr);
    if (*e) run_evaluate(ev);
    if (*x) {
      if (print_schema) {
        std::cout << experiment::config_schema();
        return 0;
      }
      if (config_path.empty()) throw InvalidArgument("--config is required");
      auto cfg = experiment::load_config(config_path);
      if (!output_override.empty()) cfg.output_dir = output_override;
      const auto result = experiment::run_experiment(cfg, jobs);
      for (const auto& row : result.aggregate) {
        std::printf("%-28s welfare %.4f (se %.4f)  regret %.4f\n", row.method_id.c_str(),
                    row.welfare_mean, row.welfare_se, row.regret_mean);
      }
      std::cout << "results in " << cfg.output_dir.string() << "\n";
    }
    if (*p) {
      viz.output_dir = viz_out;
      const auto r = experiment::run_posterior_viz(viz);
      std::printf("welfare mean %.4f, %.0f%% interval [%.4f, %.4f], %d clipped steps\n",
                  r.welfare.mean, 100 * viz.level, r.welfare.lo, r.welfare.hi, r.clipped_steps);
    }
    if (*k) run_paccheck(pac);
  } catch (const std::exception& err) {
    std::cerr << "gbpl: " << err.what() << "\n";
    return 1;
  }
  return 0;
}
