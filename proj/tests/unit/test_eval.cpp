#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "gbpl/error.hpp"
#include "gbpl/eval.hpp"
#include "tempdir.hpp"

using namespace gbpl;
using namespace gbpl::eval;

namespace {

// Zero-hidden net whose only output is the constant `bias`.
FittedPolicy constant_policy(ScoreKind kind, int d, std::vector<double> bias) {
  FittedPolicy p;
  p.method = "const";
  p.score = kind;
  p.K = kind == ScoreKind::Softmax ? static_cast<int>(bias.size()) : 2;
  const int out = static_cast<int>(bias.size());
  nnet::Head head = nnet::Head::Identity;
  if (kind == ScoreKind::Softmax) head = nnet::Head::SoftmaxVector;
  if (kind == ScoreKind::TanhScore) head = nnet::Head::TanhScalar;
  nnet::MlpArchitecture arch{d, {}, out, head};
  nnet::ParamVector w{Vector::Zero(static_cast<Eigen::Index>(arch.param_count()))};
  for (int j = 0; j < out; ++j) w.values(d * out + j) = bias[j];
  p.nets.push_back({arch, w});
  return p;
}

FullFeedbackDataset normal_table(int n, int K, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  FullFeedbackDataset d{Matrix(n, 2), Matrix(n, K)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 2; ++j) d.x(i, j) = z(gen);
    for (int a = 0; a < K; ++a) d.y(i, a) = z(gen);
  }
  return d;
}

TrialResult trial(double welfare, double regret = 0.0) {
  return {"m", 0, 0, welfare, regret, std::nullopt};
}

}  // namespace

TEST(OracleWelfare, RowMaxMean) {
  Matrix y(3, 2);
  y << 1, 2, -1, -3, 0, 0;
  EXPECT_DOUBLE_EQ(oracle_welfare(y), (2.0 - 1.0 + 0.0) / 3.0);
  EXPECT_THROW(oracle_welfare(Matrix(0, 2)), InvalidArgument);
}

TEST(TestWelfare, ConstantTreatGivesFirstColumnMean) {
  const auto d = normal_table(50, 2, 1);
  const auto p = constant_policy(ScoreKind::TanhScore, 2, {5.0});
  const double w = test_welfare(d, p, DecisionRule::Deterministic);
  EXPECT_NEAR(w, d.y.col(0).mean(), 1e-12);
}

TEST(TestWelfare, UniformRandomizedIsMeanOfColumnMeans) {
  const auto d = normal_table(60, 4, 2);
  const auto p = constant_policy(ScoreKind::Softmax, 2, {0.0, 0.0, 0.0, 0.0});
  const double w = test_welfare(d, p, DecisionRule::Randomized);
  EXPECT_NEAR(w, d.y.colwise().mean().mean(), 1e-12);
}

TEST(TestWelfare, RegretIsNonnegative) {
  const auto d = normal_table(80, 3, 3);
  for (double b : {-1.0, 0.0, 2.0}) {
    const auto p = constant_policy(ScoreKind::Softmax, 2, {b, 0.0, -b});
    for (auto rule : {DecisionRule::Deterministic, DecisionRule::Randomized}) {
      EXPECT_GE(oracle_welfare(d) - test_welfare(d, p, rule), -1e-12);
    }
  }
}

TEST(ZetaSelection, SingleCandidate) {
  const Matrix y = Matrix::Ones(4, 2);
  EXPECT_EQ(select_zeta_by_validation({{0.01, Matrix::Constant(4, 2, 0.5)}}, y), 0.01);
  EXPECT_THROW(select_zeta_by_validation({}, y), InvalidArgument);
}

TEST(ZetaSelection, TiesGoToSmallestZeta) {
  const auto d = normal_table(30, 2, 4);
  const Matrix delta = Matrix::Constant(30, 2, 0.5);
  std::vector<ZetaCandidate> c;
  for (double z : kDefaultZetaGrid) c.push_back({z, delta});
  EXPECT_EQ(select_zeta_by_validation(c, d.y), 0.001);
}

TEST(ZetaSelection, DominantPolicyWins) {
  const auto d = normal_table(40, 2, 5);
  Matrix best = Matrix::Zero(40, 2);
  Matrix worst = Matrix::Zero(40, 2);
  for (Eigen::Index i = 0; i < 40; ++i) {
    const int a = d.y(i, 0) >= d.y(i, 1) ? 0 : 1;
    best(i, a) = 1.0;
    worst(i, 1 - a) = 1.0;
  }
  std::vector<ZetaCandidate> c{{1.0, worst}, {0.1, best}, {0.01, Matrix::Constant(40, 2, 0.5)},
                               {0.001, worst}};
  EXPECT_EQ(select_zeta_by_validation(c, d.y), 0.1);
  EXPECT_EQ(select_zeta_index(c, d.y), 1u);
}

TEST(PacBayes, HandComputedBounds) {
  PacBayesInputs a{0.0, 0.0, 100, 1.0, 1.0, 1.0, 0.1};
  EXPECT_NEAR(pac_bayes_bound(a), 0.05, 1e-12);

  PacBayesInputs b{0.5, std::log(2.0), 1000, 0.05, 2.0, 1.0, 0.01};
  EXPECT_NEAR(pac_bayes_bound(b), 0.8788879454113936, 1e-12);

  PacBayesInputs c{0.0, 0.0, 100, 0.5, 1.0, 1.0, 0.1};
  EXPECT_NEAR(pac_bayes_two_sided(c), 0.18862943611198907, 1e-12);
}

TEST(PacBayes, TwoSidedAtDoubledDeltaMatchesOneSidedGap) {
  PacBayesInputs one{0.3, 1.7, 250, 0.05, 1.5, 2.0, 0.2};
  PacBayesInputs two = one;
  two.delta = 2.0 * one.delta;
  EXPECT_NEAR(pac_bayes_two_sided(two), pac_bayes_bound(one) - one.empirical_risk_mean, 1e-12);
  EXPECT_GE(pac_bayes_two_sided(one), pac_bayes_bound(one) - one.empirical_risk_mean);
}

TEST(PacBayes, OptimalLambdaDominatesRandomLambdas) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    PacBayesInputs in{u(gen), 5.0 * u(gen), 1 + static_cast<long long>(1000 * u(gen)),
                      0.01 + 0.9 * u(gen), 0.1 + 3.0 * u(gen), 0.5 + 2.0 * u(gen), 0.1};
    in.lambda = optimal_lambda(in);
    const double at_star = pac_bayes_bound(in);
    for (int j = 0; j < 20; ++j) {
      PacBayesInputs other = in;
      other.lambda = u(gen) / in.b;
      if (other.lambda <= 0.0) continue;
      EXPECT_LE(at_star, pac_bayes_bound(other) + 1e-12);
    }
  }
}

TEST(PacBayes, ConvexInLambda) {
  PacBayesInputs in{0.2, 1.0, 500, 0.05, 1.0, 1.0, 0.1};
  auto at = [&](double l) {
    PacBayesInputs t = in;
    t.lambda = l;
    return pac_bayes_bound(t);
  };
  for (double l = 0.01; l < 0.95; l += 0.01) {
    EXPECT_LE(at(l), 0.5 * (at(l - 0.005) + at(l + 0.005)) + 1e-12);
  }
}

TEST(PacBayes, MonotoneInKlDeltaAndN) {
  PacBayesInputs base{0.1, 0.5, 200, 0.1, 1.0, 1.0, 0.1};
  double prev = pac_bayes_bound(base);
  for (double kl = 1.0; kl <= 10.0; kl += 1.0) {
    PacBayesInputs t = base;
    t.kl = kl;
    EXPECT_GT(pac_bayes_bound(t), prev);
    prev = pac_bayes_bound(t);
  }
  prev = pac_bayes_bound(base);
  for (double delta : {0.05, 0.01, 0.001}) {
    PacBayesInputs t = base;
    t.delta = delta;
    EXPECT_GT(pac_bayes_bound(t), prev);
    prev = pac_bayes_bound(t);
  }
  prev = pac_bayes_bound(base);
  for (long long n : {400, 800, 1600}) {
    PacBayesInputs t = base;
    t.n = n;
    EXPECT_LT(pac_bayes_bound(t), prev);
    prev = pac_bayes_bound(t);
  }
}

TEST(PacBayes, RejectsInvalidInputs) {
  PacBayesInputs ok{0.1, 0.5, 200, 0.1, 1.0, 2.0, 0.1};
  EXPECT_NO_THROW(pac_bayes_bound(ok));
  for (double l : {0.0, -0.1, 0.5, 0.7}) {
    PacBayesInputs t = ok;
    t.lambda = l;
    EXPECT_THROW(pac_bayes_bound(t), InvalidArgument) << l;
  }
  PacBayesInputs t = ok;
  t.delta = 0.0;
  EXPECT_THROW(pac_bayes_bound(t), InvalidArgument);
  t = ok;
  t.kl = -1.0;
  EXPECT_THROW(pac_bayes_bound(t), InvalidArgument);
  t = ok;
  t.n = 0;
  EXPECT_THROW(optimal_lambda(t), InvalidArgument);
}

TEST(PacBayes, OptimalLambdaWithZeroComplexityStaysFeasible) {
  PacBayesInputs in{0.1, 0.0, 100, 1.0, 1.0, 1.0, 0.1};
  in.lambda = optimal_lambda(in);
  EXPECT_GT(in.lambda, 0.0);
  EXPECT_NO_THROW(pac_bayes_bound(in));
}

TEST(Aggregate, TwoPointSample) {
  const std::vector<TrialResult> t{trial(0.0, 1.0), trial(1.0, 0.0)};
  const auto row = aggregate(t);
  EXPECT_DOUBLE_EQ(row.welfare_mean, 0.5);
  EXPECT_DOUBLE_EQ(row.welfare_var, 0.5);
  EXPECT_DOUBLE_EQ(row.welfare_se, 0.5);
  EXPECT_DOUBLE_EQ(row.regret_se, 0.5);
  EXPECT_EQ(row.trials, 2);
}

TEST(Aggregate, IdenticalTrialsHaveZeroSpread) {
  const std::vector<TrialResult> t(5, trial(0.7, 0.1));
  const auto row = aggregate(t);
  EXPECT_DOUBLE_EQ(row.welfare_mean, 0.7);
  EXPECT_EQ(row.welfare_var, 0.0);
  EXPECT_EQ(row.welfare_se, 0.0);
}

TEST(Aggregate, MatchesTwoPassRecomputation) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z(1.0, 2.0);
  std::vector<TrialResult> t;
  for (int i = 0; i < 1000; ++i) t.push_back(trial(z(gen), z(gen)));
  double s = 0.0;
  for (const auto& r : t) s += r.welfare;
  const double m = s / 1000.0;
  double ss = 0.0;
  for (const auto& r : t) ss += (r.welfare - m) * (r.welfare - m);
  const auto row = aggregate(t);
  EXPECT_NEAR(row.welfare_mean, m, 1e-10);
  EXPECT_NEAR(row.welfare_var, ss / 999.0, 1e-10);
  EXPECT_NEAR(row.welfare_se, std::sqrt(ss / 999.0 / 1000.0), 1e-10);
}

TEST(Aggregate, NeedsTwoTrials) {
  const std::vector<TrialResult> t{trial(1.0)};
  EXPECT_THROW(aggregate(t), InvalidArgument);
}

TEST(Aggregate, ByMethodKeepsFirstAppearanceOrder) {
  std::vector<TrialResult> t;
  for (int k = 0; k < 3; ++k) {
    t.push_back({"b", k, 0, 1.0 + k, 0.0, std::nullopt});
    t.push_back({"a", k, 0, 2.0, 0.0, 0.1});
  }
  const auto rows = aggregate_by_method(t);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].method_id, "b");
  EXPECT_DOUBLE_EQ(rows[0].welfare_mean, 2.0);
  EXPECT_EQ(rows[1].method_id, "a");
}

TEST(ResultFiles, HeadersAndRows) {
  oracle::TempDir dir;
  std::vector<TrialResult> t{{"m1", 0, 10, 0.5, 0.25, 0.1},
                             {"m2", 0, 10, 0.75, 0.0, std::nullopt},
                             {"m1", 1, 11, 0.5, 0.25, 0.01},
                             {"m2", 1, 11, 1.0, 0.0, std::nullopt}};
  write_trials_csv(dir / "trials.csv", t);
  write_aggregate_csv(dir / "aggregate.csv", aggregate_by_method(t));
  write_welfare_lists_csv(dir / "welfare_lists.csv", t);
  auto lines = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string s; std::getline(in, s);) out.push_back(s);
    return out;
  };
  const auto tr = lines(dir / "trials.csv");
  ASSERT_EQ(tr.size(), 5u);
  EXPECT_EQ(tr[0], "method,trial,seed,welfare,regret,selected_zeta");
  EXPECT_EQ(tr[2], "m2,0,10,0.75,0,");
  const auto ag = lines(dir / "aggregate.csv");
  ASSERT_EQ(ag.size(), 3u);
  EXPECT_EQ(ag[0], "method,welfare_mean,welfare_var,welfare_se,regret_mean,regret_se,trials");
  const auto wl = lines(dir / "welfare_lists.csv");
  ASSERT_EQ(wl.size(), 3u);
  EXPECT_EQ(wl[0], "trial,m1,m2");
  EXPECT_EQ(wl[2], "1,0.5,1");
}
