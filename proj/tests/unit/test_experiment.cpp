#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gbpl/csv.hpp"
#include "gbpl/error.hpp"
#include "gbpl/experiment.hpp"
#include "tempdir.hpp"

using namespace gbpl;
using namespace gbpl::experiment;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::istringstream in(slurp(p));
  std::vector<std::string> out;
  for (std::string s; std::getline(in, s);) out.push_back(s);
  return out;
}

std::string tiny_config(const std::filesystem::path& out, const std::string& methods) {
  return R"({
    "name": "smoke",
    "dgp": {"family": "binary2", "n": 200},
    "methods": [)" + methods + R"(],
    "hidden": [8],
    "train": {"max_epochs": 3, "patience": 2, "batch_size": 32},
    "trials": 2,
    "base_seed": 5,
    "output_dir": ")" + out.string() + R"("
  })";
}

const std::string kTwoMethods =
    R"({"type": "gbpl", "zeta": [1.0, 0.1], "cv": true},
       {"type": "baseline", "kind": "DiffReg"})";

}  // namespace

TEST(Config, ParsesDefaultsAndIds) {
  oracle::TempDir dir;
  const auto c = parse_config(tiny_config(dir.path(), kTwoMethods));
  EXPECT_EQ(c.trials, 2);
  EXPECT_EQ(c.base_seed, 5u);
  ASSERT_EQ(c.methods.size(), 2u);
  EXPECT_EQ(c.methods[0].id, "GBPLNet(cv)");
  EXPECT_EQ(c.methods[1].id, "DiffReg");
  EXPECT_EQ(c.split[0], 0.6);
  const auto again = parse_config(config_to_json(c));
  EXPECT_EQ(config_to_json(again), config_to_json(c));
}

TEST(Config, RejectsBadInput) {
  oracle::TempDir dir;
  const std::string good = tiny_config(dir.path(), kTwoMethods);
  EXPECT_THROW(parse_config("{not json"), InvalidArgument);
  EXPECT_THROW(parse_config(R"({"methods": []})"), InvalidArgument);

  auto with = [&](const std::string& from, const std::string& to) {
    std::string s = good;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  EXPECT_THROW(parse_config(with("\"trials\": 2", "\"trials\": 2, \"color\": 1")),
               InvalidArgument);
  EXPECT_THROW(parse_config(with("\"binary2\"", "\"binary9\"")), InvalidArgument);
  EXPECT_THROW(parse_config(with("\"trials\": 2", "\"trials\": 2, \"split\": [0.5, 0.2, 0.2]")),
               InvalidArgument);
  EXPECT_THROW(parse_config(with("\"kind\": \"DiffReg\"", "\"kind\": \"Forest\"")),
               InvalidArgument);
  EXPECT_THROW(
      parse_config(with("\"binary2\", \"n\": 200", "\"multi1\", \"n\": 200")),
      InvalidArgument);
}

TEST(Config, SchemaIsJson) {
  const std::string s = config_schema();
  EXPECT_NE(s.find("\"additionalProperties\": false"), std::string::npos);
  EXPECT_NE(s.find("\"methods\""), std::string::npos);
}

TEST(Split, CountsAndDisjointness) {
  for (std::size_t n : {10u, 11u, 200u, 2001u}) {
    const auto s = split_rows(n, {0.6, 0.2, 0.2}, 42);
    const auto k = static_cast<std::size_t>(std::floor(0.2 * static_cast<double>(n)));
    EXPECT_EQ(s.val.size(), k);
    EXPECT_EQ(s.test.size(), k);
    EXPECT_EQ(s.train.size(), n - 2 * k);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    all.insert(s.val.begin(), s.val.end());
    all.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), n - 1);
    EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
  }
  EXPECT_NE(split_rows(100, {0.6, 0.2, 0.2}, 1).test, split_rows(100, {0.6, 0.2, 0.2}, 2).test);
}

TEST(Jobs, EnvironmentOverride) {
  ::setenv("GBPL_JOBS", "3", 1);
  EXPECT_EQ(resolve_jobs(1), 3);
  ::unsetenv("GBPL_JOBS");
  EXPECT_EQ(resolve_jobs(2), 2);
  EXPECT_EQ(resolve_jobs(0), 1);
}

TEST(RunExperiment, SmokeRunWritesTables) {
  oracle::TempDir dir;
  const auto c = parse_config(tiny_config(dir / "out", kTwoMethods));
  const auto r = run_experiment(c);
  EXPECT_EQ(r.trials.size(), 4u);
  EXPECT_EQ(r.aggregate.size(), c.methods.size());
  for (const char* f : {"trials.csv", "aggregate.csv", "welfare_lists.csv", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / f)) << f;
  }
  EXPECT_EQ(lines_of(dir / "out" / "aggregate.csv").size(), 1 + c.methods.size());
  for (const auto& t : r.trials) {
    EXPECT_GE(t.regret, -1e-12);
    EXPECT_EQ(t.seed, 5u + static_cast<std::uint64_t>(t.trial));
    EXPECT_EQ(t.selected_zeta.has_value(), t.method_id == "GBPLNet(cv)");
  }
}

TEST(RunExperiment, RerunIsByteIdentical) {
  oracle::TempDir dir;
  const auto a = parse_config(tiny_config(dir / "a", kTwoMethods));
  const auto b = parse_config(tiny_config(dir / "b", kTwoMethods));
  run_experiment(a, 1);
  run_experiment(b, 2);
  for (const char* f : {"trials.csv", "aggregate.csv", "welfare_lists.csv"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  }
}

TEST(RunExperiment, AddingAMethodLeavesOthersUnchanged) {
  oracle::TempDir dir;
  const auto small = run_experiment(parse_config(tiny_config(dir / "a", kTwoMethods)));
  const auto big = run_experiment(parse_config(tiny_config(
      dir / "b",
      R"({"type": "baseline", "kind": "WeightedLogistic"},)" + kTwoMethods +
          R"(, {"type": "gbpl", "zeta": 0.01})")));
  for (const auto& t : small.trials) {
    auto it = std::find_if(big.trials.begin(), big.trials.end(), [&](const auto& u) {
      return u.method_id == t.method_id && u.trial == t.trial;
    });
    ASSERT_NE(it, big.trials.end());
    EXPECT_EQ(it->welfare, t.welfare) << t.method_id;
    EXPECT_EQ(it->regret, t.regret);
    EXPECT_EQ(it->selected_zeta, t.selected_zeta);
  }
}

TEST(RunExperiment, LoggedFeedbackRuns) {
  oracle::TempDir dir;
  std::string cfg = tiny_config(dir.path(), kTwoMethods);
  cfg.replace(cfg.find("\"hidden\""), 0,
              R"("feedback": {"mode": "logged", "pseudo": "dr", "propensity": "estimated",
                              "cross_fit_folds": 2, "outcome_hidden": [8]},
              )");
  const auto r = run_experiment(parse_config(cfg));
  EXPECT_EQ(r.trials.size(), 4u);
  for (const auto& t : r.trials) EXPECT_TRUE(std::isfinite(t.welfare));
}

TEST(RunExperiment, UnwritableOutputFails) {
  oracle::TempDir dir;
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(run_experiment(parse_config(tiny_config(dir / "file" / "sub", kTwoMethods))),
               std::exception);
}

TEST(PosteriorViz, OutputsAreConsistent) {
  oracle::TempDir dir;
  VizConfig c;
  c.n = 300;
  c.hidden_dims = {8};
  c.train.max_epochs = 5;
  c.sgld.burn_in = 20;
  c.sgld.num_draws = 10;
  c.sgld.thin = 2;
  c.grid_points = 25;
  c.gibbs.zeta = 0.5;
  c.output_dir = dir / "viz";
  const auto r = run_posterior_viz(c);
  ASSERT_EQ(r.grid.rows(), 25);
  for (Eigen::Index i = 0; i < r.grid.rows(); ++i) {
    const double x = r.grid(i, 0);
    EXPECT_LE(r.grid(i, 2), r.grid(i, 1) + 1e-12);
    EXPECT_LE(r.grid(i, 1), r.grid(i, 3) + 1e-12);
    EXPECT_EQ(r.grid(i, 4), std::clamp(1.2 * std::sin(x) / 0.5, -1.0, 1.0));
  }
  EXPECT_EQ(r.welfare.welfare.size(), 10u);
  EXPECT_LE(r.welfare.lo, r.welfare.hi);
  for (const char* f : {"grid.csv", "welfare_draws.csv", "fx0_draws.csv", "welfare_ci.json",
                        "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "viz" / f)) << f;
  }
  const auto fx0 = lines_of(dir / "viz" / "fx0_draws.csv");
  EXPECT_EQ(fx0.front(), "draw,f(-2),f(-1),f(0),f(1),f(2)");
  EXPECT_EQ(fx0.size(), 11u);
}

TEST(Config, ShippedConfigsParse) {
  int seen = 0;
  for (const auto& e : std::filesystem::directory_iterator(GBPL_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_config(e.path())) << e.path();
    ++seen;
  }
  EXPECT_GT(seen, 0);
}
