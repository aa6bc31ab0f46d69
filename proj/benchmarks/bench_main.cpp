#include <benchmark/benchmark.h>

#include "gbpl/counterfactual.hpp"
#include "gbpl/dgp.hpp"
#include "gbpl/losses.hpp"
#include "gbpl/nnet.hpp"
#include "gbpl/posterior.hpp"
#include "gbpl/surrogate.hpp"

using namespace gbpl;

namespace {

Matrix normal_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  SeededRng rng(seed);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

void BM_Forward(benchmark::State& state) {
  const auto batch = state.range(0);
  nnet::MlpArchitecture arch{10, {128, 128}, 1, nnet::Head::TanhScalar};
  SeededRng rng(1);
  const auto p = nnet::init_params(arch, rng);
  const Matrix x = normal_matrix(batch, 10, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nnet::forward(arch, p, x));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_Forward)->Arg(128)->Arg(2048);

void BM_ForwardBackward(benchmark::State& state) {
  const auto batch = state.range(0);
  nnet::MlpArchitecture arch{10, {128, 128}, 5, nnet::Head::SoftmaxVector};
  SeededRng rng(1);
  const auto p = nnet::init_params(arch, rng);
  const Matrix x = normal_matrix(batch, 10, 2);
  losses::FullVectorSurrogateLoss loss(normal_matrix(batch, 5, 3), 0.1);
  const auto rows = losses::all_rows(batch);
  for (auto _ : state) {
    const auto trace = nnet::forward_trace(arch, p, x);
    Matrix g;
    loss.evaluate(rows, trace.output, &g);
    benchmark::DoNotOptimize(nnet::backward(arch, p, trace, g));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ForwardBackward)->Arg(128)->Arg(2048);

void BM_SurrogateRisk(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix y = normal_matrix(n, 5, 4);
  const Matrix d = Matrix::Constant(n, 5, 0.2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(surrogate::empirical_surrogate_risk(
        y, d, 0.1, surrogate::SurrogateKind::FullVector, surrogate::Convention::Half));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_SurrogateRisk)->Arg(1000)->Arg(100000);

void BM_ProjectSimplex(benchmark::State& state) {
  const Vector v = normal_matrix(state.range(0), 1, 5).col(0);
  for (auto _ : state) benchmark::DoNotOptimize(surrogate::project_simplex(v));
}
BENCHMARK(BM_ProjectSimplex)->Arg(5)->Arg(1000);

void BM_ClipToOverlap(benchmark::State& state) {
  const auto n = state.range(0);
  Matrix e = normal_matrix(n, 5, 6).array().exp();
  e = e.array().colwise() / e.rowwise().sum().array();
  for (auto _ : state) benchmark::DoNotOptimize(counterfactual::clip_to_overlap(e, 0.05));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ClipToOverlap)->Arg(10000);

void BM_PseudoOutcomes(benchmark::State& state) {
  const auto n = static_cast<int>(state.range(0));
  const auto g = dgp::generate_logged(dgp::DgpSpec::preset(dgp::Family::Multi2, n, 1),
                                      {dgp::LoggingKind::SoftmaxRandomLogits, 0.05, 1.0}, 2);
  const Matrix& e = *g.logged.true_propensity;
  for (auto _ : state) {
    benchmark::DoNotOptimize(counterfactual::ipw_pseudo_outcomes(g.logged, e));
    benchmark::DoNotOptimize(counterfactual::dr_pseudo_outcomes(g.logged, e, g.hidden.gamma));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_PseudoOutcomes)->Arg(10000);

void BM_MapTrainEpoch(benchmark::State& state) {
  const int n = 2000;
  const auto g = dgp::generate_full_feedback(dgp::DgpSpec::preset(dgp::Family::Binary2, n, 3));
  surrogate::GibbsConfig gibbs;
  gibbs.zeta = 0.1;
  const auto arch =
      surrogate::surrogate_architecture(gibbs.kind, g.data.x.cols(), 2, {128, 128});
  const auto loss = surrogate::make_surrogate_loss(gibbs, g.data.y);
  posterior::TrainConfig cfg;
  cfg.max_epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        posterior::map_train(arch, {g.data.x, *loss}, {g.data.x, *loss}, gibbs, cfg));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_MapTrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
