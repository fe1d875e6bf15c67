#include <benchmark/benchmark.h>

#include "eit/forward.hpp"
#include "eit/statmodel.hpp"

namespace {

eit::ForwardModel canonical_model(double h) {
  eit::PartitionSpec spec;
  spec.regions = 2;
  spec.r0 = 0.75;
  const auto partition = eit::build_partition(spec);
  eit::Mesh mesh = eit::mesh_disk(partition, h, 64);
  eit::ElectrodeSet electrodes = eit::place_electrodes(mesh, 16, 1.0);
  return eit::ForwardModel(std::move(mesh), std::move(electrodes), eit::ParameterBox{2, 0.5, 4.0});
}

void BM_ForwardMatrix(benchmark::State& state) {
  auto model = canonical_model(1.0 / static_cast<double>(state.range(0)));
  eit::Theta theta(2);
  theta << 2.0, 1.5;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward_matrix(theta).G.data());
  state.counters["vertices"] = static_cast<double>(model.mesh().vertex_count());
}
BENCHMARK(BM_ForwardMatrix)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_ForwardMatrixReference(benchmark::State& state) {
  auto model = canonical_model(1.0 / static_cast<double>(state.range(0)));
  eit::Theta theta(2);
  theta << 2.0, 1.5;
  for (auto _ : state) benchmark::DoNotOptimize(model.evaluate_reference(theta, false).matrix.G.data());
}
BENCHMARK(BM_ForwardMatrixReference)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

void BM_ForwardWithSensitivity(benchmark::State& state) {
  auto model = canonical_model(0.05);
  eit::Theta theta(2);
  theta << 2.0, 1.5;
  for (auto _ : state) benchmark::DoNotOptimize(model.evaluate(theta, true).sensitivity.slices.data());
}
BENCHMARK(BM_ForwardWithSensitivity)->Unit(benchmark::kMillisecond);

void BM_Factorize(benchmark::State& state) {
  auto model = canonical_model(0.05);
  eit::DirichletSolver solver(model.mesh(), model.stiffness());
  const double coeffs[] = {1.0, 2.0, 1.5};
  for (auto _ : state) solver.factorize(coeffs);
}
BENCHMARK(BM_Factorize)->Unit(benchmark::kMillisecond);

void BM_SufficientLikelihood(benchmark::State& state) {
  auto model = canonical_model(0.05);
  eit::Theta theta(2);
  theta << 2.0, 1.5;
  const auto data = eit::simulate(model, theta, static_cast<std::size_t>(state.range(0)), 7);
  const auto stats = eit::SufficientStatistics::from(data);
  const Eigen::MatrixXd g = model.forward_matrix(theta).G;
  for (auto _ : state) benchmark::DoNotOptimize(stats.log_likelihood(g));
}
BENCHMARK(BM_SufficientLikelihood)->Arg(4000);

void BM_DirectLikelihood(benchmark::State& state) {
  auto model = canonical_model(0.05);
  eit::Theta theta(2);
  theta << 2.0, 1.5;
  const auto data = eit::simulate(model, theta, static_cast<std::size_t>(state.range(0)), 7);
  const Eigen::MatrixXd g = model.forward_matrix(theta).G;
  for (auto _ : state) benchmark::DoNotOptimize(eit::log_likelihood(g, data));
}
BENCHMARK(BM_DirectLikelihood)->Arg(4000);

}  // namespace

BENCHMARK_MAIN();
