// Microbenchmarks for the solver hot path: one-step integrators, multilinear
// interpolation, and a full backward sweep on a reduced grid.

#include <benchmark/benchmark.h>

#include <random>

#include "cpds/integrators.hpp"
#include "cpds/models.hpp"
#include "cpds/solver.hpp"

namespace {

using namespace cpds;

void BM_mpe_step_enzyme(benchmark::State& state) {
  EnzymeModel model;
  const StateVector x{0.4, 0.1, 0.2};
  const ControlPoint a{330.0};
  for (auto _ : state) {
    StateVector y = mpe_step(model, x, a, 0.3);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_mpe_step_enzyme);

void BM_mpe_step_sird(benchmark::State& state) {
  SirdModel model;
  const StateVector x{0.5, 0.2, 0.2, 0.05};
  const ControlPoint a{0.3};
  for (auto _ : state) {
    StateVector y = mpe_step(model, x, a, 0.45);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_mpe_step_sird);

void BM_euler_step_sird(benchmark::State& state) {
  SirdModel model;
  const StateVector x{0.5, 0.2, 0.2, 0.05};
  const ControlPoint a{0.3};
  for (auto _ : state) {
    StateVector y = euler_step(model, x, a, 0.45);
    benchmark::DoNotOptimize(y);
  }
}
BENCHMARK(BM_euler_step_sird);

template <int Dim>
void BM_interpolate(benchmark::State& state) {
  const UniformGrid grid = UniformGrid::cube(Dim, 21);
  std::vector<double> values(static_cast<size_t>(grid.node_count));
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (double& v : values) v = unit(rng);
  std::vector<StateVector> queries(1024, StateVector::zeros(Dim));
  for (StateVector& q : queries)
    for (int k = 0; k < Dim; ++k) q[k] = unit(rng);
  size_t i = 0;
  for (auto _ : state) {
    const double v = interpolate(grid, values.data(), queries[i]);
    benchmark::DoNotOptimize(v);
    i = (i + 1) & 1023;
  }
}
BENCHMARK(BM_interpolate<3>);
BENCHMARK(BM_interpolate<4>);

void BM_backward_step_enzyme(benchmark::State& state) {
  EnzymeModel model;
  const UniformGrid grid = UniformGrid::cube(3, 21);
  const ControlGrid controls = ControlGrid::uniform(model.control_box(), 25);
  ScalarField V = terminal_slice(model, grid);
  for (auto _ : state) {
    ScalarField out = backward_step(model, grid, controls, V, model.tf(), 0.3,
                                    Integrator::MPE, 1);
    benchmark::DoNotOptimize(out.values.data());
  }
  state.SetItemsProcessed(state.iterations() * grid.node_count *
                          controls.points);
}
BENCHMARK(BM_backward_step_enzyme)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
