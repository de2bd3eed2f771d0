/*
 * Copyright 2026 The gail-lqr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <memory>

#include <benchmark/benchmark.h>

#include "gail_lqr/gail_solver.hpp"
#include "gail_lqr/grad_estimators.hpp"
#include "gail_lqr/riccati.hpp"
#include "gail_lqr_tools/instance_io.hpp"

namespace {

using namespace gail_lqr;

LqrInstance Instance(int d, int k) {
  return tools::GenerateInstance(d, k, 11, 0.5, {0.3, true});
}

CostParam Identity(int d, int k) {
  return CostParam(Matrix::Identity(d, d), Matrix::Identity(k, k));
}

void BM_Lyapunov(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const LqrInstance inst = Instance(d, 1);
  const Matrix T = inst.A();
  for (auto _ : state)
    benchmark::DoNotOptimize(SolveDiscreteLyapunov(T, inst.sigma0()));
}
BENCHMARK(BM_Lyapunov)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Arg(16)->Arg(32);

void BM_PolicyGradient(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const LqrInstance inst = Instance(d, 2);
  const CostParam theta = Identity(d, 2);
  const Policy K(Matrix::Zero(2, d));
  for (auto _ : state)
    benchmark::DoNotOptimize(ComputePolicyGradient(inst, theta, K));
}
BENCHMARK(BM_PolicyGradient)->Arg(2)->Arg(4)->Arg(8);

void BM_Dare(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const LqrInstance inst = Instance(d, 2);
  const CostParam theta = Identity(d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(SolveDare(inst, theta));
}
BENCHMARK(BM_Dare)->Arg(2)->Arg(4)->Arg(8);

// Cost of one solver iteration including trace bookkeeping.
void BM_SolverIteration(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  const LqrInstance inst = Instance(d, 2);
  const CostParam theta = Identity(d, 2);
  GailProblem problem(inst, ExpertPolicy(inst, theta),
                      ThetaBox{0.9, 1.1, 0.9, 1.1},
                      std::make_shared<SquaredPenalty>(10.0, theta));
  SolverConfig cfg;
  cfg.eta = 1e-6;
  cfg.lambda = 1e-8;
  cfg.max_iter = 1000;
  cfg.eps = 1e-300;
  const Policy K0(Matrix::Zero(2, d));
  for (auto _ : state) benchmark::DoNotOptimize(Solve(problem, K0, theta, cfg));
  state.SetItemsProcessed(state.iterations() * cfg.max_iter);
}
BENCHMARK(BM_SolverIteration)->Arg(1)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_EsGradient(benchmark::State& state) {
  const LqrInstance inst = Instance(2, 1);
  EstimatorConfig cfg;
  cfg.n_samples = static_cast<int>(state.range(0));
  const Policy K(Matrix::Zero(1, 2));
  const CostParam theta = Identity(2, 1);
  for (auto _ : state) benchmark::DoNotOptimize(EsGradient(inst, theta, K, cfg));
}
BENCHMARK(BM_EsGradient)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
