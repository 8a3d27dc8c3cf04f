/*
 * Copyright 2026 The lamp-audit Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


#include <memory>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "lamp/audit.hpp"
#include "lamp/curvature.hpp"
#include "lamp/gateway.hpp"
#include "lamp/mock.hpp"
#include "lamp/probe.hpp"
#include "lamp/session.hpp"

namespace {

using namespace lamp;

std::vector<ProbeSample> make_samples(std::size_t d, std::size_t m) {
  const WeightVector w0{std::vector<double>(d, 0.5)};
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<ProbeSample> out;
  std::size_t i = 1;
  for (const auto& eps : sample_jitters(d, 0.3, m, 11)) {
    ProbeSample s;
    s.weights = apply_jitter(w0, eps).weights;
    double v = 0.2;
    for (double w : s.weights.values) v += 0.1 * w + 0.05 * w * w;
    s.probability = v + noise(rng);
    s.jitter = eps;
    s.index = i++;
    out.push_back(std::move(s));
  }
  return out;
}

void BM_FitSurrogate(benchmark::State& state) {
  const auto samples = make_samples(static_cast<std::size_t>(state.range(0)), 50);
  for (auto _ : state) benchmark::DoNotOptimize(fit_surrogate(samples));
}
BENCHMARK(BM_FitSurrogate)->Arg(2)->Arg(5)->Arg(10);

void BM_FitQuadratic(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const auto samples = make_samples(d, 3 * min_quadratic_samples(d));
  const WeightVector w0{std::vector<double>(d, 0.5)};
  for (auto _ : state) benchmark::DoNotOptimize(fit_quadratic(samples, w0));
}
BENCHMARK(BM_FitQuadratic)->Arg(2)->Arg(5);

void BM_OptimalRadius(benchmark::State& state) {
  double h = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(optimal_radius(5, 50, 1e-4, h));
    h += 1e-9;
  }
}
BENCHMARK(BM_OptimalRadius);

void BM_MockRelabelBatch(benchmark::State& state) {
  const auto mock = MockModelConfig::sigmoid_default(5, 0.01, 3);
  std::vector<WeightVector> weights;
  for (const auto& eps : sample_jitters(5, 0.3, 50, 5)) {
    weights.push_back(apply_jitter(WeightVector{mock.w0}, eps).weights);
  }
  EndpointConfig ep;
  ep.max_in_flight = static_cast<int>(state.range(0));
  Gateway gw(ep, std::make_shared<MockModel>(mock), TaskTemplate::preset("sentiment"));
  for (auto _ : state) {
    benchmark::DoNotOptimize(gw.batch_relabel("A quiet, careful film.", mock.factors, weights));
  }
}
BENCHMARK(BM_MockRelabelBatch)->Arg(1)->Arg(8);

void BM_SerializeSession(benchmark::State& state) {
  AuditConfig cfg;
  cfg.seed = 9;
  cfg.created_at = "2026-01-01T00:00:00Z";
  const auto session = run_audit(cfg, "A quiet, careful film.",
                                 std::make_shared<MockModel>(MockModelConfig::sigmoid_default(5, 0.01, 9)));
  for (auto _ : state) benchmark::DoNotOptimize(serialize_session(session));
}
BENCHMARK(BM_SerializeSession);

}  // namespace

BENCHMARK_MAIN();
