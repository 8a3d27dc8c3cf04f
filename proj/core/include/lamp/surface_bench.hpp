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

// Synthetic radius sweep: probes a mock surface directly at a grid of jitter
// scales and compares the empirical error of the linear surrogate at the seed
// point with the bias/variance curve.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lamp/curvature.hpp"
#include "lamp/mock.hpp"

namespace lamp {

struct SurfaceBenchConfig {
  MockSurface surface;
  WeightVector w0;
  std::vector<double> deltas;
  std::size_t m = kDefaultPerturbations;
  std::size_t trials = 200;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  TruncationNorm norm = TruncationNorm::kSup;
};

struct SurfaceBenchRow {
  double delta = 0.0;
  double mse_theory = 0.0;     // mse_curve with the analytic Hessian and noise variance
  double mse_empirical = 0.0;  // mean (surrogate(w0) - surface(w0))^2
  double r2_before = 0.0;      // mean R^2 of the full fit
  double r2_after = 0.0;       // mean R^2 after truncation at the fitted delta*
  std::size_t truncated_trials = 0;
};

std::vector<SurfaceBenchRow> run_surface_bench(const SurfaceBenchConfig& config);

// Header line plus one line per row.
std::string surface_bench_csv(const std::vector<SurfaceBenchRow>& rows);

}  // namespace lamp
