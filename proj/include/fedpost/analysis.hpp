/*
 * Copyright 2026 The fedpost Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef FEDPOST_ANALYSIS_HPP_
#define FEDPOST_ANALYSIS_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "fedpost/optim.hpp"
#include "fedpost/posterior_delta.hpp"
#include "fedpost/types.hpp"

namespace fedpost {

// ---------------------------------------------------------------------------
// Bias and variance of client deltas against the exact posterior delta.

enum class FedPaSampling {
  kIasg,   // IASG samples folded through the DP estimator
  kExact,  // hook: returns the exact delta (the estimator equals its target)
};

struct BiasVarianceOptions {
  // Problem generation: least squares, features N(0, 1), y = X w + noise.
  Index dim = 10;
  Index num_examples = 500;
  double noise_std = 50.0;  // also the likelihood scale of the exact posterior
  std::size_t num_problems = 10;
  std::size_t num_inits = 10;
  std::size_t repeats = 10;  // estimations per (problem, init) cell
  double init_std = 10.0;
  std::size_t batch_size = 10;

  // FedAvg: delta = theta0 - theta_K for each K in the grid.
  std::vector<std::size_t> local_steps_grid{10, 100, 1000};
  double fedavg_lr = 0.01;

  // FedPA: IASG + DP delta. One sweep over ell at fixed rho and one over rho
  // at fixed ell.
  std::vector<std::size_t> samples_grid{2, 10, 50};
  std::vector<double> shrinkage_grid{};
  std::size_t num_samples = 50;   // ell for the shrinkage sweep
  double rho = 0.01;              // rho for the samples sweep
  double fedpa_lr = 0.1;
  std::size_t burn_in_steps = 200;
  std::size_t steps_per_sample = 0;  // 0 = one epoch
  FedPaSampling sampling = FedPaSampling::kIasg;

  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct BiasVarianceRow {
  std::string method;     // fedavg | fedpa
  std::string sweep_var;  // local_steps | samples | shrinkage
  double value = 0.0;
  double bias_l2 = 0.0;  // median over problems x inits
  double cov_fro = 0.0;  // median over problems x inits
  Index dim = 0;
  // Per (problem, init) cell, problem-major; used by trend statistics.
  std::vector<double> cell_bias;
};

std::vector<BiasVarianceRow> bias_variance_sweep(const BiasVarianceOptions& opts);

void write_bias_variance_csv(std::ostream& out, std::span<const BiasVarianceRow> rows);

// ---------------------------------------------------------------------------
// Effective sample size of IASG samples.

struct EssOptions {
  std::vector<Index> dims{10, 100};
  Index num_examples = 500;
  std::size_t batch_size = 10;
  double noise_std = 10.0;
  std::size_t num_problems = 10;
  std::size_t num_samples = 20;
  std::vector<double> lr_grid{0.02};
  // Burn-in sweep at steps_per_sample = fixed_steps_per_sample, and K sweep
  // at burn_in = fixed_burn_in.
  std::vector<std::size_t> burn_in_grid{0, 50, 100, 200, 400, 800};
  std::size_t fixed_steps_per_sample = 50;
  std::vector<std::size_t> steps_per_sample_grid{1, 5, 10, 25, 50};
  std::size_t fixed_burn_in = 50;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

struct EssRow {
  Index dim = 0;
  std::size_t burn_in = 0;
  std::size_t steps_per_sample = 0;
  double lr = 0.0;
  std::optional<double> ess;  // median over problems; absent if any diverged
};

std::vector<EssRow> ess_sweep(const EssOptions& opts);

void write_ess_csv(std::ostream& out, std::span<const EssRow> rows);

// ---------------------------------------------------------------------------
// Wall-clock cost of client updates.

struct TimingOptions {
  std::vector<Index> dims{100, 1000, 10000, 100000};
  Index num_examples = 100;
  std::size_t batch_size = 1;
  std::size_t local_epochs = 5;
  std::size_t num_samples = 5;  // ell; K = total steps / ell
  double lr = 0.0;  // 0 = 0.5 / d, stable for batch-1 least squares
  double rho = 0.01;
  std::size_t repeats = 5;
  std::size_t warmup = 1;
  std::size_t memory_cap_bytes = std::size_t{1} << 30;  // dense d x d limit
  std::vector<std::string> methods{"fedavg_delta", "dp_delta", "dense_delta"};
  std::uint64_t seed = 0;
};

struct TimingRow {
  Index dim = 0;
  std::string method;
  std::optional<double> ms;  // median; absent when skipped
};

std::vector<TimingRow> timing_sweep(const TimingOptions& opts);

void write_timing_csv(std::ostream& out, std::span<const TimingRow> rows);

// ---------------------------------------------------------------------------
// Trend statistics over sweep results.

struct TrendCheck {
  std::string name;
  double statistic = 0.0;
  double threshold = 0.0;
  bool passed = false;
  std::string detail;
};

// FedAvg bias rises with local steps; FedPA bias falls with samples.
std::vector<TrendCheck> bias_variance_trends(std::span<const BiasVarianceRow> rows,
                                             double min_abs_spearman = 0.9);
// ESS rises with burn-in and with steps per sample, per (dim, lr).
std::vector<TrendCheck> ess_trends(const EssOptions& opts, std::span<const EssRow> rows,
                                   double min_spearman = 0.8);
// DP overhead over FedAvg non-increasing in d; dense time superlinear for
// d >= 1000.
std::vector<TrendCheck> timing_trends(std::span<const TimingRow> rows);

// ---------------------------------------------------------------------------
// Randomised DP-vs-dense equivalence.

using DeltaFunction = std::function<ParamVector(
    std::span<const ParamVector> samples, const ParamVector& theta0,
    const ShrinkageConfig& cfg)>;

struct OracleCheckOptions {
  std::size_t num_cases = 1000;
  Index max_dim = 200;
  std::size_t max_samples = 50;
  std::vector<double> rhos{0.0, 1e-3, 1e-2, 0.1, 1.0};
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
};

struct OracleCase {
  std::uint64_t seed = 0;
  Index dim = 0;
  std::size_t num_samples = 0;
  double rho = 0.0;
};

struct OracleCheckReport {
  std::size_t num_cases = 0;
  double max_rel_error = 0.0;
  std::vector<OracleCase> failures;
  bool passed() const { return failures.empty(); }
};

// Case i uses seed derive_seed(opts.seed, {i}); make_oracle_case rebuilds it.
OracleCase oracle_case_params(const OracleCheckOptions& opts, std::uint64_t case_seed);
void make_oracle_case(const OracleCase& c, std::vector<ParamVector>& samples,
                      ParamVector& theta0);

// `delta` defaults to dp_delta. Error per case:
// ||delta - dense|| / (1 + ||dense||).
OracleCheckReport run_oracle_check(const OracleCheckOptions& opts,
                                   const DeltaFunction& delta = {});

}  // namespace fedpost

#endif  // FEDPOST_ANALYSIS_HPP_
