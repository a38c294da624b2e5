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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "fedpost/objectives.hpp"
#include "fedpost/sampler.hpp"

using namespace fedpost;

namespace {

ClientObjective quadratic_1d(double mean) {
  GaussianPosterior p{ParamVector::Constant(1, mean), Matrix::Identity(1, 1)};
  return ClientObjective::quadratic(std::move(p), 0.0);
}

ClientObjective small_regression(std::uint64_t seed) {
  return ClientObjective::least_squares(make_regression(60, 4, 4, 1.0, seed).data);
}

OptimizerConfig sgd(double lr) {
  OptimizerConfig c;
  c.lr = lr;
  return c;
}

}  // namespace

TEST_CASE("one step per sample emits the raw iterates") {
  const auto obj = small_regression(1);
  SamplerConfig cfg;
  cfg.burn_in_steps = 3;
  cfg.steps_per_sample = 1;
  cfg.num_samples = 6;
  cfg.batch_size = 5;
  cfg.seed = 9;
  Optimizer opt(sgd(0.01), obj.dim());
  const ParamVector init = ParamVector::Ones(obj.dim());
  const auto samples = iasg_sample(obj, opt, cfg, init);
  REQUIRE(samples.size() == 6);
  CHECK(opt.step_count() == cfg.total_steps());

  // Replay the same SGD trajectory by hand.
  Rng rng(cfg.seed);
  std::vector<Index> batch;
  Optimizer ref(sgd(0.01), obj.dim());
  ParamVector theta = init;
  for (std::size_t s = 0; s < 9; ++s) {
    draw_batch(obj, cfg.batch_size, rng, batch);
    ref.step(theta, obj.stochastic_gradient(theta, batch, rng));
    if (s >= 3) CHECK(samples[s - 3] == theta);
  }
}

TEST_CASE("one-dimensional quadratic samples concentrate at the minimiser") {
  const auto obj = quadratic_1d(2.0);
  SamplerConfig cfg;
  cfg.burn_in_steps = 50;
  cfg.steps_per_sample = 10;
  cfg.num_samples = 20;
  auto sample_mean = [&](double start) {
    Optimizer opt(sgd(0.1), 1);
    const auto samples = iasg_sample(obj, opt, cfg, ParamVector::Constant(1, start));
    double mean = 0.0;
    for (const auto& s : samples) mean += s[0];
    return mean / static_cast<double>(samples.size());
  };
  // Iterate k is 2 + (start - 2) 0.9^k; samples average steps 51..250.
  auto closed_form = [](double start) {
    double acc = 0.0;
    for (int k = 51; k <= 250; ++k) acc += std::pow(0.9, k);
    return 2.0 + (start - 2.0) * acc / 200.0;
  };
  for (double start : {0.0, -5.0, 1.999, 2.001}) {
    CHECK(sample_mean(start) == doctest::Approx(closed_form(start)).epsilon(1e-12));
  }
  CHECK(std::abs(sample_mean(1.999) - 2.0) <= 1e-6);
  CHECK(std::abs(sample_mean(2.001) - 2.0) <= 1e-6);
}

TEST_CASE("single sample without burn-in is the mean of the first K iterates") {
  const auto obj = quadratic_1d(2.0);
  SamplerConfig cfg;
  cfg.steps_per_sample = 4;
  cfg.num_samples = 1;
  Optimizer opt(sgd(0.5), 1);
  const auto samples = iasg_sample(obj, opt, cfg, ParamVector::Zero(1));
  // Iterates 1, 1.5, 1.75, 1.875.
  REQUIRE(samples.size() == 1);
  CHECK(samples[0][0] == doctest::Approx((1.0 + 1.5 + 1.75 + 1.875) / 4.0).epsilon(1e-15));
}

TEST_CASE("sampler determinism and divergence") {
  const auto obj = small_regression(2);
  SamplerConfig cfg;
  cfg.burn_in_steps = 10;
  cfg.steps_per_sample = 5;
  cfg.num_samples = 8;
  cfg.batch_size = 3;
  cfg.seed = 77;
  const ParamVector init = ParamVector::Zero(obj.dim());
  Optimizer a(sgd(0.01), obj.dim()), b(sgd(0.01), obj.dim());
  const auto sa = iasg_sample(obj, a, cfg, init);
  const auto sb = iasg_sample(obj, b, cfg, init);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i] == sb[i]);

  Optimizer wild(sgd(1e6), obj.dim());
  cfg.burn_in_steps = 10000;
  CHECK_THROWS_AS(iasg_sample(obj, wild, cfg, init), Divergence);
  Optimizer fine(sgd(0.01), obj.dim());
  CHECK_THROWS_AS(iasg_sample(obj, fine, cfg, ParamVector::Zero(obj.dim() + 1)),
                  InvalidArgument);
  cfg.steps_per_sample = 0;
  CHECK_THROWS_AS(iasg_sample(obj, fine, cfg, init), InvalidArgument);
}

TEST_CASE("ess formula examples") {
  const std::vector<double> w{1.0, 1.0, 2.0};
  CHECK(ess_from_weights(w) == doctest::Approx(16.0 / 6.0).epsilon(1e-15));
  const std::vector<double> equal(7, 0.3);
  CHECK(ess_from_losses(equal) == 7.0);
  const std::vector<double> dominant{0.0, 800.0, 900.0, 1000.0};
  CHECK(ess_from_losses(dominant) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(ess_from_losses(std::vector<double>{}), InvalidArgument);
  CHECK_THROWS_AS(ess(std::vector<ParamVector>{}, quadratic_1d(0.0)), InvalidArgument);
}

TEST_CASE("ess properties") {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t l = 1 + static_cast<std::size_t>(trial % 30);
    std::vector<double> losses(l), shifted(l);
    const double shift = u(rng) * 100.0 - 250.0;
    for (std::size_t j = 0; j < l; ++j) {
      losses[j] = u(rng);
      shifted[j] = losses[j] + shift;
    }
    const double e = ess_from_losses(losses);
    CHECK(e >= 1.0);
    CHECK(e <= static_cast<double>(l));
    CHECK(ess_from_losses(shifted) == doctest::Approx(e).epsilon(1e-12));
    if (l > 1) CHECK(e < static_cast<double>(l));  // distinct losses, unequal weights
  }
  // ess over samples uses full-batch losses.
  const auto obj = quadratic_1d(0.0);
  std::vector<ParamVector> xs{ParamVector::Constant(1, 1.0), ParamVector::Constant(1, -1.0)};
  CHECK(ess(xs, obj) == 2.0);
}
