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

#include "fedpost/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fedpost {

void validate(const SamplerConfig& cfg) {
  if (cfg.steps_per_sample < 1) throw InvalidArgument("sampler: steps_per_sample must be >= 1");
  if (cfg.num_samples < 1) throw InvalidArgument("sampler: num_samples must be >= 1");
}

void draw_batch(const ClientObjective& objective, std::size_t batch_size,
                Rng& rng, std::vector<Index>& out) {
  out.clear();
  const Index n = objective.num_examples();
  if (batch_size == 0 || n == 0) return;
  std::uniform_int_distribution<Index> pick(0, n - 1);
  for (std::size_t b = 0; b < batch_size; ++b) out.push_back(pick(rng));
}

void iasg_sample_stream(const ClientObjective& objective, Optimizer& optimizer,
                        const SamplerConfig& cfg, const ParamVector& theta_init,
                        const std::function<void(const ParamVector&)>& on_sample) {
  validate(cfg);
  require_same_dim(objective.dim(), theta_init.size(), "iasg_sample");
  Rng rng(cfg.seed);
  std::vector<Index> batch;
  ParamVector theta = theta_init;
  std::int64_t step = 0;

  auto advance = [&]() {
    draw_batch(objective, cfg.batch_size, rng, batch);
    const ParamVector g = objective.stochastic_gradient(theta, batch, rng);
    try {
      optimizer.step(theta, g);
    } catch (const Divergence& e) {
      throw Divergence(std::string("iasg_sample: ") + e.what() + " at local step " +
                           std::to_string(step),
                       step);
    }
    ++step;
  };

  for (std::size_t b = 0; b < cfg.burn_in_steps; ++b) advance();

  const double inv_k = 1.0 / static_cast<double>(cfg.steps_per_sample);
  ParamVector sum(theta.size());
  for (std::size_t s = 0; s < cfg.num_samples; ++s) {
    sum.setZero();
    for (std::size_t k = 0; k < cfg.steps_per_sample; ++k) {
      advance();
      sum += theta;
    }
    on_sample(sum * inv_k);
  }
}

std::vector<ParamVector> iasg_sample(const ClientObjective& objective,
                                     Optimizer& optimizer,
                                     const SamplerConfig& cfg,
                                     const ParamVector& theta_init) {
  std::vector<ParamVector> samples;
  samples.reserve(cfg.num_samples);
  iasg_sample_stream(objective, optimizer, cfg, theta_init,
                     [&](const ParamVector& x) { samples.push_back(x); });
  return samples;
}

double ess_from_weights(std::span<const double> weights) {
  if (weights.empty()) throw InvalidArgument("ess: empty sample list");
  double sum = 0.0, sum_sq = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidArgument("ess: invalid weight");
    sum += w;
    sum_sq += w * w;
  }
  if (sum_sq == 0.0) throw InvalidArgument("ess: all weights are zero");
  const double value = sum * sum / sum_sq;
  // Rounding can push the ratio a hair outside [1, ell].
  return std::clamp(value, 1.0, static_cast<double>(weights.size()));
}

double ess_from_losses(std::span<const double> losses) {
  if (losses.empty()) throw InvalidArgument("ess: empty sample list");
  const double lo = *std::min_element(losses.begin(), losses.end());
  if (!std::isfinite(lo)) throw InvalidArgument("ess: non-finite loss");
  std::vector<double> w(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) w[i] = std::exp(-(losses[i] - lo));
  return ess_from_weights(w);
}

double ess(std::span<const ParamVector> samples, const ClientObjective& objective) {
  if (samples.empty()) throw InvalidArgument("ess: empty sample list");
  std::vector<double> losses;
  losses.reserve(samples.size());
  for (const ParamVector& x : samples) losses.push_back(objective.loss(x));
  return ess_from_losses(losses);
}

}  // namespace fedpost
