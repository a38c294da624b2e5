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

#ifndef FEDPOST_SAMPLER_HPP_
#define FEDPOST_SAMPLER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "fedpost/objectives.hpp"
#include "fedpost/optim.hpp"
#include "fedpost/random.hpp"

namespace fedpost {

struct SamplerConfig {
  std::size_t burn_in_steps = 0;     // B
  std::size_t steps_per_sample = 1;  // K
  std::size_t num_samples = 1;       // ell
  std::size_t batch_size = 0;        // 0 = full batch
  std::uint64_t seed = 0;

  std::size_t total_steps() const {
    return burn_in_steps + steps_per_sample * num_samples;
  }
};

void validate(const SamplerConfig& cfg);

// Draws `batch_size` example indices uniformly with replacement. Returns an
// empty batch (full batch) when batch_size is 0 or the objective has no
// examples.
void draw_batch(const ClientObjective& objective, std::size_t batch_size,
                Rng& rng, std::vector<Index>& out);

/**
 * Iterate-averaged SGD sampling.
 *
 * Runs `burn_in_steps` optimizer steps from `theta_init`, discarding the
 * iterates, then emits `num_samples` samples, each the arithmetic mean of the
 * next `steps_per_sample` post-step iterates. `on_sample` receives the
 * samples in order, so callers can consume them online.
 *
 * Throws Divergence (with the 0-based local step index) on a non-finite
 * iterate or gradient.
 */
void iasg_sample_stream(const ClientObjective& objective, Optimizer& optimizer,
                        const SamplerConfig& cfg, const ParamVector& theta_init,
                        const std::function<void(const ParamVector&)>& on_sample);

std::vector<ParamVector> iasg_sample(const ClientObjective& objective,
                                     Optimizer& optimizer,
                                     const SamplerConfig& cfg,
                                     const ParamVector& theta_init);

// (sum w)^2 / sum w^2.
double ess_from_weights(std::span<const double> weights);

// Weights exp(-(loss_j - min_k loss_k)).
double ess_from_losses(std::span<const double> losses);

// Effective sample size of `samples` under weights proportional to
// exp(-full-batch loss). Result lies in [1, ell].
double ess(std::span<const ParamVector> samples, const ClientObjective& objective);

}  // namespace fedpost

#endif  // FEDPOST_SAMPLER_HPP_
