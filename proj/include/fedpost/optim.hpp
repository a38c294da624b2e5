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

#ifndef FEDPOST_OPTIM_HPP_
#define FEDPOST_OPTIM_HPP_

#include <cstdint>
#include <string>

#include "fedpost/types.hpp"

namespace fedpost {

enum class OptimizerKind { kSgd, kMomentum, kAdam, kAdagrad };

const char* to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

// Hyperparameters only; the accumulators live in Optimizer.
struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double lr = 0.1;
  double momentum = 0.9;  // momentum only
  double beta1 = 0.9;     // adam
  double beta2 = 0.99;    // adam
  double tau = 1e-3;      // adam / adagrad denominator offset
};

void validate(const OptimizerConfig& cfg);

/**
 * First-order optimizer state for one parameter vector.
 *
 *   sgd:      theta -= lr * g
 *   momentum: v = m v + g;                     theta -= lr * v
 *   adam:     m = b1 m + (1-b1) g;  s = b2 s + (1-b2) g^2;
 *             theta -= lr * m_hat / (sqrt(s_hat) + tau)   (bias-corrected)
 *   adagrad:  s += g^2;                         theta -= lr * g / (sqrt(s) + tau)
 *
 * The server applies the same rules with the aggregated client delta in
 * place of the gradient.
 */
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, Index dim);

  // Throws Divergence on a non-finite gradient or resulting parameter.
  void step(ParamVector& params, const ParamVector& grad);

  const OptimizerConfig& config() const { return cfg_; }
  std::uint64_t step_count() const { return step_count_; }
  const ParamVector& first_moment() const { return first_; }
  const ParamVector& second_moment() const { return second_; }

 private:
  OptimizerConfig cfg_;
  std::uint64_t step_count_ = 0;
  ParamVector first_;   // velocity (momentum) or first moment (adam)
  ParamVector second_;  // squared-gradient accumulator (adam, adagrad)
};

}  // namespace fedpost

#endif  // FEDPOST_OPTIM_HPP_
