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

#ifndef FEDPOST_POSTERIOR_DELTA_HPP_
#define FEDPOST_POSTERIOR_DELTA_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fedpost/types.hpp"

namespace fedpost {

struct ShrinkageConfig {
  // Shrinkage constant; 0 reduces the covariance estimate to the identity.
  double rho = 0.01;
  // Guard on |1 + gamma * (v . u)|; smaller denominators are rejected.
  double epsilon_denom = 1e-12;
};

// Normalising weight 1 / (1 + (t - 1) rho) of the identity term in the
// shrinkage covariance estimate after t samples.
double shrinkage_weight(std::size_t t, double rho);

/**
 * Online client-delta estimator.
 *
 * Given a stream of posterior samples x_1, x_2, ... and a fixed anchor
 * theta0, maintains
 *
 *   delta_hat_t = Sigma_hat_t^{-1} (theta0 - mean_t),
 *   Sigma_hat_t = w_t I + (1 - w_t) S_t,   w_t = shrinkage_weight(t, rho),
 *
 * where S_t is the unbiased sample covariance (S_1 := 0), without forming
 * any d x d matrix. The unnormalised matrix I + rho (t - 1) S_t grows by a
 * rank-1 term gamma_t u_t u_t^T per sample (u_t = x_t - mean_{t-1},
 * gamma_t = rho (t - 1) / t), so its inverse is tracked implicitly through
 * Sherman-Morrison: for every processed sample we keep
 * v_t = (I + rho (t - 2) S_{t-1})^{-1} u_t and the scalar denominator
 * 1 + gamma_t v_t . u_t. Applying the stored chain to a new u costs O(t d),
 * so ell samples cost O(ell^2 d) time and O(ell d) memory.
 *
 * The state can be finalized after any number of samples; finalize() never
 * mutates it.
 *
 * Single-owner value type. Distinct instances are independent.
 */
class DeltaState {
 public:
  struct HistoryEntry {
    ParamVector v;
    double gamma = 0.0;
    double denom = 1.0;
  };

  DeltaState(const ParamVector& theta0, const ParamVector& first_sample,
             const ShrinkageConfig& cfg = {});

  // Folds in one more sample. Strong exception guarantee: on SingularUpdate
  // or InvalidArgument the state is left untouched.
  void update(const ParamVector& sample);

  ParamVector finalize() const;

  Index dim() const { return theta0_.size(); }
  std::size_t num_samples() const { return t_; }
  double rho() const { return cfg_.rho; }
  const ShrinkageConfig& config() const { return cfg_; }
  const ParamVector& theta0() const { return theta0_; }
  const ParamVector& mean() const { return mean_; }
  const ParamVector& delta_tilde() const { return delta_tilde_; }
  const std::vector<HistoryEntry>& history() const { return history_; }

  // Debug dump with the fields named above (test fixtures only).
  std::string to_json() const;

 private:
  ShrinkageConfig cfg_;
  std::size_t t_ = 0;
  ParamVector theta0_;
  ParamVector mean_;
  ParamVector delta_tilde_;
  std::vector<HistoryEntry> history_;
};

// Convenience wrapper: feeds `samples` in order through a DeltaState.
ParamVector dp_delta(std::span<const ParamVector> samples,
                     const ParamVector& theta0, const ShrinkageConfig& cfg);

// Reference implementation: materialises Sigma_hat densely and solves the
// linear system directly. O(ell d^2 + d^3) time, O(d^2) memory.
ParamVector dense_delta_oracle(std::span<const ParamVector> samples,
                               const ParamVector& theta0, double rho);

}  // namespace fedpost

#endif  // FEDPOST_POSTERIOR_DELTA_HPP_
