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

#include "fedpost/optim.hpp"

#include <cmath>

namespace fedpost {

const char* to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adam";
    case OptimizerKind::kAdagrad: return "adagrad";
  }
  return "unknown";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "adagrad") return OptimizerKind::kAdagrad;
  throw InvalidArgument("unknown optimizer '" + name + "'");
}

void validate(const OptimizerConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) {
    throw InvalidArgument("optimizer: lr must be finite and > 0");
  }
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw InvalidArgument("optimizer: momentum must be in [0, 1)");
  }
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw InvalidArgument("optimizer: betas must be in [0, 1)");
  }
  if (!(cfg.tau > 0.0)) throw InvalidArgument("optimizer: tau must be > 0");
}

Optimizer::Optimizer(const OptimizerConfig& cfg, Index dim) : cfg_(cfg) {
  validate(cfg);
  switch (cfg.kind) {
    case OptimizerKind::kSgd:
      break;
    case OptimizerKind::kMomentum:
      first_ = ParamVector::Zero(dim);
      break;
    case OptimizerKind::kAdam:
      first_ = ParamVector::Zero(dim);
      second_ = ParamVector::Zero(dim);
      break;
    case OptimizerKind::kAdagrad:
      second_ = ParamVector::Zero(dim);
      break;
  }
}

void Optimizer::step(ParamVector& params, const ParamVector& grad) {
  require_same_dim(params.size(), grad.size(), "Optimizer::step");
  if (first_.size() > 0) require_same_dim(first_.size(), params.size(), "Optimizer::step");
  if (second_.size() > 0) require_same_dim(second_.size(), params.size(), "Optimizer::step");
  if (!grad.allFinite()) {
    throw Divergence("non-finite gradient", static_cast<std::int64_t>(step_count_));
  }
  ++step_count_;
  switch (cfg_.kind) {
    case OptimizerKind::kSgd:
      params.noalias() -= cfg_.lr * grad;
      break;
    case OptimizerKind::kMomentum:
      first_ = cfg_.momentum * first_ + grad;
      params.noalias() -= cfg_.lr * first_;
      break;
    case OptimizerKind::kAdam: {
      first_ = cfg_.beta1 * first_ + (1.0 - cfg_.beta1) * grad;
      second_ = cfg_.beta2 * second_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
      const double t = static_cast<double>(step_count_);
      const double c1 = 1.0 - std::pow(cfg_.beta1, t);
      const double c2 = 1.0 - std::pow(cfg_.beta2, t);
      params.array() -= cfg_.lr * (first_.array() / c1) /
                        ((second_.array() / c2).sqrt() + cfg_.tau);
      break;
    }
    case OptimizerKind::kAdagrad:
      second_ += grad.cwiseAbs2();
      params.array() -= cfg_.lr * grad.array() / (second_.array().sqrt() + cfg_.tau);
      break;
  }
  if (!params.allFinite()) {
    throw Divergence("non-finite parameters", static_cast<std::int64_t>(step_count_));
  }
}

}  // namespace fedpost
