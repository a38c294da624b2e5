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

#include "fedpost/posterior_delta.hpp"

#include <cmath>
#include <string>

#include "json.hpp"

namespace fedpost {

double shrinkage_weight(std::size_t t, double rho) {
  if (t == 0) throw InvalidArgument("shrinkage_weight: t must be >= 1");
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw InvalidArgument("shrinkage_weight: rho must be finite and >= 0");
  }
  return 1.0 / (1.0 + static_cast<double>(t - 1) * rho);
}

DeltaState::DeltaState(const ParamVector& theta0,
                       const ParamVector& first_sample,
                       const ShrinkageConfig& cfg)
    : cfg_(cfg), t_(1), theta0_(theta0), mean_(first_sample) {
  if (theta0.size() == 0) throw InvalidArgument("DeltaState: empty vector");
  require_same_dim(theta0.size(), first_sample.size(), "DeltaState");
  require_finite(theta0, "DeltaState theta0");
  require_finite(first_sample, "DeltaState sample");
  if (!(cfg.rho >= 0.0) || !std::isfinite(cfg.rho)) {
    throw InvalidArgument("DeltaState: rho must be finite and >= 0");
  }
  if (!(cfg.epsilon_denom > 0.0)) {
    throw InvalidArgument("DeltaState: epsilon_denom must be > 0");
  }
  delta_tilde_ = theta0_ - mean_;
}

void DeltaState::update(const ParamVector& sample) {
  require_same_dim(dim(), sample.size(), "DeltaState::update");
  require_finite(sample, "DeltaState::update sample");

  const double t = static_cast<double>(t_ + 1);
  const ParamVector u = sample - mean_;

  // v = (I + rho (t - 2) S_{t-1})^{-1} u via the stored rank-1 chain.
  ParamVector v = u;
  for (const HistoryEntry& h : history_) {
    const double coef = h.gamma * h.v.dot(u) / h.denom;
    v.noalias() -= coef * h.v;
  }

  const double gamma = cfg_.rho * (t - 1.0) / t;
  const double uv = u.dot(v);
  const double denom = 1.0 + gamma * uv;
  if (!(std::abs(denom) > cfg_.epsilon_denom)) {
    throw SingularUpdate("DeltaState::update: Sherman-Morrison denominator " +
                         std::to_string(denom) + " at sample " +
                         std::to_string(t_ + 1));
  }
  const double scale =
      (1.0 + gamma * (t * u.dot(delta_tilde_) - uv) / denom) / t;
  ParamVector next_delta = delta_tilde_ - scale * v;
  if (!next_delta.allFinite()) {
    throw SingularUpdate("DeltaState::update: non-finite delta at sample " +
                         std::to_string(t_ + 1));
  }

  // Commit.
  delta_tilde_ = std::move(next_delta);
  mean_ += u / t;
  history_.push_back(HistoryEntry{std::move(v), gamma, denom});
  ++t_;
}

ParamVector DeltaState::finalize() const {
  // With rho = 0 the covariance estimate is the identity at every t, and the
  // running mean gives the result exactly.
  if (cfg_.rho == 0.0) return theta0_ - mean_;
  return delta_tilde_ / shrinkage_weight(t_, cfg_.rho);
}

namespace {
nlohmann::json vec_json(const ParamVector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}
}  // namespace

std::string DeltaState::to_json() const {
  nlohmann::json j;
  j["dim"] = dim();
  j["t"] = t_;
  j["rho"] = cfg_.rho;
  j["epsilon_denom"] = cfg_.epsilon_denom;
  j["theta0"] = vec_json(theta0_);
  j["mean"] = vec_json(mean_);
  j["delta_tilde"] = vec_json(delta_tilde_);
  nlohmann::json hist = nlohmann::json::array();
  for (const HistoryEntry& h : history_) {
    hist.push_back({{"v", vec_json(h.v)}, {"gamma", h.gamma}, {"denom", h.denom}});
  }
  j["history"] = std::move(hist);
  return j.dump();
}

ParamVector dp_delta(std::span<const ParamVector> samples,
                     const ParamVector& theta0, const ShrinkageConfig& cfg) {
  if (samples.empty()) throw InvalidArgument("dp_delta: no samples");
  DeltaState state(theta0, samples.front(), cfg);
  for (std::size_t i = 1; i < samples.size(); ++i) state.update(samples[i]);
  return state.finalize();
}

ParamVector dense_delta_oracle(std::span<const ParamVector> samples,
                               const ParamVector& theta0, double rho) {
  if (samples.empty()) throw InvalidArgument("dense_delta_oracle: no samples");
  const Index d = theta0.size();
  const std::size_t ell = samples.size();
  Matrix centered(d, static_cast<Index>(ell));
  ParamVector mean = ParamVector::Zero(d);
  for (const ParamVector& x : samples) {
    require_same_dim(d, x.size(), "dense_delta_oracle");
    mean += x;
  }
  mean /= static_cast<double>(ell);
  for (std::size_t j = 0; j < ell; ++j) {
    centered.col(static_cast<Index>(j)) = samples[j] - mean;
  }

  const double w = shrinkage_weight(ell, rho);
  Matrix sigma = Matrix::Identity(d, d) * w;
  if (ell > 1) {
    const double c = (1.0 - w) / static_cast<double>(ell - 1);
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(centered, c);
    sigma.triangularView<Eigen::StrictlyUpper>() = sigma.transpose();
  }
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrix("dense_delta_oracle: shrinkage matrix not invertible");
  }
  ParamVector rhs = theta0 - mean;
  return llt.solve(rhs);
}

}  // namespace fedpost
