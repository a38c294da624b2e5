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

#include "fedpost/objectives.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace fedpost {

const char* to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kQuadratic: return "quadratic";
    case ObjectiveKind::kLeastSquares: return "least_squares";
    case ObjectiveKind::kLogistic: return "logistic";
  }
  return "unknown";
}

namespace {

void validate_dataset(const ClientDataset& data, const char* what) {
  if (data.num_examples() < 1) {
    throw InvalidArgument(std::string(what) + ": dataset has no examples");
  }
  if (data.targets.size() != data.num_examples()) {
    throw InvalidArgument(std::string(what) + ": targets/features size mismatch");
  }
  if (!(data.weight > 0.0)) {
    throw InvalidArgument(std::string(what) + ": client weight must be > 0");
  }
}

}  // namespace

ClientObjective ClientObjective::quadratic(GaussianPosterior posterior,
                                           double gradient_noise_std,
                                           double weight) {
  const Index d = posterior.mean.size();
  if (d == 0 || posterior.precision.rows() != d || posterior.precision.cols() != d) {
    throw InvalidArgument("quadratic objective: precision/mean size mismatch");
  }
  if (!(gradient_noise_std >= 0.0) || !(weight > 0.0)) {
    throw InvalidArgument("quadratic objective: bad noise std or weight");
  }
  ClientObjective obj;
  obj.kind_ = ObjectiveKind::kQuadratic;
  obj.dim_ = d;
  obj.weight_ = weight;
  obj.noise_std_ = gradient_noise_std;
  if (gradient_noise_std > 0.0) {
    Eigen::LLT<Matrix> llt(posterior.precision);
    if (llt.info() != Eigen::Success) {
      throw SingularMatrix("quadratic objective: precision not positive definite");
    }
    obj.noise_factor_ = gradient_noise_std * Matrix(llt.matrixL());
  }
  obj.posterior_ = std::move(posterior);
  return obj;
}

ClientObjective ClientObjective::least_squares(ClientDataset data) {
  validate_dataset(data, "least_squares objective");
  ClientObjective obj;
  obj.kind_ = ObjectiveKind::kLeastSquares;
  obj.dim_ = data.num_features();
  obj.weight_ = data.weight;
  obj.data_ = std::move(data);
  return obj;
}

ClientObjective ClientObjective::logistic(ClientDataset data) {
  validate_dataset(data, "logistic objective");
  if (data.num_classes < 2) {
    throw InvalidArgument("logistic objective: need at least two classes");
  }
  for (Index j = 0; j < data.num_examples(); ++j) {
    const double y = data.targets[j];
    if (y < 0 || y >= data.num_classes || y != std::floor(y)) {
      throw InvalidArgument("logistic objective: label out of range");
    }
  }
  ClientObjective obj;
  obj.kind_ = ObjectiveKind::kLogistic;
  obj.dim_ = static_cast<Index>(data.num_classes) * (data.num_features() + 1);
  obj.weight_ = data.weight;
  obj.data_ = std::move(data);
  return obj;
}

// n x C matrix of class scores.
Matrix ClientObjective::logits(const ParamVector& theta) const {
  const Index d = data_.num_features();
  const Index c = data_.num_classes;
  Eigen::Map<const Matrix> w(theta.data(), d + 1, c);
  Matrix out = data_.features * w.topRows(d);
  out.rowwise() += w.row(d);
  return out;
}

namespace {

// Row-wise log-sum-exp.
Eigen::VectorXd log_normalizer(const Matrix& logits) {
  Eigen::VectorXd out(logits.rows());
  for (Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    out[i] = m + std::log((logits.row(i).array() - m).exp().sum());
  }
  return out;
}

}  // namespace

double ClientObjective::loss(const ParamVector& theta) const {
  require_same_dim(dim_, theta.size(), "ClientObjective::loss");
  switch (kind_) {
    case ObjectiveKind::kQuadratic: {
      const ParamVector diff = theta - posterior_.mean;
      return 0.5 * diff.dot(posterior_.precision * diff);
    }
    case ObjectiveKind::kLeastSquares:
      return least_squares_loss(theta, data_);
    case ObjectiveKind::kLogistic: {
      const Matrix z = logits(theta);
      const Eigen::VectorXd lse = log_normalizer(z);
      double total = 0.0;
      for (Index i = 0; i < z.rows(); ++i) {
        total += lse[i] - z(i, static_cast<Index>(data_.targets[i]));
      }
      return total / static_cast<double>(z.rows());
    }
  }
  return 0.0;
}

ParamVector ClientObjective::gradient(const ParamVector& theta) const {
  require_same_dim(dim_, theta.size(), "ClientObjective::gradient");
  switch (kind_) {
    case ObjectiveKind::kQuadratic:
      return posterior_.precision * (theta - posterior_.mean);
    case ObjectiveKind::kLeastSquares: {
      const Eigen::VectorXd residual = data_.features * theta - data_.targets;
      return data_.features.transpose() * residual /
             static_cast<double>(data_.num_examples());
    }
    case ObjectiveKind::kLogistic: {
      Matrix p = logits(theta);
      const Eigen::VectorXd lse = log_normalizer(p);
      for (Index i = 0; i < p.rows(); ++i) {
        p.row(i) = (p.row(i).array() - lse[i]).exp();
        p(i, static_cast<Index>(data_.targets[i])) -= 1.0;
      }
      const Index d = data_.num_features();
      const Index c = data_.num_classes;
      const double inv_n = 1.0 / static_cast<double>(p.rows());
      ParamVector g(dim_);
      Eigen::Map<Matrix> gw(g.data(), d + 1, c);
      gw.topRows(d).noalias() = data_.features.transpose() * p * inv_n;
      gw.row(d) = p.colwise().sum() * inv_n;
      return g;
    }
  }
  return {};
}

ParamVector ClientObjective::stochastic_gradient(const ParamVector& theta,
                                                 std::span<const Index> batch,
                                                 Rng& rng) const {
  if (kind_ == ObjectiveKind::kQuadratic) {
    ParamVector g = gradient(theta);
    if (noise_std_ > 0.0) g.noalias() += noise_factor_ * standard_normal(dim_, rng);
    return g;
  }
  if (batch.empty()) return gradient(theta);
  require_same_dim(dim_, theta.size(), "ClientObjective::stochastic_gradient");
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  ParamVector g = ParamVector::Zero(dim_);
  if (kind_ == ObjectiveKind::kLeastSquares) {
    for (Index j : batch) {
      const auto x = data_.features.row(j);
      const double r = x.dot(theta) - data_.targets[j];
      g.noalias() += (r * inv_b) * x.transpose();
    }
    return g;
  }
  // Logistic.
  const Index d = data_.num_features();
  const Index c = data_.num_classes;
  Eigen::Map<const Matrix> w(theta.data(), d + 1, c);
  Eigen::Map<Matrix> gw(g.data(), d + 1, c);
  Eigen::RowVectorXd z(c);
  for (Index j : batch) {
    const auto x = data_.features.row(j);
    z.noalias() = x * w.topRows(d);
    z += w.row(d);
    const double m = z.maxCoeff();
    Eigen::RowVectorXd p = (z.array() - m).exp();
    p /= p.sum();
    p[static_cast<Index>(data_.targets[j])] -= 1.0;
    p *= inv_b;
    gw.topRows(d).noalias() += x.transpose() * p;
    gw.row(d) += p;
  }
  return g;
}

std::optional<double> ClientObjective::accuracy(const ParamVector& theta) const {
  if (kind_ != ObjectiveKind::kLogistic) return std::nullopt;
  require_same_dim(dim_, theta.size(), "ClientObjective::accuracy");
  const Matrix z = logits(theta);
  Index correct = 0;
  for (Index i = 0; i < z.rows(); ++i) {
    Index best = 0;
    z.row(i).maxCoeff(&best);
    if (best == static_cast<Index>(data_.targets[i])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(z.rows());
}

std::optional<GaussianPosterior> ClientObjective::closed_form_posterior() const {
  switch (kind_) {
    case ObjectiveKind::kQuadratic:
      return posterior_;
    case ObjectiveKind::kLeastSquares:
      return exact_local_posterior(data_, PrecisionScale::kPerExample);
    case ObjectiveKind::kLogistic:
      return std::nullopt;
  }
  return std::nullopt;
}

double least_squares_loss(const ParamVector& theta, const ClientDataset& data) {
  require_same_dim(data.num_features(), theta.size(), "least_squares_loss");
  if (data.num_examples() < 1) throw InvalidArgument("least_squares_loss: empty dataset");
  const Eigen::VectorXd residual = data.features * theta - data.targets;
  return 0.5 * residual.squaredNorm() / static_cast<double>(data.num_examples());
}

GaussianPosterior exact_local_posterior(const ClientDataset& data,
                                        PrecisionScale scale) {
  if (data.num_examples() < 1 || data.targets.size() != data.num_examples()) {
    throw InvalidArgument("exact_local_posterior: malformed dataset");
  }
  const Index d = data.num_features();
  Matrix gram = Matrix::Zero(d, d);
  gram.selfadjointView<Eigen::Lower>().rankUpdate(data.features.transpose());
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  const Eigen::VectorXd xty = data.features.transpose() * data.targets;

  Eigen::FullPivLU<Matrix> lu(gram);
  if (!lu.isInvertible()) {
    throw SingularMatrix("exact_local_posterior: X^T X is singular");
  }
  GaussianPosterior post;
  post.mean = lu.solve(xty);
  post.precision = scale == PrecisionScale::kSum
                       ? gram
                       : Matrix(gram / static_cast<double>(data.num_examples()));
  return post;
}

ParamVector exact_global_mode(std::span<const GaussianPosterior> posteriors,
                              std::span<const double> weights) {
  if (posteriors.empty() || posteriors.size() != weights.size()) {
    throw InvalidArgument("exact_global_mode: need one weight per posterior");
  }
  const Index d = posteriors.front().mean.size();
  Matrix a = Matrix::Zero(d, d);
  ParamVector b = ParamVector::Zero(d);
  for (std::size_t i = 0; i < posteriors.size(); ++i) {
    const GaussianPosterior& p = posteriors[i];
    require_same_dim(d, p.mean.size(), "exact_global_mode");
    if (p.precision.rows() != d || p.precision.cols() != d) {
      throw InvalidArgument("exact_global_mode: precision size mismatch");
    }
    a += weights[i] * p.precision;
    b += weights[i] * (p.precision * p.mean);
  }
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) {
    throw SingularMatrix("exact_global_mode: aggregate precision is singular");
  }
  return lu.solve(b);
}

}  // namespace fedpost
