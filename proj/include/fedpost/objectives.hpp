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

#ifndef FEDPOST_OBJECTIVES_HPP_
#define FEDPOST_OBJECTIVES_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedpost/random.hpp"
#include "fedpost/types.hpp"

namespace fedpost {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// One client's local examples. For classification, targets hold class
// indices 0..num_classes-1 stored as doubles.
struct ClientDataset {
  RowMatrix features;  // n_i x d
  Eigen::VectorXd targets;
  double weight = 1.0;  // q_i before normalisation; usually n_i
  int num_classes = 0;  // 0 for regression

  Index num_examples() const { return features.rows(); }
  Index num_features() const { return features.cols(); }
};

struct GaussianPosterior {
  ParamVector mean;
  Matrix precision;
};

enum class ObjectiveKind { kQuadratic, kLeastSquares, kLogistic };

const char* to_string(ObjectiveKind kind);

/**
 * A client's local objective f_i and its gradients.
 *
 *  - quadratic:     f(theta) = 1/2 (theta - mu)^T A (theta - mu). The
 *                   stochastic gradient adds N(0, noise_std^2 A) noise, the
 *                   covariance shape mini-batching produces for least squares.
 *  - least_squares: f(theta) = (1/n) sum_j 1/2 (x_j^T theta - y_j)^2.
 *  - logistic:      multinomial logistic regression, mean cross-entropy.
 *                   Parameters are num_classes blocks of (d weights, bias).
 *
 * Immutable after construction.
 */
class ClientObjective {
 public:
  static ClientObjective quadratic(GaussianPosterior posterior,
                                   double gradient_noise_std,
                                   double weight = 1.0);
  static ClientObjective least_squares(ClientDataset data);
  static ClientObjective logistic(ClientDataset data);

  ObjectiveKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  // 0 for quadratic objectives (no examples to batch over).
  Index num_examples() const { return data_.num_examples(); }
  double weight() const { return weight_; }

  double loss(const ParamVector& theta) const;
  ParamVector gradient(const ParamVector& theta) const;

  // Mean gradient over `batch` (example indices, repeats allowed). An empty
  // batch means full batch. `rng` drives the quadratic gradient noise.
  ParamVector stochastic_gradient(const ParamVector& theta,
                                  std::span<const Index> batch,
                                  Rng& rng) const;

  // Classification accuracy; nullopt for regression objectives.
  std::optional<double> accuracy(const ParamVector& theta) const;

  const ClientDataset& dataset() const { return data_; }
  // Exact local posterior when it exists in closed form (quadratic and
  // least squares); precision uses the per-example-mean scaling of loss().
  std::optional<GaussianPosterior> closed_form_posterior() const;

 private:
  ClientObjective() = default;
  Matrix logits(const ParamVector& theta) const;

  ObjectiveKind kind_ = ObjectiveKind::kQuadratic;
  Index dim_ = 0;
  double weight_ = 1.0;
  ClientDataset data_;
  GaussianPosterior posterior_;
  Matrix noise_factor_;  // noise_std * chol(A), quadratic only
  double noise_std_ = 0.0;
};

double least_squares_loss(const ParamVector& theta, const ClientDataset& data);

enum class PrecisionScale {
  kSum,         // X^T X, the sum-of-squares likelihood
  kPerExample,  // X^T X / n, matches the per-example-mean loss
};

// Local Gaussian posterior of a least-squares client: precision X^T X (or
// X^T X / n) and mean (X^T X)^{-1} X^T y. Throws SingularMatrix when X^T X is
// not invertible.
GaussianPosterior exact_local_posterior(
    const ClientDataset& data, PrecisionScale scale = PrecisionScale::kSum);

// Global posterior mode (sum_i q_i P_i)^{-1} (sum_i q_i P_i mu_i).
ParamVector exact_global_mode(std::span<const GaussianPosterior> posteriors,
                              std::span<const double> weights);

// ---------------------------------------------------------------------------
// Synthetic data.

struct Regression {
  ClientDataset data;
  ParamVector coefficients;
};

// X ~ N(0, 1) i.i.d.; n_informative coefficients uniform in [0, 100), the
// rest zero; y = X w + noise_std * N(0, 1).
Regression make_regression(Index n, Index d, Index n_informative,
                           double noise_std, std::uint64_t seed);

// Least-squares clients sharing a base coefficient vector. heterogeneity
// perturbs each client's coefficients and per-feature scales.
std::vector<ClientDataset> make_federated_regression(
    std::size_t num_clients, Index n_per_client, Index d, double noise_std,
    double heterogeneity, std::uint64_t seed);

// Classification clients drawn from shared class-conditional Gaussians (so a
// single softmax model is Bayes-optimal for every client). Each client's
// label mix is Dirichlet(1 / heterogeneity); heterogeneity = 0 gives uniform
// i.i.d. labels.
std::vector<ClientDataset> make_federated_logistic(
    std::size_t num_clients, Index n_per_client, Index d, int num_classes,
    double heterogeneity, std::uint64_t seed);

// Two 2-D quadratic clients with equal weight and strongly asymmetric
// precisions: the weighted mean of local optima sits far from the global
// optimum.
std::vector<ClientObjective> make_toy2d(double gradient_noise_std);

// Columnar CSV: header x0..x{d-1},y then one row per example.
void write_dataset_csv(const std::string& path, const ClientDataset& data);
ClientDataset read_dataset_csv(const std::string& path, int num_classes = 0);

}  // namespace fedpost

#endif  // FEDPOST_OBJECTIVES_HPP_
