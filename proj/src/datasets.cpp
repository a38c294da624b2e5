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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "fedpost/csv.hpp"
#include "fedpost/objectives.hpp"

namespace fedpost {

namespace {

RowMatrix standard_normal_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = normal(rng);
  }
  return m;
}

ParamVector sparse_coefficients(Index d, Index n_informative, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(d));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  std::uniform_real_distribution<double> unif(0.0, 100.0);
  ParamVector w = ParamVector::Zero(d);
  for (Index k = 0; k < n_informative; ++k) w[idx[static_cast<std::size_t>(k)]] = unif(rng);
  return w;
}

}  // namespace

Regression make_regression(Index n, Index d, Index n_informative,
                           double noise_std, std::uint64_t seed) {
  if (n < 1 || d < 1 || n_informative < 1 || n_informative > d ||
      !(noise_std >= 0.0)) {
    throw InvalidArgument("make_regression: invalid sizes or noise");
  }
  Rng rng(seed);
  Regression out;
  out.data.features = standard_normal_matrix(n, d, rng);
  out.coefficients = sparse_coefficients(d, n_informative, rng);
  out.data.targets = out.data.features * out.coefficients;
  if (noise_std > 0.0) out.data.targets += noise_std * standard_normal(n, rng);
  out.data.weight = static_cast<double>(n);
  return out;
}

std::vector<ClientDataset> make_federated_regression(
    std::size_t num_clients, Index n_per_client, Index d, double noise_std,
    double heterogeneity, std::uint64_t seed) {
  if (num_clients < 1 || n_per_client < 1 || d < 1 || !(noise_std >= 0.0) ||
      !(heterogeneity >= 0.0)) {
    throw InvalidArgument("make_federated_regression: invalid arguments");
  }
  Rng base_rng(derive_seed(seed, {0}));
  const ParamVector base = sparse_coefficients(d, d, base_rng);
  std::vector<ClientDataset> clients;
  clients.reserve(num_clients);
  for (std::size_t i = 0; i < num_clients; ++i) {
    Rng rng(derive_seed(seed, {1, i}));
    ClientDataset ds;
    ds.features = standard_normal_matrix(n_per_client, d, rng);
    const ParamVector log_scale = heterogeneity * standard_normal(d, rng);
    for (Index j = 0; j < d; ++j) ds.features.col(j) *= std::exp(log_scale[j]);
    const ParamVector w = base + (10.0 * heterogeneity) * standard_normal(d, rng);
    ds.targets = ds.features * w;
    if (noise_std > 0.0) ds.targets += noise_std * standard_normal(n_per_client, rng);
    ds.weight = static_cast<double>(n_per_client);
    clients.push_back(std::move(ds));
  }
  return clients;
}

std::vector<ClientDataset> make_federated_logistic(
    std::size_t num_clients, Index n_per_client, Index d, int num_classes,
    double heterogeneity, std::uint64_t seed) {
  if (num_clients < 1 || n_per_client < 1 || d < 1 || num_classes < 2 ||
      !(heterogeneity >= 0.0)) {
    throw InvalidArgument("make_federated_logistic: invalid arguments");
  }
  // Class-conditional Gaussians N(m_c, I) share one covariance, so the
  // Bayes-optimal classifier is the softmax model W_c = m_c,
  // b_c = -|m_c|^2 / 2 + log prior_c for every client.
  Rng base_rng(derive_seed(seed, {0}));
  const RowMatrix class_means =
      0.5 * standard_normal_matrix(num_classes, d, base_rng);

  std::vector<ClientDataset> clients;
  clients.reserve(num_clients);
  for (std::size_t i = 0; i < num_clients; ++i) {
    Rng rng(derive_seed(seed, {1, i}));
    std::vector<double> label_probs(static_cast<std::size_t>(num_classes),
                                    1.0 / num_classes);
    if (heterogeneity > 0.0) {
      std::gamma_distribution<double> gamma(1.0 / heterogeneity, 1.0);
      double total = 0.0;
      for (double& p : label_probs) total += (p = gamma(rng));
      if (total > 0.0) {
        for (double& p : label_probs) p /= total;
      } else {
        std::fill(label_probs.begin(), label_probs.end(), 1.0 / num_classes);
      }
    }
    std::discrete_distribution<int> label_dist(label_probs.begin(), label_probs.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    ClientDataset ds;
    ds.num_classes = num_classes;
    ds.features.resize(n_per_client, d);
    ds.targets.resize(n_per_client);
    for (Index j = 0; j < n_per_client; ++j) {
      const int y = label_dist(rng);
      ds.targets[j] = y;
      for (Index k = 0; k < d; ++k) ds.features(j, k) = class_means(y, k) + normal(rng);
    }
    ds.weight = static_cast<double>(n_per_client);
    clients.push_back(std::move(ds));
  }
  return clients;
}

std::vector<ClientObjective> make_toy2d(double gradient_noise_std) {
  auto rotated = [](double degrees, double e1, double e2) {
    const double a = degrees * 3.14159265358979323846 / 180.0;
    Eigen::Matrix2d r;
    r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return Matrix(r * Eigen::Vector2d(e1, e2).asDiagonal() * r.transpose());
  };
  GaussianPosterior a{Eigen::Vector2d(-2.0, 2.0), rotated(30.0, 1.8, 0.2)};
  GaussianPosterior b{Eigen::Vector2d(2.0, 2.0), rotated(-30.0, 1.8, 0.2)};
  std::vector<ClientObjective> clients;
  clients.push_back(ClientObjective::quadratic(std::move(a), gradient_noise_std));
  clients.push_back(ClientObjective::quadratic(std::move(b), gradient_noise_std));
  return clients;
}

void write_dataset_csv(const std::string& path, const ClientDataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const Index d = data.num_features();
  for (Index j = 0; j < d; ++j) out << 'x' << j << ',';
  out << "y\n";
  for (Index i = 0; i < data.num_examples(); ++i) {
    for (Index j = 0; j < d; ++j) out << format_double(data.features(i, j)) << ',';
    out << format_double(data.targets[i]) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

ClientDataset read_dataset_csv(const std::string& path, int num_classes) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": missing header");
  const std::size_t cols = split(trim(line), ',').size();
  if (cols < 2) throw IoError(path + ": need at least one feature column");
  const Index d = static_cast<Index>(cols - 1);

  std::vector<double> values;
  Index rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(trim(line), ',');
    if (fields.size() != cols) {
      throw IoError(path + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(cols) + " fields");
    }
    for (auto f : fields) {
      const auto v = parse_double(trim(f));
      if (!v) throw IoError(path + ":" + std::to_string(line_no) + ": bad number");
      values.push_back(*v);
    }
    ++rows;
  }
  ClientDataset ds;
  ds.num_classes = num_classes;
  ds.features.resize(rows, d);
  ds.targets.resize(rows);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < d; ++j) ds.features(i, j) = values[static_cast<std::size_t>(i * (d + 1) + j)];
    ds.targets[i] = values[static_cast<std::size_t>(i * (d + 1) + d)];
  }
  ds.weight = static_cast<double>(std::max<Index>(rows, 1));
  return ds;
}

}  // namespace fedpost
