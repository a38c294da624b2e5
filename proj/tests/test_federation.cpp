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
#include <cstdlib>
#include <vector>

#include "doctest.h"
#include "fedpost/federation.hpp"
#include "fedpost/objectives.hpp"
#include "fedpost/sampler.hpp"

using namespace fedpost;

namespace {

ClientObjective quadratic(const ParamVector& mean, const Matrix& precision, double weight = 1.0) {
  return ClientObjective::quadratic({mean, precision}, 0.0, weight);
}

OptimizerConfig sgd(double lr) {
  OptimizerConfig c;
  c.lr = lr;
  return c;
}

ClientUpdateResult result(std::size_t id, ParamVector delta, double weight) {
  ClientUpdateResult r;
  r.client_id = id;
  r.delta = std::move(delta);
  r.weight = weight;
  return r;
}

ParamVector toy_optimum(const std::vector<ClientObjective>& pool) {
  std::vector<GaussianPosterior> posts;
  std::vector<double> w;
  for (const auto& c : pool) {
    posts.push_back(*c.closed_form_posterior());
    w.push_back(c.weight());
  }
  return exact_global_mode(posts, w);
}

}  // namespace

TEST_CASE("fedavg client update examples") {
  const auto half_square = quadratic(ParamVector::Zero(1), Matrix::Identity(1, 1));
  auto r = fedavg_client_update(ParamVector::Ones(1), half_square, sgd(0.5), 2, 0, 1);
  CHECK(r.delta[0] == 0.75);
  CHECK(r.weight == 1.0);

  Rng rng(2);
  const ParamVector mu = standard_normal(3, rng);
  const auto flat_at_mu = quadratic(mu, Matrix::Identity(3, 3));
  r = fedavg_client_update(mu, flat_at_mu, sgd(0.1), 25, 0, 3);
  CHECK(r.delta.isZero(0.0));

  Matrix a = Matrix::Random(3, 3);
  a = a * a.transpose() + Matrix::Identity(3, 3);
  const auto client = quadratic(mu, a);
  const ParamVector theta = standard_normal(3, rng);
  r = fedavg_client_update(theta, client, sgd(0.01), 20000, 0, 4);
  CHECK((r.delta - (theta - mu)).norm() <= 1e-8);

  CHECK_THROWS_AS(fedavg_client_update(ParamVector::Ones(2), half_square, sgd(0.5), 2, 0, 1),
                  InvalidArgument);
  CHECK_THROWS_AS(fedavg_client_update(ParamVector::Ones(1), half_square, sgd(1e200), 50, 0, 1),
                  Divergence);
}

TEST_CASE("fedpa client update reduces to the sample-mean form") {
  const auto reg = ClientObjective::least_squares(make_regression(40, 3, 3, 1.0, 5).data);
  const ParamVector theta = ParamVector::Constant(3, 10.0);
  SamplerConfig s;
  s.burn_in_steps = 5;
  s.steps_per_sample = 7;
  s.batch_size = 4;

  SUBCASE("one sample") {
    s.num_samples = 1;
    ShrinkageConfig shrink;
    shrink.rho = 0.5;
    const auto r = fedpa_client_update(theta, reg, sgd(0.01), s, shrink, 99);
    SamplerConfig replay = s;
    replay.seed = 99;
    Optimizer opt(sgd(0.01), 3);
    const auto xs = iasg_sample(reg, opt, replay, theta);
    CHECK(r.delta == ParamVector(theta - xs[0]));
    REQUIRE(r.diagnostics.has_value());
    CHECK(r.diagnostics->num_samples == 1);
    CHECK(r.diagnostics->ess == 1.0);
    CHECK(r.weight == 40.0);
  }
  SUBCASE("zero shrinkage") {
    s.num_samples = 6;
    ShrinkageConfig shrink;
    shrink.rho = 0.0;
    const auto r = fedpa_client_update(theta, reg, sgd(0.01), s, shrink, 98);
    SamplerConfig replay = s;
    replay.seed = 98;
    Optimizer opt(sgd(0.01), 3);
    const auto xs = iasg_sample(reg, opt, replay, theta);
    ParamVector mean = ParamVector::Zero(3);
    for (const auto& x : xs) mean += x;
    mean /= 6.0;
    CHECK((r.delta - (theta - mean)).cwiseAbs().maxCoeff() <= 1e-12);
    REQUIRE(r.diagnostics->ess.has_value());
    CHECK(*r.diagnostics->ess >= 1.0);
    CHECK(*r.diagnostics->ess <= 6.0);
  }
}

TEST_CASE("exact client hooks") {
  const auto r = make_regression(30, 4, 4, 2.0, 6);
  const auto client = ClientObjective::least_squares(r.data);
  const auto post = exact_local_posterior(r.data, PrecisionScale::kPerExample);
  Rng rng(7);
  const ParamVector theta = standard_normal(4, rng);
  const auto pa = exact_fedpa_client_update(theta, client);
  CHECK((pa.delta - post.precision * (theta - post.mean)).norm() <= 1e-10 * (1 + pa.delta.norm()));
  // Under the per-example scaling the ideal delta is the local gradient.
  CHECK((pa.delta - client.gradient(theta)).norm() <= 1e-9 * (1 + pa.delta.norm()));
  const auto avg = exact_fedavg_client_update(theta, client);
  CHECK((avg.delta - (theta - post.mean)).norm() <= 1e-10 * (1 + avg.delta.norm()));

  const auto logistic =
      ClientObjective::logistic(make_federated_logistic(1, 20, 2, 3, 0.0, 1).front());
  CHECK_THROWS_AS(exact_fedpa_client_update(ParamVector::Zero(logistic.dim()), logistic),
                  InvalidArgument);
}

TEST_CASE("cohort sampling") {
  CHECK(sample_cohort(5, 5, 3, 11) == std::vector<std::size_t>{0, 1, 2, 3, 4});
  CHECK(sample_cohort(20, 6, 4, 11) == sample_cohort(20, 6, 4, 11));
  CHECK(sample_cohort(20, 6, 4, 11) != sample_cohort(20, 6, 5, 11));
  CHECK_THROWS_AS(sample_cohort(3, 4, 1, 0), InvalidArgument);

  const std::size_t n = 10, m = 3, rounds = 100000;
  std::vector<double> hits(n, 0.0);
  for (std::size_t t = 1; t <= rounds; ++t) {
    const auto c = sample_cohort(n, m, t, 12);
    REQUIRE(c.size() == m);
    CHECK(std::is_sorted(c.begin(), c.end()));
    CHECK(std::adjacent_find(c.begin(), c.end()) == c.end());
    for (auto id : c) hits[id] += 1.0;
  }
  const double p = static_cast<double>(m) / n;
  const double se = std::sqrt(p * (1.0 - p) / rounds);
  for (std::size_t i = 0; i < n; ++i) {
    CAPTURE(i);
    CHECK(std::abs(hits[i] / rounds - p) <= 3.0 * se);
  }
}

TEST_CASE("aggregation examples") {
  Rng rng(13);
  const ParamVector d1 = standard_normal(4, rng), d2 = standard_normal(4, rng),
                    d3 = standard_normal(4, rng);
  std::vector<ClientUpdateResult> one{result(7, d1, 3.0)};
  CHECK(aggregate(one) == d1);

  std::vector<ClientUpdateResult> sym{result(0, d1, 2.0), result(1, -d1, 2.0)};
  CHECK(aggregate(sym).isZero(0.0));

  std::vector<ClientUpdateResult> three{result(0, d1, 1.0), result(1, d2, 2.0),
                                        result(2, d3, 1.0)};
  const ParamVector got = aggregate(three);
  for (Index i = 0; i < 4; ++i) {
    CHECK(got[i] == doctest::Approx((d1[i] + 2.0 * d2[i] + d3[i]) / 4.0).epsilon(1e-14));
  }

  std::vector<ClientUpdateResult> empty;
  CHECK_THROWS_AS(aggregate(empty), InvalidArgument);
  std::vector<ClientUpdateResult> mixed{result(0, d1, 1.0), result(1, ParamVector::Zero(2), 1.0)};
  CHECK_THROWS_AS(aggregate(mixed), InvalidArgument);
}

TEST_CASE("aggregation ignores input order") {
  Rng rng(14);
  std::vector<ClientUpdateResult> rs;
  std::uniform_real_distribution<double> w(0.5, 3.0);
  for (std::size_t i = 0; i < 9; ++i) rs.push_back(result(i, standard_normal(5, rng), w(rng)));
  const ParamVector ref = aggregate(rs);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(rs.begin(), rs.end(), rng);
    CHECK(aggregate(rs) == ref);
  }
}

TEST_CASE("zero deltas leave the server unchanged") {
  Rng rng(15);
  const ParamVector mu = standard_normal(3, rng);
  std::vector<ClientObjective> pool;
  for (int i = 0; i < 4; ++i) pool.push_back(quadratic(mu, Matrix::Identity(3, 3)));
  RoundConfig cfg;
  cfg.cohort_size = 2;
  cfg.local_steps = 5;
  cfg.server_opt = sgd(1.0);
  ServerState server(mu, cfg.server_opt);
  for (int t = 0; t < 3; ++t) run_round(server, pool, cfg);
  CHECK(server.theta == mu);
  CHECK(server.round_index == 3);
}

TEST_CASE("exact fedpa on the toy problem reaches the global optimum") {
  const auto pool = make_toy2d(0.0);
  const ParamVector mu = toy_optimum(pool);
  RoundConfig cfg;
  cfg.cohort_size = 2;
  cfg.client_update = ClientUpdateKind::kFedPaExact;
  cfg.server_opt = sgd(1.0);
  ServerState server(ParamVector::Constant(2, 5.0), cfg.server_opt);
  MetricsRecord rec;
  for (int t = 0; t < 200; ++t) rec = run_round(server, pool, cfg, mu);
  REQUIRE(rec.dist_to_optimum.has_value());
  CHECK(*rec.dist_to_optimum <= 1e-6);
  CHECK(rec.round == 200);
}

TEST_CASE("exact fedavg converges to the weighted mean of local optima") {
  const auto pool = make_toy2d(0.0);
  const ParamVector mu = toy_optimum(pool);
  ParamVector weighted = ParamVector::Zero(2);
  double total = 0.0;
  for (const auto& c : pool) {
    weighted += c.weight() * c.closed_form_posterior()->mean;
    total += c.weight();
  }
  weighted /= total;
  RoundConfig cfg;
  cfg.cohort_size = 2;
  cfg.client_update = ClientUpdateKind::kFedAvgExact;
  cfg.server_opt = sgd(0.5);
  ServerState server(ParamVector::Constant(2, -3.0), cfg.server_opt);
  for (int t = 0; t < 100; ++t) run_round(server, pool, cfg, mu);
  CHECK((server.theta - weighted).norm() <= 1e-6);
  CHECK((weighted - mu).norm() > 0.1);
}

TEST_CASE("burn-in rounds run the fedavg form") {
  const auto data = make_federated_regression(6, 30, 4, 1.0, 0.5, 16);
  std::vector<ClientObjective> pool;
  for (const auto& d : data) pool.push_back(ClientObjective::least_squares(d));
  RoundConfig avg;
  avg.cohort_size = 3;
  avg.local_steps = 15;
  avg.batch_size = 5;
  avg.client_opt = sgd(0.02);
  avg.server_opt = sgd(1.0);
  avg.seed = 17;
  avg.sampler.num_samples = 3;
  avg.sampler.steps_per_sample = 5;
  RoundConfig pa = avg;
  pa.client_update = ClientUpdateKind::kFedPa;
  pa.burn_in_rounds = 4;
  ServerState s_avg(ParamVector::Zero(4), avg.server_opt), s_pa(ParamVector::Zero(4), pa.server_opt);
  for (int t = 0; t < 4; ++t) {
    const auto ra = run_round(s_avg, pool, avg);
    const auto rp = run_round(s_pa, pool, pa);
    CHECK(s_avg.theta == s_pa.theta);
    CHECK(ra.eval_loss == rp.eval_loss);
    CHECK_FALSE(rp.mean_client_ess.has_value());
  }
  const auto rp = run_round(s_pa, pool, pa);
  run_round(s_avg, pool, avg);
  CHECK(s_avg.theta != s_pa.theta);
  CHECK(rp.mean_client_ess.has_value());
}

TEST_CASE("rounds are deterministic and independent of the thread count") {
  const auto data = make_federated_logistic(8, 25, 3, 3, 1.0, 18);
  std::vector<ClientObjective> pool;
  for (const auto& d : data) pool.push_back(ClientObjective::logistic(d));
  RoundConfig cfg;
  cfg.cohort_size = 5;
  cfg.local_epochs = 1;
  cfg.batch_size = 5;
  cfg.client_update = ClientUpdateKind::kFedPa;
  cfg.sampler.num_samples = 3;
  cfg.sampler.steps_per_sample = 0;
  cfg.client_opt = sgd(0.1);
  cfg.server_opt = sgd(1.0);
  cfg.seed = 19;
  auto run = [&](std::size_t threads) {
    RoundConfig c = cfg;
    c.threads = threads;
    ServerState s(ParamVector::Zero(pool[0].dim()), c.server_opt);
    std::vector<double> losses;
    for (int t = 0; t < 5; ++t) losses.push_back(run_round(s, pool, c).eval_loss);
    return std::make_pair(s.theta, losses);
  };
  const auto a = run(1), b = run(1), c = run(4);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first == c.first);
  CHECK(a.second == c.second);
}

TEST_CASE("client failure aborts the round without touching the server") {
  std::vector<ClientObjective> pool;
  pool.push_back(quadratic(ParamVector::Zero(2), Matrix::Identity(2, 2)));
  pool.push_back(quadratic(ParamVector::Zero(2), 1e300 * Matrix::Identity(2, 2)));
  RoundConfig cfg;
  cfg.cohort_size = 2;
  cfg.local_steps = 50;
  cfg.client_opt = sgd(1.0);
  ServerState server(ParamVector::Ones(2), cfg.server_opt);
  try {
    run_round(server, pool, cfg);
    FAIL("expected divergence");
  } catch (const Divergence& e) {
    CHECK(std::string(e.what()).find("client 1") != std::string::npos);
  }
  CHECK(server.theta == ParamVector(ParamVector::Ones(2)));
  CHECK(server.round_index == 0);
}

TEST_CASE("evaluation weights clients by size") {
  std::vector<ClientObjective> pool;
  pool.push_back(quadratic(ParamVector::Zero(1), Matrix::Identity(1, 1), 1.0));
  pool.push_back(quadratic(ParamVector::Constant(1, 2.0), Matrix::Identity(1, 1), 3.0));
  const auto rec = evaluate(ParamVector::Zero(1), pool, ParamVector::Constant(1, 1.5));
  CHECK(rec.eval_loss == doctest::Approx(0.75 * 2.0).epsilon(1e-15));
  CHECK(*rec.dist_to_optimum == 1.5);
  CHECK_FALSE(rec.eval_accuracy.has_value());
}

TEST_CASE("thread count resolution") {
  CHECK(resolve_threads(3) == 3);
  ::setenv("FEDPOST_THREADS", "2", 1);
  CHECK(resolve_threads(3) == 2);
  CHECK(resolve_threads(1) == 1);
  CHECK(resolve_threads(0) <= 2);
  ::unsetenv("FEDPOST_THREADS");
}
