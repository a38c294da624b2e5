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

#include <chrono>
#include <vector>

#include "doctest.h"
#include "fedpost/posterior_delta.hpp"
#include "fedpost/stats.hpp"
#include "json.hpp"
#include "test_util.hpp"

using namespace fedpost;
using fedpost::testing::gaussian_samples;
using fedpost::testing::rel_err;
using fedpost::testing::textbook_delta;

namespace {

ParamVector vec(std::initializer_list<double> v) {
  ParamVector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ShrinkageConfig shrink(double rho) {
  ShrinkageConfig c;
  c.rho = rho;
  return c;
}

}  // namespace

TEST_CASE("shrinkage weight examples") {
  CHECK(shrinkage_weight(1, 0.7) == 1.0);
  CHECK(shrinkage_weight(5, 0.0) == 1.0);
  CHECK(shrinkage_weight(2, 1.0) == 0.5);
  CHECK_THROWS_AS(shrinkage_weight(0, 0.1), InvalidArgument);
  CHECK_THROWS_AS(shrinkage_weight(3, -0.1), InvalidArgument);
  for (std::size_t t = 1; t < 20; ++t) {
    CHECK(shrinkage_weight(t + 1, 0.3) < shrinkage_weight(t, 0.3));
  }
}

TEST_CASE("init examples") {
  SUBCASE("theta0 equal to first sample gives zero") {
    DeltaState s(vec({1, 2, 3}), vec({1, 2, 3}), shrink(0.1));
    CHECK(s.delta_tilde().isZero(0.0));
    CHECK(s.num_samples() == 1);
    CHECK(s.history().empty());
  }
  SUBCASE("one dimension") {
    DeltaState s(vec({3}), vec({1}), shrink(0.5));
    CHECK(s.delta_tilde()[0] == 2.0);
    CHECK(s.finalize()[0] == 2.0);
  }
  SUBCASE("two dimensions") {
    DeltaState s(vec({1, 0}), vec({0, 1}), shrink(0.5));
    CHECK(s.delta_tilde() == vec({1, -1}));
  }
  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(DeltaState(vec({1, 0}), vec({1}), shrink(0.1)), InvalidArgument);
  }
  SUBCASE("non-finite input") {
    CHECK_THROWS_AS(DeltaState(vec({1, 0}), vec({1, NAN}), shrink(0.1)), InvalidArgument);
  }
}

TEST_CASE("update with the current mean adds nothing") {
  Rng rng(3);
  auto xs = gaussian_samples(4, 3, rng);
  DeltaState s(standard_normal(4, rng), xs[0], shrink(0.2));
  s.update(xs[1]);
  s.update(xs[2]);
  const ParamVector before = s.delta_tilde();
  const ParamVector mean = s.mean();
  s.update(mean);
  CHECK(s.history().back().v.isZero(0.0));
  CHECK(s.mean() == mean);
  // t grows, so delta_tilde is rescaled by the (1/t) terms only through v = 0.
  CHECK(s.delta_tilde() == before);
}

TEST_CASE("rho zero returns theta0 minus the running mean exactly") {
  Rng rng(5);
  auto xs = gaussian_samples(6, 9, rng);
  const ParamVector theta0 = standard_normal(6, rng);
  DeltaState s(theta0, xs[0], shrink(0.0));
  for (std::size_t t = 1; t < xs.size(); ++t) {
    s.update(xs[t]);
    CHECK(s.finalize() == ParamVector(theta0 - s.mean()));
  }
}

TEST_CASE("finalize matches the textbook oracle") {
  SUBCASE("d = 5, l = 3, rho = 0.1") {
    Rng rng(11);
    auto xs = gaussian_samples(5, 3, rng);
    const ParamVector theta0 = standard_normal(5, rng);
    CHECK(rel_err(dp_delta(xs, theta0, shrink(0.1)), textbook_delta(xs, theta0, 0.1)) <= 1e-10);
  }
  SUBCASE("d = 10, l = 7, rho = 0.05") {
    Rng rng(12);
    auto xs = gaussian_samples(10, 7, rng);
    const ParamVector theta0 = standard_normal(10, rng);
    CHECK(rel_err(dp_delta(xs, theta0, shrink(0.05)), textbook_delta(xs, theta0, 0.05)) <= 1e-10);
  }
}

TEST_CASE("dense oracle agrees with the textbook oracle and the DP") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Index d = std::uniform_int_distribution<Index>(1, 30)(rng);
    const std::size_t l = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    const double rho = std::vector<double>{0.0, 1e-3, 1e-2, 0.1, 1.0}[trial % 5];
    auto xs = gaussian_samples(d, l, rng, 2.0);
    const ParamVector theta0 = standard_normal(d, rng);
    const ParamVector dense = dense_delta_oracle(xs, theta0, rho);
    CHECK(rel_err(dense, textbook_delta(xs, theta0, rho)) <= 1e-10);
    CHECK(rel_err(dp_delta(xs, theta0, shrink(rho)), dense) <= 1e-10);
  }
}

TEST_CASE("dense oracle degenerate cases") {
  Rng rng(17);
  const ParamVector theta0 = standard_normal(4, rng);
  const ParamVector x = standard_normal(4, rng);
  CHECK(dense_delta_oracle(std::vector<ParamVector>{x}, theta0, 0.3) == ParamVector(theta0 - x));
  // Zero sample covariance leaves only the scaled identity term.
  const std::vector<ParamVector> same(5, x);
  const ParamVector scaled = (theta0 - x) / shrinkage_weight(5, 0.3);
  CHECK(rel_err(dense_delta_oracle(same, theta0, 0.3), scaled) <= 1e-15);
  CHECK(rel_err(dp_delta(same, theta0, shrink(0.3)), scaled) <= 1e-15);
  CHECK(dense_delta_oracle(same, theta0, 0.0) == ParamVector(theta0 - x));
  CHECK_THROWS_AS(dense_delta_oracle(std::vector<ParamVector>{}, theta0, 0.3), InvalidArgument);
}

TEST_CASE("unnormalised covariance follows the rank-one recursion") {
  Rng rng(19);
  for (Index d : {1, 3, 8, 20}) {
    const double rho = 0.3;
    auto xs = gaussian_samples(d, 10, rng);
    auto sigma_tilde = [&](std::size_t t) {
      // I + rho (t - 1) S_t from the first t samples.
      ParamVector mean = ParamVector::Zero(d);
      for (std::size_t j = 0; j < t; ++j) mean += xs[j];
      mean /= static_cast<double>(t);
      Matrix s = Matrix::Zero(d, d);
      for (std::size_t j = 0; j < t; ++j) s += (xs[j] - mean) * (xs[j] - mean).transpose();
      if (t > 1) s /= static_cast<double>(t - 1);
      return Matrix(Matrix::Identity(d, d) + rho * static_cast<double>(t - 1) * s);
    };
    DeltaState state(ParamVector::Zero(d), xs[0], shrink(rho));
    for (std::size_t t = 2; t <= 10; ++t) {
      const ParamVector u = xs[t - 1] - state.mean();
      const double gamma = rho * static_cast<double>(t - 1) / static_cast<double>(t);
      const Matrix lhs = sigma_tilde(t);
      const Matrix rhs = sigma_tilde(t - 1) + gamma * u * u.transpose();
      CHECK((lhs - rhs).norm() <= 1e-10 * (1.0 + lhs.norm()));
      // The cached v is Sigma_tilde_{t-1}^{-1} u.
      state.update(xs[t - 1]);
      const ParamVector v_ref = sigma_tilde(t - 1).colPivHouseholderQr().solve(u);
      CHECK(rel_err(state.history().back().v, v_ref) <= 1e-10);
      CHECK(state.history().back().gamma == doctest::Approx(gamma).epsilon(1e-15));
      CHECK(state.history().back().denom == doctest::Approx(1.0 + gamma * u.dot(v_ref)));
    }
  }
}

TEST_CASE("any-time consistency is bit-exact") {
  Rng rng(23);
  auto xs = gaussian_samples(12, 15, rng);
  const ParamVector theta0 = standard_normal(12, rng);
  DeltaState full(theta0, xs[0], shrink(0.05));
  std::vector<ParamVector> along{full.finalize()};
  for (std::size_t t = 1; t < xs.size(); ++t) {
    full.update(xs[t]);
    along.push_back(full.finalize());
  }
  for (std::size_t t = 1; t <= xs.size(); ++t) {
    const ParamVector fresh =
        dp_delta(std::span<const ParamVector>(xs.data(), t), theta0, shrink(0.05));
    CHECK(fresh == along[t - 1]);
  }
}

TEST_CASE("running mean matches the arithmetic mean") {
  Rng rng(29);
  auto xs = gaussian_samples(7, 40, rng, 10.0);
  DeltaState s(ParamVector::Zero(7), xs[0], shrink(0.01));
  ParamVector sum = xs[0];
  for (std::size_t t = 1; t < xs.size(); ++t) {
    s.update(xs[t]);
    sum += xs[t];
    CHECK((s.mean() - sum / static_cast<double>(t + 1)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(s.history().size() == t);
  }
}

TEST_CASE("failed update leaves the state unchanged") {
  Rng rng(31);
  auto xs = gaussian_samples(3, 3, rng);
  ShrinkageConfig cfg = shrink(0.5);
  cfg.epsilon_denom = 1e300;  // every denominator is rejected
  DeltaState s(ParamVector::Zero(3), xs[0], cfg);
  const std::string before = s.to_json();
  CHECK_THROWS_AS(s.update(xs[1]), SingularUpdate);
  CHECK(s.to_json() == before);
  CHECK_THROWS_AS(s.update(ParamVector::Zero(4)), InvalidArgument);
  CHECK_THROWS_AS(s.update(ParamVector::Constant(3, INFINITY)), InvalidArgument);
  CHECK(s.to_json() == before);
}

TEST_CASE("json dump carries the state fields") {
  Rng rng(37);
  auto xs = gaussian_samples(2, 3, rng);
  DeltaState s(ParamVector::Ones(2), xs[0], shrink(0.1));
  s.update(xs[1]);
  s.update(xs[2]);
  const auto j = nlohmann::json::parse(s.to_json());
  CHECK(j.at("dim") == 2);
  CHECK(j.at("t") == 3);
  CHECK(j.at("rho") == 0.1);
  CHECK(j.at("theta0").size() == 2);
  CHECK(j.at("mean").size() == 2);
  CHECK(j.at("delta_tilde").size() == 2);
  CHECK(j.at("history").size() == 2);
  CHECK(j.at("history")[0].contains("v"));
  CHECK(j.at("history")[0].contains("gamma"));
  CHECK(j.at("history")[0].contains("denom"));
}

TEST_CASE("single sample is the identity-covariance delta") {
  Rng rng(41);
  const ParamVector theta0 = standard_normal(5, rng);
  const ParamVector x = standard_normal(5, rng);
  for (double rho : {0.0, 0.01, 1.0}) {
    CHECK(dp_delta(std::vector<ParamVector>{x}, theta0, shrink(rho)) == ParamVector(theta0 - x));
  }
}

TEST_CASE("update cost is linear in the dimension") {
  const std::size_t ell = 10;
  std::vector<double> dims, ms;
  for (Index d : {100, 1000, 10000, 100000}) {
    Rng rng(43);
    auto xs = gaussian_samples(d, ell, rng);
    const ParamVector theta0 = standard_normal(d, rng);
    std::vector<double> reps;
    for (int r = 0; r < 7; ++r) {
      const auto start = std::chrono::steady_clock::now();
      const ParamVector out = dp_delta(xs, theta0, shrink(0.01));
      const auto stop = std::chrono::steady_clock::now();
      REQUIRE(out.allFinite());
      reps.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    }
    dims.push_back(static_cast<double>(d));
    ms.push_back(stats::median(reps));
  }
  const auto fit = stats::linear_fit(dims, ms);
  INFO("ms per size: " << ms[0] << " " << ms[1] << " " << ms[2] << " " << ms[3]);
  CHECK(fit.r_squared >= 0.9);
}
