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

#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedpost/analysis.hpp"
#include "fedpost/posterior_delta.hpp"

using namespace fedpost;

namespace {

BiasVarianceOptions small_bias_variance() {
  BiasVarianceOptions o;
  o.num_problems = 2;
  o.num_inits = 2;
  o.repeats = 4;
  o.num_examples = 100;
  o.local_steps_grid = {5, 50};
  o.samples_grid = {2, 5};
  o.shrinkage_grid = {0.0, 0.1};
  o.num_samples = 5;
  o.burn_in_steps = 20;
  o.seed = 7;
  return o;
}

template <class Rows, class Writer>
std::string to_csv(const Rows& rows, Writer write) {
  std::ostringstream out;
  write(out, rows);
  return out.str();
}

std::string bv_csv(const std::vector<BiasVarianceRow>& rows) {
  return to_csv(rows, [](std::ostream& o, const auto& r) { write_bias_variance_csv(o, r); });
}

}  // namespace

TEST_CASE("exact sampling has no bias and no variance") {
  auto o = small_bias_variance();
  o.sampling = FedPaSampling::kExact;
  o.local_steps_grid.clear();
  const auto rows = bias_variance_sweep(o);
  REQUIRE(rows.size() == 4);
  for (const auto& r : rows) {
    CHECK(r.method == "fedpa");
    CHECK(r.bias_l2 <= 1e-9);
    CHECK(r.cov_fro <= 1e-9);
  }
}

TEST_CASE("bias variance rows and determinism") {
  auto o = small_bias_variance();
  const auto a = bias_variance_sweep(o);
  REQUIRE(a.size() == 6);
  CHECK(a[0].method == "fedavg");
  CHECK(a[0].sweep_var == "local_steps");
  CHECK(a[2].sweep_var == "samples");
  CHECK(a[4].sweep_var == "shrinkage");
  for (const auto& r : a) {
    CHECK(r.bias_l2 >= 0.0);
    CHECK(r.cov_fro >= 0.0);
    CHECK(r.dim == 10);
    CHECK(r.cell_bias.size() == 4);
  }
  o.threads = 1;
  const auto b = bias_variance_sweep(o);
  o.threads = 3;
  const auto c = bias_variance_sweep(o);
  CHECK(bv_csv(a) == bv_csv(b));
  CHECK(bv_csv(a) == bv_csv(c));
}

TEST_CASE("single-sample fedpa bias does not depend on shrinkage") {
  auto o = small_bias_variance();
  o.local_steps_grid.clear();
  o.samples_grid.clear();
  o.num_samples = 1;
  o.shrinkage_grid = {0.0, 0.01, 1.0};
  const auto rows = bias_variance_sweep(o);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].bias_l2 == rows[0].bias_l2);
  CHECK(rows[2].bias_l2 == rows[0].bias_l2);
  CHECK(rows[1].cov_fro == rows[0].cov_fro);
}

TEST_CASE("empty grids give header-only csv") {
  auto o = small_bias_variance();
  o.local_steps_grid.clear();
  o.samples_grid.clear();
  o.shrinkage_grid.clear();
  CHECK(bv_csv(bias_variance_sweep(o)) == "method,sweep_var,value,bias_l2,cov_fro,d\n");

  EssOptions e;
  e.dims.clear();
  const auto ess_rows = ess_sweep(e);
  CHECK(to_csv(ess_rows, [](std::ostream& s, const auto& r) { write_ess_csv(s, r); }) ==
        "d,burn_in,steps_per_sample,lr,ess\n");

  TimingOptions t;
  t.dims.clear();
  const auto timing_rows = timing_sweep(t);
  CHECK(to_csv(timing_rows, [](std::ostream& s, const auto& r) { write_timing_csv(s, r); }) ==
        "dim,method,ms\n");
}

TEST_CASE("ess sweep") {
  EssOptions e;
  e.dims = {5};
  e.num_problems = 3;
  e.num_examples = 100;
  e.num_samples = 6;
  e.burn_in_grid = {0, 20};
  e.steps_per_sample_grid = {1, 10};
  e.seed = 3;
  const auto a = ess_sweep(e);
  REQUIRE(a.size() == 4);
  for (const auto& r : a) {
    REQUIRE(r.ess.has_value());
    CHECK(*r.ess >= 1.0);
    CHECK(*r.ess <= 6.0);
  }
  const auto b = ess_sweep(e);
  const auto csv = [](const auto& rows) {
    return to_csv(rows, [](std::ostream& s, const auto& r) { write_ess_csv(s, r); });
  };
  CHECK(csv(a) == csv(b));

  e.lr_grid = {1e6};
  for (const auto& r : ess_sweep(e)) CHECK_FALSE(r.ess.has_value());
}

TEST_CASE("timing sweep skips dense cells over the memory cap") {
  TimingOptions t;
  t.dims = {10, 40};
  t.repeats = 5;
  t.warmup = 0;
  t.memory_cap_bytes = 40 * 40 * 8 - 1;
  const auto rows = timing_sweep(t);
  REQUIRE(rows.size() == 6);
  for (const auto& r : rows) {
    if (r.method == "dense_delta" && r.dim == 40) {
      CHECK_FALSE(r.ms.has_value());
    } else {
      REQUIRE(r.ms.has_value());
      CHECK(*r.ms >= 0.0);
    }
  }
}

TEST_CASE("trend checks on fabricated tables") {
  std::vector<TimingRow> good{
      {100, "fedavg_delta", 1.0},   {100, "dp_delta", 1.3},     {100, "dense_delta", 1.0},
      {1000, "fedavg_delta", 10.0}, {1000, "dp_delta", 11.0},   {1000, "dense_delta", 50.0},
      {10000, "fedavg_delta", 100}, {10000, "dp_delta", 104.0}, {10000, "dense_delta", 5000.0}};
  for (const auto& c : timing_trends(good)) {
    CAPTURE(c.name);
    CHECK(c.passed);
  }
  auto bad = good;
  bad[4].ms = 14.0;    // overhead rises from 0.3 to 0.4
  bad[8].ms = 400.0;  // dense ratio 8 < 10
  std::size_t failed = 0;
  for (const auto& c : timing_trends(bad)) failed += c.passed ? 0 : 1;
  CHECK(failed == 2);

  BiasVarianceRow up{"fedavg", "local_steps", 10, 1.0, 0, 10, {1.0}};
  BiasVarianceRow up2{"fedavg", "local_steps", 100, 2.0, 0, 10, {2.0}};
  BiasVarianceRow down{"fedpa", "samples", 2, 3.0, 0, 10, {3.0}};
  BiasVarianceRow down2{"fedpa", "samples", 10, 1.0, 0, 10, {1.0}};
  std::vector<BiasVarianceRow> rows{up, up2, down, down2};
  for (const auto& c : bias_variance_trends(rows)) CHECK(c.passed);
  std::swap(rows[0].bias_l2, rows[1].bias_l2);
  std::swap(rows[0].cell_bias, rows[1].cell_bias);
  CHECK_FALSE(bias_variance_trends(rows)[0].passed);
}

TEST_CASE("oracle check") {
  OracleCheckOptions o;
  o.num_cases = 60;
  o.max_dim = 40;
  o.max_samples = 12;
  o.seed = 4;
  const auto ok = run_oracle_check(o);
  CHECK(ok.passed());
  CHECK(ok.num_cases == 60);
  CHECK(ok.max_rel_error <= 1e-8);

  // Single-sample cases are exact.
  o.max_samples = 1;
  const auto single = run_oracle_check(o);
  CHECK(single.passed());
  CHECK(single.max_rel_error == 0.0);

  // A biased estimator fails, and each failing seed rebuilds its case.
  o.max_samples = 12;
  const DeltaFunction biased = [](std::span<const ParamVector> xs, const ParamVector& theta0,
                                  const ShrinkageConfig& cfg) {
    ParamVector d = dp_delta(xs, theta0, cfg);
    d[0] += 1e-4 * (1.0 + d.norm());
    return d;
  };
  const auto bad = run_oracle_check(o, biased);
  CHECK_FALSE(bad.passed());
  CHECK(bad.failures.size() == 60);
  for (const auto& f : bad.failures) {
    const auto again = oracle_case_params(o, f.seed);
    CHECK(again.dim == f.dim);
    CHECK(again.num_samples == f.num_samples);
    CHECK(again.rho == f.rho);
    CHECK(again.dim <= 40);
    CHECK(again.num_samples <= 12);
  }
  std::vector<ParamVector> xs;
  ParamVector theta0;
  make_oracle_case(bad.failures.front(), xs, theta0);
  CHECK(xs.size() == bad.failures.front().num_samples);
  CHECK(theta0.size() == bad.failures.front().dim);

  const DeltaFunction throws = [](std::span<const ParamVector>, const ParamVector&,
                                  const ShrinkageConfig&) -> ParamVector {
    throw SingularUpdate("forced");
  };
  o.num_cases = 5;
  CHECK(run_oracle_check(o, throws).failures.size() == 5);
}
