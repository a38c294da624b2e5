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

#include <cmath>
#include <limits>

#include "fedpost/analysis.hpp"
#include "fedpost/random.hpp"

namespace fedpost {

OracleCase oracle_case_params(const OracleCheckOptions& opts, std::uint64_t case_seed) {
  if (opts.max_dim < 1 || opts.max_samples < 1 || opts.rhos.empty()) {
    throw InvalidArgument("oracle check: max_dim, max_samples and rhos must be non-empty");
  }
  Rng rng(case_seed);
  OracleCase c;
  c.seed = case_seed;
  c.dim = std::uniform_int_distribution<Index>(1, opts.max_dim)(rng);
  c.num_samples = std::uniform_int_distribution<std::size_t>(1, opts.max_samples)(rng);
  c.rho = opts.rhos[std::uniform_int_distribution<std::size_t>(0, opts.rhos.size() - 1)(rng)];
  return c;
}

void make_oracle_case(const OracleCase& c, std::vector<ParamVector>& samples,
                      ParamVector& theta0) {
  Rng rng(mix64(c.seed ^ 0x5eed5eedULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  // Anisotropic cloud around a random centre; theta0 at a comparable offset.
  const ParamVector centre = 2.0 * standard_normal(c.dim, rng);
  ParamVector scale(c.dim);
  for (Index j = 0; j < c.dim; ++j) scale[j] = std::exp(normal(rng));
  theta0 = centre + 3.0 * standard_normal(c.dim, rng);
  samples.clear();
  for (std::size_t t = 0; t < c.num_samples; ++t) {
    samples.push_back(centre + scale.cwiseProduct(standard_normal(c.dim, rng)));
  }
}

OracleCheckReport run_oracle_check(const OracleCheckOptions& opts, const DeltaFunction& delta) {
  OracleCheckReport report;
  report.num_cases = opts.num_cases;
  std::vector<ParamVector> samples;
  ParamVector theta0;
  for (std::size_t i = 0; i < opts.num_cases; ++i) {
    const OracleCase c = oracle_case_params(opts, derive_seed(opts.seed, {i}));
    make_oracle_case(c, samples, theta0);
    ShrinkageConfig cfg;
    cfg.rho = c.rho;
    double err = std::numeric_limits<double>::infinity();
    try {
      const ParamVector dense = dense_delta_oracle(samples, theta0, c.rho);
      const ParamVector got = delta ? delta(samples, theta0, cfg) : dp_delta(samples, theta0, cfg);
      if (got.size() == dense.size() && got.allFinite()) {
        err = (got - dense).norm() / (1.0 + dense.norm());
      }
    } catch (const Error&) {
      // counted as a failure below
    }
    report.max_rel_error = std::max(report.max_rel_error, err);
    if (!(err <= opts.tolerance)) report.failures.push_back(c);
  }
  return report;
}

}  // namespace fedpost
