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

#include "fedpost/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "fedpost/csv.hpp"
#include "fedpost/federation.hpp"
#include "fedpost/objectives.hpp"
#include "fedpost/random.hpp"
#include "fedpost/sampler.hpp"
#include "fedpost/stats.hpp"
#include "parallel.hpp"

namespace fedpost {

namespace {

// Stream tags keep the seeds of different sweep components disjoint.
enum : std::uint64_t {
  kProblemStream = 1,
  kInitStream,
  kRepeatStream,
  kEssStream,
  kTimingStream,
};

struct MeanCov {
  double bias = 0.0;
  double fro = 0.0;
};

// Bias of the mean estimate against `target` and Frobenius norm of the
// unbiased covariance (zero for a single estimate).
MeanCov summarize(const std::vector<ParamVector>& estimates, const ParamVector& target) {
  const Index d = target.size();
  ParamVector mean = ParamVector::Zero(d);
  for (const auto& e : estimates) mean += e;
  mean /= static_cast<double>(estimates.size());
  MeanCov out;
  out.bias = (mean - target).norm();
  if (estimates.size() > 1) {
    Matrix cov = Matrix::Zero(d, d);
    for (const auto& e : estimates) {
      const ParamVector c = e - mean;
      cov.selfadjointView<Eigen::Lower>().rankUpdate(c);
    }
    cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();
    cov /= static_cast<double>(estimates.size() - 1);
    out.fro = cov.norm();
  }
  return out;
}

OptimizerConfig sgd(double lr) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kSgd;
  cfg.lr = lr;
  return cfg;
}

std::size_t max_of(const std::vector<std::size_t>& v) {
  return v.empty() ? 0 : *std::max_element(v.begin(), v.end());
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<BiasVarianceRow> bias_variance_sweep(const BiasVarianceOptions& opts) {
  if (opts.num_problems == 0 || opts.num_inits == 0 || opts.repeats == 0) {
    throw InvalidArgument("bias_variance_sweep: problems, inits and repeats must be >= 1");
  }
  if (!(opts.noise_std > 0.0)) throw InvalidArgument("bias_variance_sweep: noise_std must be > 0");
  for (std::size_t s : opts.samples_grid) {
    if (s == 0) throw InvalidArgument("bias_variance_sweep: samples grid values must be >= 1");
  }

  struct Column {
    std::string method, sweep_var;
    double value;
  };
  std::vector<Column> columns;
  for (std::size_t k : opts.local_steps_grid) {
    columns.push_back({"fedavg", "local_steps", static_cast<double>(k)});
  }
  for (std::size_t s : opts.samples_grid) {
    columns.push_back({"fedpa", "samples", static_cast<double>(s)});
  }
  for (double r : opts.shrinkage_grid) columns.push_back({"fedpa", "shrinkage", r});
  if (columns.empty()) return {};

  const std::size_t num_cells = opts.num_problems * opts.num_inits;
  // results[cell][column]
  std::vector<std::vector<MeanCov>> results(num_cells);

  // Problems are shared by all inits; build them up front.
  std::vector<ClientObjective> objectives;
  std::vector<GaussianPosterior> posteriors;
  for (std::size_t p = 0; p < opts.num_problems; ++p) {
    Regression reg = make_regression(opts.num_examples, opts.dim, opts.dim, opts.noise_std,
                                     derive_seed(opts.seed, {kProblemStream, p}));
    GaussianPosterior post = exact_local_posterior(reg.data, PrecisionScale::kSum);
    post.precision /= opts.noise_std * opts.noise_std;
    posteriors.push_back(std::move(post));
    objectives.push_back(ClientObjective::least_squares(std::move(reg.data)));
  }

  const std::size_t steps_per_sample =
      opts.steps_per_sample > 0
          ? opts.steps_per_sample
          : (opts.batch_size == 0
                 ? 1
                 : (static_cast<std::size_t>(opts.num_examples) + opts.batch_size - 1) /
                       opts.batch_size);

  detail::parallel_for(num_cells, resolve_threads(opts.threads), [&](std::size_t cell) {
    const std::size_t p = cell / opts.num_inits;
    const std::size_t i = cell % opts.num_inits;
    const ClientObjective& obj = objectives[p];
    const GaussianPosterior& post = posteriors[p];
    Rng init_rng(derive_seed(opts.seed, {kInitStream, p, i}));
    const ParamVector theta0 = opts.init_std * standard_normal(opts.dim, init_rng);
    const ParamVector exact = post.precision * (theta0 - post.mean);

    // estimates[column][repeat]
    std::vector<std::vector<ParamVector>> estimates(columns.size());
    for (std::size_t r = 0; r < opts.repeats; ++r) {
      const std::uint64_t seed = derive_seed(opts.seed, {kRepeatStream, p, i, r});
      std::size_t col = 0;

      // FedAvg: one trajectory, snapshots at every grid K. A prefix of the
      // stream is exactly the K-step client update with the same seed.
      if (!opts.local_steps_grid.empty()) {
        const std::size_t max_k = max_of(opts.local_steps_grid);
        Optimizer optimizer(sgd(opts.fedavg_lr), opts.dim);
        Rng rng(seed);
        std::vector<Index> batch;
        ParamVector theta = theta0;
        std::map<std::size_t, ParamVector> snap;
        if (std::count(opts.local_steps_grid.begin(), opts.local_steps_grid.end(), 0u)) {
          snap[0] = ParamVector::Zero(opts.dim);
        }
        for (std::size_t k = 1; k <= max_k; ++k) {
          draw_batch(obj, opts.batch_size, rng, batch);
          optimizer.step(theta, obj.stochastic_gradient(theta, batch, rng));
          snap[k] = theta0 - theta;
        }
        for (std::size_t k : opts.local_steps_grid) estimates[col++].push_back(snap.at(k));
      }

      if (!opts.samples_grid.empty() || !opts.shrinkage_grid.empty()) {
        const std::size_t ell =
            std::max(max_of(opts.samples_grid),
                     opts.shrinkage_grid.empty() ? std::size_t{0} : opts.num_samples);
        std::vector<ParamVector> samples;
        if (opts.sampling == FedPaSampling::kIasg) {
          SamplerConfig sc;
          sc.burn_in_steps = opts.burn_in_steps;
          sc.steps_per_sample = steps_per_sample;
          sc.num_samples = ell;
          sc.batch_size = opts.batch_size;
          sc.seed = seed;
          Optimizer optimizer(sgd(opts.fedpa_lr), opts.dim);
          samples = iasg_sample(obj, optimizer, sc, theta0);
        }
        // Samples sweep: one DeltaState, finalized at each grid size.
        if (!opts.samples_grid.empty()) {
          if (opts.sampling == FedPaSampling::kExact) {
            for (std::size_t s = 0; s < opts.samples_grid.size(); ++s) {
              estimates[col++].push_back(exact);
            }
          } else {
            ShrinkageConfig shrink;
            shrink.rho = opts.rho;
            DeltaState state(theta0, samples.front(), shrink);
            std::map<std::size_t, ParamVector> snap;
            snap[1] = state.finalize();
            for (std::size_t t = 1; t < max_of(opts.samples_grid); ++t) {
              state.update(samples[t]);
              snap[t + 1] = state.finalize();
            }
            for (std::size_t s : opts.samples_grid) estimates[col++].push_back(snap.at(s));
          }
        }
        for (double rho : opts.shrinkage_grid) {
          if (opts.sampling == FedPaSampling::kExact) {
            estimates[col++].push_back(exact);
            continue;
          }
          ShrinkageConfig shrink;
          shrink.rho = rho;
          estimates[col++].push_back(dp_delta(
              std::span<const ParamVector>(samples.data(), opts.num_samples), theta0, shrink));
        }
      }
    }

    results[cell].resize(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      results[cell][c] = summarize(estimates[c], exact);
    }
  });

  std::vector<BiasVarianceRow> rows;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    BiasVarianceRow row;
    row.method = columns[c].method;
    row.sweep_var = columns[c].sweep_var;
    row.value = columns[c].value;
    row.dim = opts.dim;
    std::vector<double> fro;
    for (std::size_t cell = 0; cell < num_cells; ++cell) {
      row.cell_bias.push_back(results[cell][c].bias);
      fro.push_back(results[cell][c].fro);
    }
    row.bias_l2 = stats::median(row.cell_bias);
    row.cov_fro = stats::median(fro);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_bias_variance_csv(std::ostream& out, std::span<const BiasVarianceRow> rows) {
  out << "method,sweep_var,value,bias_l2,cov_fro,d\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.sweep_var << ',' << format_double(r.value) << ','
        << format_double(r.bias_l2) << ',' << format_double(r.cov_fro) << ',' << r.dim << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

struct EssCell {
  Index dim;
  std::size_t lr_index;
  std::size_t burn_in;
  std::size_t steps_per_sample;
};

std::vector<EssCell> ess_cells(const EssOptions& opts) {
  std::vector<EssCell> cells;
  for (Index d : opts.dims) {
    for (std::size_t l = 0; l < opts.lr_grid.size(); ++l) {
      std::set<std::pair<std::size_t, std::size_t>> grid;
      for (std::size_t b : opts.burn_in_grid) grid.emplace(b, opts.fixed_steps_per_sample);
      for (std::size_t k : opts.steps_per_sample_grid) grid.emplace(opts.fixed_burn_in, k);
      for (const auto& [b, k] : grid) cells.push_back({d, l, b, k});
    }
  }
  return cells;
}

}  // namespace

std::vector<EssRow> ess_sweep(const EssOptions& opts) {
  if (opts.num_problems == 0 || opts.num_samples == 0) {
    throw InvalidArgument("ess_sweep: num_problems and num_samples must be >= 1");
  }
  for (std::size_t k : opts.steps_per_sample_grid) {
    if (k == 0) throw InvalidArgument("ess_sweep: steps_per_sample values must be >= 1");
  }
  if (opts.fixed_steps_per_sample == 0) {
    throw InvalidArgument("ess_sweep: fixed_steps_per_sample must be >= 1");
  }
  const std::vector<EssCell> cells = ess_cells(opts);
  if (cells.empty()) return {};

  // Problems per dimension, shared across cells.
  std::map<Index, std::vector<ClientObjective>> problems;
  for (Index d : opts.dims) {
    auto& list = problems[d];
    if (!list.empty()) continue;
    for (std::size_t p = 0; p < opts.num_problems; ++p) {
      Regression reg =
          make_regression(opts.num_examples, d, d, opts.noise_std,
                          derive_seed(opts.seed, {kProblemStream, static_cast<std::uint64_t>(d), p}));
      list.push_back(ClientObjective::least_squares(std::move(reg.data)));
    }
  }

  const std::size_t jobs = cells.size() * opts.num_problems;
  std::vector<std::optional<double>> values(jobs);
  detail::parallel_for(jobs, resolve_threads(opts.threads), [&](std::size_t job) {
    const EssCell& cell = cells[job / opts.num_problems];
    const std::size_t p = job % opts.num_problems;
    const ClientObjective& obj = problems.at(cell.dim)[p];
    SamplerConfig sc;
    sc.burn_in_steps = cell.burn_in;
    sc.steps_per_sample = cell.steps_per_sample;
    sc.num_samples = opts.num_samples;
    sc.batch_size = opts.batch_size;
    // Common random numbers across the grid for a given problem.
    sc.seed = derive_seed(opts.seed, {kEssStream, static_cast<std::uint64_t>(cell.dim), p});
    Optimizer optimizer(sgd(opts.lr_grid[cell.lr_index]), cell.dim);
    try {
      const auto samples = iasg_sample(obj, optimizer, sc, ParamVector::Zero(cell.dim));
      const double e = ess(samples, obj);
      if (std::isfinite(e)) values[job] = e;
    } catch (const Divergence&) {
      values[job].reset();
    }
  });

  std::vector<EssRow> rows;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    EssRow row;
    row.dim = cells[c].dim;
    row.burn_in = cells[c].burn_in;
    row.steps_per_sample = cells[c].steps_per_sample;
    row.lr = opts.lr_grid[cells[c].lr_index];
    std::vector<double> v;
    bool diverged = false;
    for (std::size_t p = 0; p < opts.num_problems; ++p) {
      const auto& x = values[c * opts.num_problems + p];
      if (x) {
        v.push_back(*x);
      } else {
        diverged = true;
      }
    }
    if (!diverged) row.ess = stats::median(v);
    rows.push_back(row);
  }
  return rows;
}

void write_ess_csv(std::ostream& out, std::span<const EssRow> rows) {
  out << "d,burn_in,steps_per_sample,lr,ess\n";
  for (const auto& r : rows) {
    out << r.dim << ',' << r.burn_in << ',' << r.steps_per_sample << ','
        << format_double(r.lr) << ',' << format_optional(r.ess) << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<TimingRow> timing_sweep(const TimingOptions& opts) {
  if (!std::is_sorted(opts.dims.begin(), opts.dims.end())) {
    throw InvalidArgument("timing_sweep: dims must be sorted ascending");
  }
  if (opts.repeats < 5) throw InvalidArgument("timing_sweep: repeats must be >= 5");
  if (opts.num_samples == 0) throw InvalidArgument("timing_sweep: num_samples must be >= 1");
  for (const auto& m : opts.methods) {
    if (m != "fedavg_delta" && m != "dp_delta" && m != "dense_delta") {
      throw InvalidArgument("timing_sweep: unknown method '" + m + "'");
    }
  }
  const std::size_t per_epoch =
      opts.batch_size == 0 ? 1
                           : (static_cast<std::size_t>(opts.num_examples) + opts.batch_size - 1) /
                                 opts.batch_size;
  const std::size_t steps = opts.local_epochs * per_epoch;
  if (steps == 0 || steps % opts.num_samples != 0) {
    throw InvalidArgument("timing_sweep: local steps must be a positive multiple of num_samples");
  }

  std::vector<TimingRow> rows;
  for (Index d : opts.dims) {
    Regression reg = make_regression(opts.num_examples, d, std::min<Index>(d, 10), 1.0,
                                     derive_seed(opts.seed, {kTimingStream, static_cast<std::uint64_t>(d)}));
    const ClientObjective obj = ClientObjective::least_squares(std::move(reg.data));
    // Batch-1 least squares needs lr < 2 / ||x||^2 ~ 2 / d.
    const OptimizerConfig opt = sgd(opts.lr > 0.0 ? opts.lr : 0.5 / static_cast<double>(d));
    const ParamVector theta0 = ParamVector::Zero(d);
    SamplerConfig sc;
    sc.steps_per_sample = steps / opts.num_samples;
    sc.num_samples = opts.num_samples;
    sc.batch_size = opts.batch_size;
    ShrinkageConfig shrink;
    shrink.rho = opts.rho;
    const double dense_bytes = static_cast<double>(d) * static_cast<double>(d) * sizeof(double);
    const bool dense_ok = dense_bytes <= static_cast<double>(opts.memory_cap_bytes);

    std::vector<std::vector<double>> times(opts.methods.size());
    for (std::size_t rep = 0; rep < opts.warmup + opts.repeats; ++rep) {
      const std::uint64_t seed = derive_seed(opts.seed, {kTimingStream, static_cast<std::uint64_t>(d), rep});
      sc.seed = seed;
      for (std::size_t m = 0; m < opts.methods.size(); ++m) {
        const std::string& method = opts.methods[m];
        if (method == "dense_delta" && !dense_ok) continue;
        const auto start = std::chrono::steady_clock::now();
        ParamVector delta;
        if (method == "fedavg_delta") {
          delta = fedavg_client_update(theta0, obj, opt, steps, opts.batch_size, seed).delta;
        } else if (method == "dp_delta") {
          delta = fedpa_client_update(theta0, obj, opt, sc, shrink, seed, false).delta;
        } else {
          Optimizer optimizer(opt, d);
          const auto samples = iasg_sample(obj, optimizer, sc, theta0);
          delta = dense_delta_oracle(samples, theta0, opts.rho);
        }
        const auto stop = std::chrono::steady_clock::now();
        if (!delta.allFinite()) throw Divergence("timing_sweep: non-finite delta", 0);
        if (rep >= opts.warmup) {
          times[m].push_back(std::chrono::duration<double, std::milli>(stop - start).count());
        }
      }
    }
    for (std::size_t m = 0; m < opts.methods.size(); ++m) {
      TimingRow row;
      row.dim = d;
      row.method = opts.methods[m];
      if (!times[m].empty()) row.ms = stats::median(times[m]);
      rows.push_back(row);
    }
  }
  return rows;
}

void write_timing_csv(std::ostream& out, std::span<const TimingRow> rows) {
  out << "dim,method,ms\n";
  for (const auto& r : rows) {
    out << r.dim << ',' << r.method << ',' << format_optional(r.ms) << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string join_values(const std::vector<double>& v) {
  std::ostringstream s;
  for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << format_double(v[i]);
  return s.str();
}

}  // namespace

std::vector<TrendCheck> bias_variance_trends(std::span<const BiasVarianceRow> rows,
                                             double min_abs_spearman) {
  std::vector<TrendCheck> checks;
  struct Spec {
    const char* method;
    const char* var;
    double sign;
  };
  for (const Spec& s : {Spec{"fedavg", "local_steps", 1.0}, Spec{"fedpa", "samples", -1.0}}) {
    std::vector<double> x, y;
    for (const auto& r : rows) {
      if (r.method == s.method && r.sweep_var == s.var) {
        x.push_back(r.value);
        y.push_back(r.bias_l2);
      }
    }
    if (x.size() < 2) continue;
    TrendCheck c;
    c.name = std::string(s.method) + " bias vs " + s.var;
    c.statistic = stats::spearman(x, y);
    c.threshold = s.sign * min_abs_spearman;
    c.passed = s.sign > 0 ? c.statistic >= c.threshold : c.statistic <= c.threshold;
    c.detail = "grid [" + join_values(x) + "] median bias [" + join_values(y) + "]";
    checks.push_back(c);
  }
  return checks;
}

std::vector<TrendCheck> ess_trends(const EssOptions& opts, std::span<const EssRow> rows,
                                   double min_spearman) {
  std::vector<TrendCheck> checks;
  for (Index d : opts.dims) {
    for (double lr : opts.lr_grid) {
      for (int which = 0; which < 2; ++which) {
        std::vector<double> x, y;
        bool missing = false;
        for (const auto& r : rows) {
          if (r.dim != d || r.lr != lr) continue;
          const bool on_axis = which == 0 ? r.steps_per_sample == opts.fixed_steps_per_sample
                                          : r.burn_in == opts.fixed_burn_in;
          const bool in_grid =
              which == 0 ? std::count(opts.burn_in_grid.begin(), opts.burn_in_grid.end(), r.burn_in) > 0
                         : std::count(opts.steps_per_sample_grid.begin(),
                                      opts.steps_per_sample_grid.end(), r.steps_per_sample) > 0;
          if (!on_axis || !in_grid) continue;
          if (!r.ess) {
            missing = true;
            continue;
          }
          x.push_back(static_cast<double>(which == 0 ? r.burn_in : r.steps_per_sample));
          y.push_back(*r.ess);
        }
        if (x.size() < 2) continue;
        TrendCheck c;
        std::ostringstream name;
        name << "ess vs " << (which == 0 ? "burn_in" : "steps_per_sample") << " (d=" << d
             << ", lr=" << format_double(lr) << ")";
        c.name = name.str();
        c.statistic = stats::spearman(x, y);
        c.threshold = min_spearman;
        c.passed = !missing && c.statistic >= min_spearman;
        c.detail = "grid [" + join_values(x) + "] median ess [" + join_values(y) + "]" +
                   (missing ? " (diverged cells)" : "");
        checks.push_back(c);
      }
    }
  }
  return checks;
}

std::vector<TrendCheck> timing_trends(std::span<const TimingRow> rows) {
  std::map<Index, std::map<std::string, double>> table;
  for (const auto& r : rows) {
    if (r.ms) table[r.dim][r.method] = *r.ms;
  }
  std::vector<TrendCheck> checks;

  std::vector<double> dims, overhead;
  for (const auto& [d, m] : table) {
    if (m.count("fedavg_delta") && m.count("dp_delta")) {
      dims.push_back(static_cast<double>(d));
      overhead.push_back(m.at("dp_delta") / m.at("fedavg_delta") - 1.0);
    }
  }
  if (overhead.size() >= 2) {
    TrendCheck c;
    c.name = "dp_delta relative overhead non-increasing in d";
    double worst = -INFINITY;
    for (std::size_t i = 1; i < overhead.size(); ++i) {
      worst = std::max(worst, overhead[i] - overhead[i - 1]);
    }
    c.statistic = worst;
    c.threshold = 0.0;
    c.passed = worst <= 0.0;
    c.detail = "d [" + join_values(dims) + "] overhead [" + join_values(overhead) + "]";
    checks.push_back(c);
  }

  std::vector<double> dense_dims, dense_ms;
  for (const auto& [d, m] : table) {
    if (m.count("dense_delta")) {
      dense_dims.push_back(static_cast<double>(d));
      dense_ms.push_back(m.at("dense_delta"));
    }
  }
  for (std::size_t i = 1; i < dense_dims.size(); ++i) {
    if (dense_dims[i] < 1000.0) continue;
    TrendCheck c;
    c.name = "dense_delta superlinear " + format_double(dense_dims[i - 1]) + " -> " +
             format_double(dense_dims[i]);
    c.statistic = dense_ms[i] / dense_ms[i - 1];
    c.threshold = dense_dims[i] / dense_dims[i - 1];
    c.passed = c.statistic > c.threshold;
    c.detail = "ms " + format_double(dense_ms[i - 1]) + " -> " + format_double(dense_ms[i]);
    checks.push_back(c);
  }

  std::vector<double> dp_dims, dp_ms;
  for (const auto& [d, m] : table) {
    if (m.count("dp_delta")) {
      dp_dims.push_back(static_cast<double>(d));
      dp_ms.push_back(m.at("dp_delta"));
    }
  }
  if (dp_dims.size() >= 3) {
    TrendCheck c;
    c.name = "dp_delta time linear in d";
    c.statistic = stats::linear_fit(dp_dims, dp_ms).r_squared;
    c.threshold = 0.9;
    c.passed = c.statistic >= c.threshold;
    c.detail = "ms [" + join_values(dp_ms) + "]";
    checks.push_back(c);
  }
  return checks;
}

}  // namespace fedpost
