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

#include "fedpost/fedpost.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <optional>
#include <sstream>
#include <string>

#include "fedpost/analysis.hpp"
#include "fedpost/config.hpp"
#include "fedpost/experiment.hpp"
#include "fedpost/posterior_delta.hpp"

struct fedpost_delta_state {
  fedpost::DeltaState state;
};

struct fedpost_experiment {
  fedpost::ExperimentConfig config;
  fedpost::ExperimentResult result;
};

namespace {

thread_local std::string g_last_error;

fedpost_status fail(fedpost_status status, std::string message) {
  g_last_error = std::move(message);
  return status;
}

fedpost_status status_of(fedpost::ErrorCode code) {
  switch (code) {
    case fedpost::ErrorCode::kInvalidArgument: return FEDPOST_ERR_INVALID_ARGUMENT;
    case fedpost::ErrorCode::kSingularMatrix: return FEDPOST_ERR_SINGULAR_MATRIX;
    case fedpost::ErrorCode::kSingularUpdate: return FEDPOST_ERR_SINGULAR_UPDATE;
    case fedpost::ErrorCode::kDivergence: return FEDPOST_ERR_DIVERGENCE;
    case fedpost::ErrorCode::kConfig: return FEDPOST_ERR_CONFIG;
    case fedpost::ErrorCode::kIo: return FEDPOST_ERR_IO;
  }
  return FEDPOST_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
fedpost_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const fedpost::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(FEDPOST_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FEDPOST_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(FEDPOST_ERR_INTERNAL, "unknown error");
  }
}

fedpost::ParamVector to_vector(const double* data, size_t dim) {
  return Eigen::Map<const fedpost::ParamVector>(data, static_cast<Eigen::Index>(dim));
}

std::vector<fedpost::ParamVector> to_samples(const double* samples, size_t n, size_t dim) {
  std::vector<fedpost::ParamVector> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) out.push_back(to_vector(samples + i * dim, dim));
  return out;
}

void copy_out(const fedpost::ParamVector& v, double* out) {
  std::memcpy(out, v.data(), sizeof(double) * static_cast<size_t>(v.size()));
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw fedpost::IoError("cannot create output directory '" + dir + "': " + ec.message());
  return std::filesystem::path(dir);
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw fedpost::IoError("cannot write '" + path.string() + "'");
  return out;
}

#define FEDPOST_REQUIRE(cond, msg) \
  do {                             \
    if (!(cond)) return fail(FEDPOST_ERR_INVALID_ARGUMENT, msg); \
  } while (0)

}  // namespace

extern "C" {

const char* fedpost_version(void) { return "0.1.0"; }

const char* fedpost_status_name(fedpost_status status) {
  switch (status) {
    case FEDPOST_OK: return "ok";
    case FEDPOST_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case FEDPOST_ERR_SINGULAR_MATRIX: return "singular_matrix";
    case FEDPOST_ERR_SINGULAR_UPDATE: return "singular_update";
    case FEDPOST_ERR_DIVERGENCE: return "divergence";
    case FEDPOST_ERR_CONFIG: return "config";
    case FEDPOST_ERR_IO: return "io";
    case FEDPOST_ERR_ORACLE_FAILURE: return "oracle_failure";
    case FEDPOST_ERR_TREND_VIOLATION: return "trend_violation";
    case FEDPOST_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* fedpost_last_error(void) { return g_last_error.c_str(); }

void fedpost_string_free(char* s) { delete[] s; }

fedpost_status fedpost_delta_state_create(const double* theta0, const double* first_sample,
                                          size_t dim, double rho, fedpost_delta_state** out) {
  FEDPOST_REQUIRE(theta0 && first_sample && out, "null argument");
  FEDPOST_REQUIRE(dim > 0, "dim must be > 0");
  return guarded([&] {
    fedpost::ShrinkageConfig cfg;
    cfg.rho = rho;
    *out = new fedpost_delta_state{
        fedpost::DeltaState(to_vector(theta0, dim), to_vector(first_sample, dim), cfg)};
    return FEDPOST_OK;
  });
}

fedpost_status fedpost_delta_state_update(fedpost_delta_state* state, const double* sample,
                                          size_t dim) {
  FEDPOST_REQUIRE(state && sample, "null argument");
  return guarded([&] {
    state->state.update(to_vector(sample, dim));
    return FEDPOST_OK;
  });
}

fedpost_status fedpost_delta_state_finalize(const fedpost_delta_state* state, double* out,
                                            size_t dim) {
  FEDPOST_REQUIRE(state && out, "null argument");
  FEDPOST_REQUIRE(dim == static_cast<size_t>(state->state.dim()), "dimension mismatch");
  return guarded([&] {
    copy_out(state->state.finalize(), out);
    return FEDPOST_OK;
  });
}

size_t fedpost_delta_state_num_samples(const fedpost_delta_state* state) {
  return state ? state->state.num_samples() : 0;
}

fedpost_status fedpost_delta_state_to_json(const fedpost_delta_state* state, char** out) {
  FEDPOST_REQUIRE(state && out, "null argument");
  return guarded([&] {
    *out = dup_string(state->state.to_json());
    return FEDPOST_OK;
  });
}

void fedpost_delta_state_destroy(fedpost_delta_state* state) { delete state; }

fedpost_status fedpost_dp_delta(const double* samples, size_t num_samples, size_t dim,
                                const double* theta0, double rho, double* out) {
  FEDPOST_REQUIRE(samples && theta0 && out, "null argument");
  FEDPOST_REQUIRE(num_samples > 0 && dim > 0, "num_samples and dim must be > 0");
  return guarded([&] {
    fedpost::ShrinkageConfig cfg;
    cfg.rho = rho;
    copy_out(fedpost::dp_delta(to_samples(samples, num_samples, dim), to_vector(theta0, dim), cfg),
             out);
    return FEDPOST_OK;
  });
}

fedpost_status fedpost_dense_delta(const double* samples, size_t num_samples, size_t dim,
                                   const double* theta0, double rho, double* out) {
  FEDPOST_REQUIRE(samples && theta0 && out, "null argument");
  FEDPOST_REQUIRE(num_samples > 0 && dim > 0, "num_samples and dim must be > 0");
  return guarded([&] {
    copy_out(fedpost::dense_delta_oracle(to_samples(samples, num_samples, dim),
                                         to_vector(theta0, dim), rho),
             out);
    return FEDPOST_OK;
  });
}

fedpost_status fedpost_experiment_load(const char* path, fedpost_experiment** out) {
  FEDPOST_REQUIRE(path && out, "null argument");
  return guarded([&] {
    *out = new fedpost_experiment{fedpost::load_experiment_config(path), {}};
    return FEDPOST_OK;
  });
}

fedpost_status fedpost_experiment_parse(const char* text, fedpost_experiment** out) {
  FEDPOST_REQUIRE(text && out, "null argument");
  return guarded([&] {
    std::istringstream in(text);
    *out = new fedpost_experiment{fedpost::parse_experiment_config(in), {}};
    return FEDPOST_OK;
  });
}

fedpost_status fedpost_experiment_set_output_dir(fedpost_experiment* exp, const char* dir) {
  FEDPOST_REQUIRE(exp && dir, "null argument");
  exp->config.output_dir = dir;
  return FEDPOST_OK;
}

fedpost_status fedpost_experiment_set_seed(fedpost_experiment* exp, uint64_t seed) {
  FEDPOST_REQUIRE(exp, "null argument");
  exp->config.master_seed = seed;
  return FEDPOST_OK;
}

fedpost_status fedpost_experiment_serialize(const fedpost_experiment* exp, char** out) {
  FEDPOST_REQUIRE(exp && out, "null argument");
  return guarded([&] {
    *out = dup_string(fedpost::serialize(exp->config));
    return FEDPOST_OK;
  });
}

fedpost_status fedpost_experiment_run(fedpost_experiment* exp) {
  FEDPOST_REQUIRE(exp, "null argument");
  return guarded([&] {
    exp->result = {};
    const auto dir = prepare_dir(exp->config.output_dir);
    {
      auto snapshot = open_out(dir / "config.resolved");
      snapshot << fedpost::serialize(exp->config);
    }
    auto metrics = open_out(dir / "metrics.csv");
    fedpost::write_metrics_header(metrics);
    metrics.flush();
    try {
      exp->result = fedpost::run_experiment(exp->config, [&](const fedpost::MetricsRecord& r) {
        exp->result.records.push_back(r);
        fedpost::write_metrics_row(metrics, r);
        metrics.flush();
      });
    } catch (...) {
      metrics.flush();
      throw;
    }
    if (!metrics) throw fedpost::IoError("failed writing metrics.csv");
    return FEDPOST_OK;
  });
}

size_t fedpost_experiment_num_records(const fedpost_experiment* exp) {
  return exp ? exp->result.records.size() : 0;
}

fedpost_status fedpost_experiment_record(const fedpost_experiment* exp, size_t index,
                                         fedpost_metrics_record* out) {
  FEDPOST_REQUIRE(exp && out, "null argument");
  FEDPOST_REQUIRE(index < exp->result.records.size(), "record index out of range");
  const auto& r = exp->result.records[index];
  out->round = r.round;
  out->eval_loss = r.eval_loss;
  out->has_eval_accuracy = r.eval_accuracy.has_value();
  out->eval_accuracy = r.eval_accuracy.value_or(0.0);
  out->has_dist_to_optimum = r.dist_to_optimum.has_value();
  out->dist_to_optimum = r.dist_to_optimum.value_or(0.0);
  out->has_mean_client_ess = r.mean_client_ess.has_value();
  out->mean_client_ess = r.mean_client_ess.value_or(0.0);
  out->wall_ms = r.wall_ms;
  return FEDPOST_OK;
}

size_t fedpost_experiment_dim(const fedpost_experiment* exp) {
  return exp ? static_cast<size_t>(exp->result.final_theta.size()) : 0;
}

fedpost_status fedpost_experiment_final_theta(const fedpost_experiment* exp, double* out,
                                              size_t dim) {
  FEDPOST_REQUIRE(exp && out, "null argument");
  FEDPOST_REQUIRE(exp->result.final_theta.size() > 0, "experiment has not completed");
  FEDPOST_REQUIRE(dim == static_cast<size_t>(exp->result.final_theta.size()),
                  "dimension mismatch");
  copy_out(exp->result.final_theta, out);
  return FEDPOST_OK;
}

void fedpost_experiment_destroy(fedpost_experiment* exp) { delete exp; }

void fedpost_oracle_options_init(fedpost_oracle_options* opts) {
  if (!opts) return;
  const fedpost::OracleCheckOptions d;
  opts->num_cases = d.num_cases;
  opts->max_dim = static_cast<size_t>(d.max_dim);
  opts->max_samples = d.max_samples;
  opts->seed = d.seed;
  opts->tolerance = d.tolerance;
}

fedpost_status fedpost_oracle_check(const fedpost_oracle_options* opts, fedpost_delta_fn fn,
                                    void* user, fedpost_oracle_report* report,
                                    char** failing_seeds) {
  FEDPOST_REQUIRE(opts, "null options");
  FEDPOST_REQUIRE(opts->max_dim > 0 && opts->max_samples > 0,
                  "max_dim and max_samples must be > 0");
  FEDPOST_REQUIRE(opts->tolerance > 0.0, "tolerance must be > 0");
  if (failing_seeds) *failing_seeds = nullptr;
  return guarded([&] {
    fedpost::OracleCheckOptions o;
    o.num_cases = opts->num_cases;
    o.max_dim = static_cast<Eigen::Index>(opts->max_dim);
    o.max_samples = opts->max_samples;
    o.seed = opts->seed;
    o.tolerance = opts->tolerance;
    fedpost::DeltaFunction delta;
    if (fn) {
      delta = [fn, user](std::span<const fedpost::ParamVector> samples,
                         const fedpost::ParamVector& theta0, const fedpost::ShrinkageConfig& cfg) {
        const size_t dim = static_cast<size_t>(theta0.size());
        std::vector<double> flat;
        flat.reserve(samples.size() * dim);
        for (const auto& s : samples) flat.insert(flat.end(), s.data(), s.data() + dim);
        fedpost::ParamVector out(theta0.size());
        if (fn(flat.data(), samples.size(), dim, theta0.data(), cfg.rho, out.data(), user) != 0) {
          throw fedpost::InvalidArgument("delta callback reported failure");
        }
        return out;
      };
    }
    const fedpost::OracleCheckReport r = fedpost::run_oracle_check(o, delta);
    if (report) {
      report->num_cases = r.num_cases;
      report->num_failures = r.failures.size();
      report->max_rel_error = r.max_rel_error;
    }
    if (r.passed()) return FEDPOST_OK;
    std::string seeds;
    for (std::size_t i = 0; i < r.failures.size(); ++i) {
      if (i) seeds += ",";
      seeds += std::to_string(r.failures[i].seed);
    }
    if (failing_seeds) *failing_seeds = dup_string(seeds);
    return fail(FEDPOST_ERR_ORACLE_FAILURE,
                std::to_string(r.failures.size()) + " of " + std::to_string(r.num_cases) +
                    " cases exceeded tolerance");
  });
}

fedpost_status fedpost_sweep_run(const char* kind, const char* config_path,
                                 const char* output_dir, const uint64_t* seed,
                                 int assert_trends, char** summary) {
  FEDPOST_REQUIRE(kind, "null sweep kind");
  const std::string k(kind);
  FEDPOST_REQUIRE(k == "bias_variance" || k == "ess" || k == "timing",
                  "unknown sweep kind '" + k + "' (expected bias_variance, ess or timing)");
  if (summary) *summary = nullptr;
  return guarded([&] {
    fedpost::SweepConfig cfg = config_path ? fedpost::load_sweep_config(config_path)
                                           : fedpost::SweepConfig{};
    if (output_dir) cfg.output_dir = output_dir;
    if (seed) cfg.seed = *seed;
    cfg.bias_variance.seed = cfg.seed;
    cfg.ess.seed = cfg.seed;
    cfg.timing.seed = cfg.seed;

    const auto dir = prepare_dir(cfg.output_dir);
    std::vector<fedpost::TrendCheck> checks;
    auto csv = open_out(dir / (k + ".csv"));
    if (k == "bias_variance") {
      const auto rows = fedpost::bias_variance_sweep(cfg.bias_variance);
      fedpost::write_bias_variance_csv(csv, rows);
      checks = fedpost::bias_variance_trends(rows);
    } else if (k == "ess") {
      const auto rows = fedpost::ess_sweep(cfg.ess);
      fedpost::write_ess_csv(csv, rows);
      checks = fedpost::ess_trends(cfg.ess, rows);
    } else {
      const auto rows = fedpost::timing_sweep(cfg.timing);
      fedpost::write_timing_csv(csv, rows);
      checks = fedpost::timing_trends(rows);
    }
    csv.flush();
    if (!csv) throw fedpost::IoError("failed writing " + k + ".csv");

    std::ostringstream text;
    bool ok = true;
    for (const auto& c : checks) {
      ok = ok && c.passed;
      text << (c.passed ? "PASS " : "FAIL ") << c.name << ": statistic "
           << c.statistic << " threshold " << c.threshold << " (" << c.detail << ")\n";
    }
    if (summary) *summary = dup_string(text.str());
    if (assert_trends && !ok) {
      return fail(FEDPOST_ERR_TREND_VIOLATION, "trend assertion failed");
    }
    return FEDPOST_OK;
  });
}

}  // extern "C"
