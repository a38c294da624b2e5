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

/* C interface to the fedpost library. All objects are opaque handles; every
 * fallible call returns a fedpost_status and leaves a message retrievable
 * with fedpost_last_error() on the calling thread. Strings returned through
 * `char**` out-parameters are owned by the caller and released with
 * fedpost_string_free(). */

#ifndef FEDPOST_FEDPOST_H_
#define FEDPOST_FEDPOST_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(FEDPOST_BUILDING_LIBRARY)
#    define FEDPOST_API __declspec(dllexport)
#  else
#    define FEDPOST_API __declspec(dllimport)
#  endif
#else
#  define FEDPOST_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum fedpost_status {
  FEDPOST_OK = 0,
  FEDPOST_ERR_INVALID_ARGUMENT = 1,
  FEDPOST_ERR_SINGULAR_MATRIX = 2,
  FEDPOST_ERR_SINGULAR_UPDATE = 3,
  FEDPOST_ERR_DIVERGENCE = 4,
  FEDPOST_ERR_CONFIG = 5,
  FEDPOST_ERR_IO = 6,
  FEDPOST_ERR_ORACLE_FAILURE = 7,
  FEDPOST_ERR_TREND_VIOLATION = 8,
  FEDPOST_ERR_INTERNAL = 9
} fedpost_status;

FEDPOST_API const char* fedpost_version(void);
FEDPOST_API const char* fedpost_status_name(fedpost_status status);
/* Message of the last failed call on this thread ("" if none). */
FEDPOST_API const char* fedpost_last_error(void);
FEDPOST_API void fedpost_string_free(char* s);

/* ---- Posterior delta -------------------------------------------------- */

typedef struct fedpost_delta_state fedpost_delta_state;

FEDPOST_API fedpost_status fedpost_delta_state_create(const double* theta0,
                                                      const double* first_sample,
                                                      size_t dim, double rho,
                                                      fedpost_delta_state** out);
/* On failure the state is unchanged. */
FEDPOST_API fedpost_status fedpost_delta_state_update(fedpost_delta_state* state,
                                                      const double* sample, size_t dim);
FEDPOST_API fedpost_status fedpost_delta_state_finalize(const fedpost_delta_state* state,
                                                        double* out, size_t dim);
FEDPOST_API size_t fedpost_delta_state_num_samples(const fedpost_delta_state* state);
FEDPOST_API fedpost_status fedpost_delta_state_to_json(const fedpost_delta_state* state,
                                                       char** out);
FEDPOST_API void fedpost_delta_state_destroy(fedpost_delta_state* state);

/* `samples` is row-major, num_samples x dim. */
FEDPOST_API fedpost_status fedpost_dp_delta(const double* samples, size_t num_samples,
                                            size_t dim, const double* theta0, double rho,
                                            double* out);
FEDPOST_API fedpost_status fedpost_dense_delta(const double* samples, size_t num_samples,
                                               size_t dim, const double* theta0, double rho,
                                               double* out);

/* ---- Experiments ------------------------------------------------------ */

typedef struct fedpost_experiment fedpost_experiment;

typedef struct fedpost_metrics_record {
  uint64_t round;
  double eval_loss;
  int has_eval_accuracy;
  double eval_accuracy;
  int has_dist_to_optimum;
  double dist_to_optimum;
  int has_mean_client_ess;
  double mean_client_ess;
  double wall_ms;
} fedpost_metrics_record;

FEDPOST_API fedpost_status fedpost_experiment_load(const char* path, fedpost_experiment** out);
FEDPOST_API fedpost_status fedpost_experiment_parse(const char* text, fedpost_experiment** out);
FEDPOST_API fedpost_status fedpost_experiment_set_output_dir(fedpost_experiment* exp,
                                                             const char* dir);
FEDPOST_API fedpost_status fedpost_experiment_set_seed(fedpost_experiment* exp, uint64_t seed);
FEDPOST_API fedpost_status fedpost_experiment_serialize(const fedpost_experiment* exp,
                                                        char** out);
/* Runs all rounds, writing metrics.csv and config.resolved into the output
 * directory. metrics.csv is written row by row, so a divergence leaves the
 * completed rounds on disk. */
FEDPOST_API fedpost_status fedpost_experiment_run(fedpost_experiment* exp);
FEDPOST_API size_t fedpost_experiment_num_records(const fedpost_experiment* exp);
FEDPOST_API fedpost_status fedpost_experiment_record(const fedpost_experiment* exp,
                                                     size_t index,
                                                     fedpost_metrics_record* out);
FEDPOST_API size_t fedpost_experiment_dim(const fedpost_experiment* exp);
FEDPOST_API fedpost_status fedpost_experiment_final_theta(const fedpost_experiment* exp,
                                                          double* out, size_t dim);
FEDPOST_API void fedpost_experiment_destroy(fedpost_experiment* exp);

/* ---- Oracle check ----------------------------------------------------- */

/* Alternative delta implementation under test. Same layout as
 * fedpost_dp_delta; return 0 on success. */
typedef int (*fedpost_delta_fn)(const double* samples, size_t num_samples, size_t dim,
                                const double* theta0, double rho, double* out, void* user);

typedef struct fedpost_oracle_options {
  size_t num_cases;
  size_t max_dim;
  size_t max_samples;
  uint64_t seed;
  double tolerance;
} fedpost_oracle_options;

typedef struct fedpost_oracle_report {
  size_t num_cases;
  size_t num_failures;
  double max_rel_error;
} fedpost_oracle_report;

FEDPOST_API void fedpost_oracle_options_init(fedpost_oracle_options* opts);
/* Compares `fn` (NULL = the library's DP estimator) with the dense solve on
 * randomised cases. Returns FEDPOST_ERR_ORACLE_FAILURE when any case exceeds
 * the tolerance; `failing_seeds` (nullable) then receives the case seeds,
 * comma-separated. */
FEDPOST_API fedpost_status fedpost_oracle_check(const fedpost_oracle_options* opts,
                                                fedpost_delta_fn fn, void* user,
                                                fedpost_oracle_report* report,
                                                char** failing_seeds);

/* ---- Sweeps ----------------------------------------------------------- */

/* kind: "bias_variance", "ess" or "timing". config_path may be NULL for
 * defaults; output_dir and seed (nullable) override the file. Writes
 * <kind>.csv into the output directory. `summary` (nullable) receives one
 * line per trend check. With assert_trends != 0 a failed check returns
 * FEDPOST_ERR_TREND_VIOLATION (the CSV is still written). */
FEDPOST_API fedpost_status fedpost_sweep_run(const char* kind, const char* config_path,
                                             const char* output_dir, const uint64_t* seed,
                                             int assert_trends, char** summary);

#ifdef __cplusplus
}
#endif

#endif /* FEDPOST_FEDPOST_H_ */
