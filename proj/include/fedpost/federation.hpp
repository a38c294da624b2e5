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

#ifndef FEDPOST_FEDERATION_HPP_
#define FEDPOST_FEDERATION_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fedpost/objectives.hpp"
#include "fedpost/optim.hpp"
#include "fedpost/posterior_delta.hpp"
#include "fedpost/sampler.hpp"

namespace fedpost {

enum class ClientUpdateKind {
  kFedAvg,       // K local optimizer steps, delta = theta0 - theta_K
  kFedPa,        // IASG samples + shrinkage DP delta
  kFedAvgExact,  // oracle hook: delta = theta0 - mu_i (exact local solve)
  kFedPaExact,   // oracle hook: delta = P_i (theta0 - mu_i), closed-form posterior
};

const char* to_string(ClientUpdateKind kind);
ClientUpdateKind client_update_kind_from_string(const std::string& name);

struct RoundConfig {
  std::size_t cohort_size = 1;  // M
  // Local work per client for FedAvg. When local_epochs > 0 it takes
  // precedence: E epochs = E * ceil(n_i / batch_size) steps.
  std::size_t local_steps = 10;
  std::size_t local_epochs = 0;
  std::size_t batch_size = 0;  // 0 = full batch; shared by FedAvg and IASG
  ClientUpdateKind client_update = ClientUpdateKind::kFedAvg;
  // Rounds 1..burn_in_rounds run the FedAvg form of the chosen update.
  std::size_t burn_in_rounds = 0;
  // steps_per_sample = 0 means one epoch per sample. batch_size and seed are
  // taken from the round, not from here.
  SamplerConfig sampler;
  ShrinkageConfig shrinkage;
  OptimizerConfig client_opt;
  OptimizerConfig server_opt;
  std::uint64_t seed = 0;
  // Worker threads for client updates; 0 = FEDPOST_THREADS or hardware.
  std::size_t threads = 0;
};

void validate(const RoundConfig& cfg);

struct ClientDiagnostics {
  std::size_t num_samples = 0;
  std::optional<double> ess;
};

struct ClientUpdateResult {
  std::size_t client_id = 0;
  ParamVector delta;
  double weight = 1.0;  // q_i before normalisation (n_i)
  std::optional<ClientDiagnostics> diagnostics;
};

struct ServerState {
  ServerState(ParamVector initial, const OptimizerConfig& server_opt)
      : theta(std::move(initial)), optimizer(server_opt, theta.size()) {}

  ParamVector theta;
  Optimizer optimizer;
  std::size_t round_index = 0;  // completed rounds
};

struct MetricsRecord {
  std::size_t round = 0;
  double eval_loss = 0.0;
  std::optional<double> eval_accuracy;
  std::optional<double> dist_to_optimum;
  std::optional<double> mean_client_ess;
  double wall_ms = 0.0;
};

// Local steps for one client under `cfg` (epochs resolved against n_i).
std::size_t resolve_local_steps(const RoundConfig& cfg, const ClientObjective& client);

ClientUpdateResult fedavg_client_update(const ParamVector& theta,
                                        const ClientObjective& client,
                                        const OptimizerConfig& opt,
                                        std::size_t steps, std::size_t batch_size,
                                        std::uint64_t seed);

// Draws ell IASG samples starting at theta and folds them through a
// DeltaState anchored at theta. `with_ess` adds the ESS diagnostic (one
// full-batch loss per sample).
ClientUpdateResult fedpa_client_update(const ParamVector& theta,
                                       const ClientObjective& client,
                                       const OptimizerConfig& opt,
                                       const SamplerConfig& sampler,
                                       const ShrinkageConfig& shrinkage,
                                       std::uint64_t seed, bool with_ess = true);

// Oracle hooks for objectives with a closed-form posterior (quadratic, least
// squares). Throw InvalidArgument otherwise.
ClientUpdateResult exact_fedavg_client_update(const ParamVector& theta,
                                              const ClientObjective& client);
ClientUpdateResult exact_fedpa_client_update(const ParamVector& theta,
                                             const ClientObjective& client);

// Uniform sample of M of N client indices without replacement, ascending,
// deterministic in (seed, round_index).
std::vector<std::size_t> sample_cohort(std::size_t pool_size, std::size_t cohort_size,
                                       std::size_t round_index, std::uint64_t seed);

// sum_i (q_i / sum_j q_j) delta_i, summed in ascending client_id order.
ParamVector aggregate(std::span<const ClientUpdateResult> results);

// Metrics of `theta` over the whole pool, weights q_i normalised globally.
MetricsRecord evaluate(const ParamVector& theta, std::span<const ClientObjective> pool,
                       const std::optional<ParamVector>& optimum);

// Number of worker threads: `requested` if > 0, else the hardware
// concurrency, capped by FEDPOST_THREADS when set.
std::size_t resolve_threads(std::size_t requested);

// One round: cohort sampling, parallel client updates, aggregation and the
// server step. Client failures abort the round (server state unchanged) and
// are rethrown with the client id in the message.
MetricsRecord run_round(ServerState& server, std::span<const ClientObjective> pool,
                        const RoundConfig& cfg,
                        const std::optional<ParamVector>& optimum = std::nullopt);

}  // namespace fedpost

#endif  // FEDPOST_FEDERATION_HPP_
