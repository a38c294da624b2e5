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

#include "fedpost/federation.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <thread>

namespace fedpost {

namespace {

constexpr std::uint64_t kCohortStream = 0xc0407;

// Rethrows `e` with the client id prefixed, keeping the error type.
[[noreturn]] void rethrow_for_client(std::exception_ptr e, std::size_t client_id) {
  const std::string prefix = "client " + std::to_string(client_id) + ": ";
  try {
    std::rethrow_exception(e);
  } catch (const Divergence& err) {
    throw Divergence(prefix + err.what(), err.step());
  } catch (const SingularUpdate& err) {
    throw SingularUpdate(prefix + err.what());
  } catch (const SingularMatrix& err) {
    throw SingularMatrix(prefix + err.what());
  } catch (const InvalidArgument& err) {
    throw InvalidArgument(prefix + err.what());
  } catch (const Error& err) {
    throw Error(err.code(), prefix + err.what());
  } catch (const std::exception& err) {
    throw Error(ErrorCode::kInvalidArgument, prefix + err.what());
  }
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace

const char* to_string(ClientUpdateKind kind) {
  switch (kind) {
    case ClientUpdateKind::kFedAvg: return "fedavg";
    case ClientUpdateKind::kFedPa: return "fedpa";
    case ClientUpdateKind::kFedAvgExact: return "fedavg_exact";
    case ClientUpdateKind::kFedPaExact: return "fedpa_exact";
  }
  return "unknown";
}

ClientUpdateKind client_update_kind_from_string(const std::string& name) {
  if (name == "fedavg") return ClientUpdateKind::kFedAvg;
  if (name == "fedpa") return ClientUpdateKind::kFedPa;
  if (name == "fedavg_exact") return ClientUpdateKind::kFedAvgExact;
  if (name == "fedpa_exact") return ClientUpdateKind::kFedPaExact;
  throw InvalidArgument("unknown client update '" + name + "'");
}

void validate(const RoundConfig& cfg) {
  if (cfg.cohort_size < 1) throw InvalidArgument("round: cohort_size must be >= 1");
  if (cfg.local_epochs == 0 && cfg.local_steps == 0) {
    throw InvalidArgument("round: local_steps or local_epochs must be >= 1");
  }
  if (cfg.sampler.num_samples < 1) throw InvalidArgument("sampler: num_samples must be >= 1");
  if (!(cfg.shrinkage.rho >= 0.0)) throw InvalidArgument("shrinkage: rho must be >= 0");
  validate(cfg.client_opt);
  validate(cfg.server_opt);
}

std::size_t resolve_local_steps(const RoundConfig& cfg, const ClientObjective& client) {
  if (cfg.local_epochs == 0) return cfg.local_steps;
  const auto n = static_cast<std::size_t>(std::max<Index>(client.num_examples(), 1));
  const std::size_t per_epoch = cfg.batch_size == 0 ? 1 : ceil_div(n, cfg.batch_size);
  return cfg.local_epochs * per_epoch;
}

ClientUpdateResult fedavg_client_update(const ParamVector& theta,
                                        const ClientObjective& client,
                                        const OptimizerConfig& opt,
                                        std::size_t steps, std::size_t batch_size,
                                        std::uint64_t seed) {
  require_same_dim(client.dim(), theta.size(), "fedavg_client_update");
  Optimizer optimizer(opt, theta.size());
  Rng rng(seed);
  std::vector<Index> batch;
  ParamVector local = theta;
  for (std::size_t k = 0; k < steps; ++k) {
    draw_batch(client, batch_size, rng, batch);
    const ParamVector g = client.stochastic_gradient(local, batch, rng);
    try {
      optimizer.step(local, g);
    } catch (const Divergence& e) {
      throw Divergence(std::string("fedavg: ") + e.what() + " at local step " +
                           std::to_string(k),
                       static_cast<std::int64_t>(k));
    }
  }
  ClientUpdateResult out;
  out.delta = theta - local;
  out.weight = client.weight();
  return out;
}

ClientUpdateResult fedpa_client_update(const ParamVector& theta,
                                       const ClientObjective& client,
                                       const OptimizerConfig& opt,
                                       const SamplerConfig& sampler,
                                       const ShrinkageConfig& shrinkage,
                                       std::uint64_t seed, bool with_ess) {
  require_same_dim(client.dim(), theta.size(), "fedpa_client_update");
  SamplerConfig cfg = sampler;
  cfg.seed = seed;
  Optimizer optimizer(opt, theta.size());
  std::optional<DeltaState> state;
  std::vector<double> losses;
  iasg_sample_stream(client, optimizer, cfg, theta, [&](const ParamVector& s) {
    if (!state) {
      state.emplace(theta, s, shrinkage);
    } else {
      state->update(s);
    }
    if (with_ess) losses.push_back(client.loss(s));
  });
  ClientUpdateResult out;
  out.delta = state->finalize();
  out.weight = client.weight();
  ClientDiagnostics diag;
  diag.num_samples = state->num_samples();
  if (with_ess) diag.ess = ess_from_losses(losses);
  out.diagnostics = diag;
  return out;
}

namespace {

GaussianPosterior require_posterior(const ClientObjective& client, const char* what) {
  auto post = client.closed_form_posterior();
  if (!post) {
    throw InvalidArgument(std::string(what) + ": objective '" + to_string(client.kind()) +
                          "' has no closed-form posterior");
  }
  return std::move(*post);
}

}  // namespace

ClientUpdateResult exact_fedavg_client_update(const ParamVector& theta,
                                              const ClientObjective& client) {
  require_same_dim(client.dim(), theta.size(), "exact_fedavg_client_update");
  const GaussianPosterior post = require_posterior(client, "exact_fedavg_client_update");
  ClientUpdateResult out;
  out.delta = theta - post.mean;
  out.weight = client.weight();
  return out;
}

ClientUpdateResult exact_fedpa_client_update(const ParamVector& theta,
                                             const ClientObjective& client) {
  require_same_dim(client.dim(), theta.size(), "exact_fedpa_client_update");
  const GaussianPosterior post = require_posterior(client, "exact_fedpa_client_update");
  ClientUpdateResult out;
  out.delta = post.precision * (theta - post.mean);
  out.weight = client.weight();
  return out;
}

std::vector<std::size_t> sample_cohort(std::size_t pool_size, std::size_t cohort_size,
                                       std::size_t round_index, std::uint64_t seed) {
  if (cohort_size > pool_size) {
    throw InvalidArgument("sample_cohort: cohort_size " + std::to_string(cohort_size) +
                          " exceeds pool size " + std::to_string(pool_size));
  }
  std::vector<std::size_t> ids(pool_size);
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  if (cohort_size == pool_size) return ids;
  Rng rng(derive_seed(seed, {kCohortStream, round_index}));
  for (std::size_t i = 0; i < cohort_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool_size - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(cohort_size);
  std::sort(ids.begin(), ids.end());
  return ids;
}

ParamVector aggregate(std::span<const ClientUpdateResult> results) {
  if (results.empty()) throw InvalidArgument("aggregate: no client results");
  std::vector<const ClientUpdateResult*> order;
  order.reserve(results.size());
  for (const auto& r : results) order.push_back(&r);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->client_id < b->client_id; });
  const Index d = order.front()->delta.size();
  double total = 0.0;
  for (const auto* r : order) {
    require_same_dim(d, r->delta.size(), "aggregate");
    if (!(r->weight > 0.0) || !std::isfinite(r->weight)) {
      throw InvalidArgument("aggregate: client weights must be finite and > 0");
    }
    total += r->weight;
  }
  ParamVector sum = ParamVector::Zero(d);
  for (const auto* r : order) sum += (r->weight / total) * r->delta;
  return sum;
}

MetricsRecord evaluate(const ParamVector& theta, std::span<const ClientObjective> pool,
                       const std::optional<ParamVector>& optimum) {
  MetricsRecord rec;
  double total = 0.0;
  for (const auto& c : pool) total += c.weight();
  double loss = 0.0;
  double acc = 0.0;
  bool has_acc = true;
  for (const auto& c : pool) {
    const double q = c.weight() / total;
    loss += q * c.loss(theta);
    if (has_acc) {
      const auto a = c.accuracy(theta);
      if (a) {
        acc += q * *a;
      } else {
        has_acc = false;
      }
    }
  }
  rec.eval_loss = loss;
  if (has_acc && !pool.empty()) rec.eval_accuracy = acc;
  if (optimum) rec.dist_to_optimum = (theta - *optimum).norm();
  return rec;
}

std::size_t resolve_threads(std::size_t requested) {
  std::size_t n = requested > 0 ? requested
                                : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FEDPOST_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) n = std::min(n, static_cast<std::size_t>(v));
  }
  return n;
}

MetricsRecord run_round(ServerState& server, std::span<const ClientObjective> pool,
                        const RoundConfig& cfg, const std::optional<ParamVector>& optimum) {
  validate(cfg);
  if (pool.empty()) throw InvalidArgument("run_round: empty client pool");
  const std::size_t round = server.round_index + 1;
  const auto start = std::chrono::steady_clock::now();

  ClientUpdateKind kind = cfg.client_update;
  if (round <= cfg.burn_in_rounds) {
    if (kind == ClientUpdateKind::kFedPa) kind = ClientUpdateKind::kFedAvg;
    if (kind == ClientUpdateKind::kFedPaExact) kind = ClientUpdateKind::kFedAvgExact;
  }

  const std::vector<std::size_t> cohort =
      sample_cohort(pool.size(), cfg.cohort_size, round, cfg.seed);
  std::vector<ClientUpdateResult> results(cohort.size());
  std::vector<std::exception_ptr> errors;
  const ParamVector& theta = server.theta;

  detail::parallel_for(
      cohort.size(), resolve_threads(cfg.threads),
      [&](std::size_t slot) {
        const std::size_t id = cohort[slot];
        const ClientObjective& client = pool[id];
        const std::uint64_t seed = derive_seed(cfg.seed, {round, id});
        ClientUpdateResult r;
        switch (kind) {
          case ClientUpdateKind::kFedAvg:
            r = fedavg_client_update(theta, client, cfg.client_opt,
                                     resolve_local_steps(cfg, client), cfg.batch_size, seed);
            break;
          case ClientUpdateKind::kFedPa: {
            SamplerConfig s = cfg.sampler;
            s.batch_size = cfg.batch_size;
            if (s.steps_per_sample == 0) {
              RoundConfig one_epoch = cfg;
              one_epoch.local_epochs = 1;
              s.steps_per_sample = resolve_local_steps(one_epoch, client);
            }
            r = fedpa_client_update(theta, client, cfg.client_opt, s, cfg.shrinkage, seed);
            break;
          }
          case ClientUpdateKind::kFedAvgExact:
            r = exact_fedavg_client_update(theta, client);
            break;
          case ClientUpdateKind::kFedPaExact:
            r = exact_fedpa_client_update(theta, client);
            break;
        }
        r.client_id = id;
        results[slot] = std::move(r);
      },
      errors);
  for (std::size_t slot = 0; slot < cohort.size(); ++slot) {
    if (errors[slot]) rethrow_for_client(errors[slot], cohort[slot]);
  }

  const ParamVector delta = aggregate(results);
  ParamVector next = server.theta;
  Optimizer next_opt = server.optimizer;
  try {
    next_opt.step(next, delta);
  } catch (const Divergence& e) {
    throw Divergence("server step in round " + std::to_string(round) + ": " + e.what(),
                     static_cast<std::int64_t>(round));
  }
  server.theta = std::move(next);
  server.optimizer = std::move(next_opt);
  server.round_index = round;
  const auto stop = std::chrono::steady_clock::now();

  MetricsRecord rec = evaluate(server.theta, pool, optimum);
  rec.round = round;
  rec.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  double ess_sum = 0.0;
  std::size_t ess_count = 0;
  for (const auto& r : results) {
    if (r.diagnostics && r.diagnostics->ess) {
      ess_sum += *r.diagnostics->ess;
      ++ess_count;
    }
  }
  if (ess_count > 0) rec.mean_client_ess = ess_sum / static_cast<double>(ess_count);
  return rec;
}

}  // namespace fedpost
