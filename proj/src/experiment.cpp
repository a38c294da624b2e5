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

#include "fedpost/experiment.hpp"

#include "fedpost/csv.hpp"
#include "fedpost/random.hpp"

namespace fedpost {

namespace {

enum : std::uint64_t { kDataStream = 11, kRoundStream, kInitStream };

}  // namespace

ExperimentSetup build_experiment(const ExperimentConfig& cfg) {
  ExperimentSetup s;
  const std::uint64_t data_seed = derive_seed(cfg.master_seed, {kDataStream});
  const DataConfig& d = cfg.data;
  switch (cfg.task) {
    case Task::kToy2d:
      s.pool = make_toy2d(d.gradient_noise_std);
      break;
    case Task::kSyntheticLsq:
      for (auto& data : make_federated_regression(d.num_clients, d.examples_per_client, d.dim,
                                                  d.noise_std, d.heterogeneity, data_seed)) {
        s.pool.push_back(ClientObjective::least_squares(std::move(data)));
      }
      break;
    case Task::kSyntheticLogistic:
      for (auto& data : make_federated_logistic(d.num_clients, d.examples_per_client, d.dim,
                                                d.num_classes, d.heterogeneity, data_seed)) {
        s.pool.push_back(ClientObjective::logistic(std::move(data)));
      }
      break;
  }

  std::vector<GaussianPosterior> posteriors;
  std::vector<double> weights;
  for (const auto& c : s.pool) {
    auto post = c.closed_form_posterior();
    if (!post) break;
    posteriors.push_back(std::move(*post));
    weights.push_back(c.weight());
  }
  if (!s.pool.empty() && posteriors.size() == s.pool.size()) {
    s.optimum = exact_global_mode(posteriors, weights);
  }

  const Index dim = s.pool.front().dim();
  Rng init_rng(derive_seed(cfg.master_seed, {kInitStream}));
  s.theta_init = cfg.init_std > 0.0 ? ParamVector(cfg.init_std * standard_normal(dim, init_rng))
                                    : ParamVector(ParamVector::Zero(dim));
  s.round = cfg.round;
  s.round.seed = derive_seed(cfg.master_seed, {kRoundStream});
  return s;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(const MetricsRecord&)>& on_record) {
  ExperimentSetup setup = build_experiment(cfg);
  validate(setup.round);
  ServerState server(setup.theta_init, setup.round.server_opt);
  ExperimentResult result;
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    MetricsRecord rec = run_round(server, setup.pool, setup.round, setup.optimum);
    if (!cfg.wall_clock) rec.wall_ms = 0.0;
    if (on_record) on_record(rec);
    result.records.push_back(rec);
  }
  result.final_theta = server.theta;
  return result;
}

void write_metrics_header(std::ostream& out) {
  out << "round,eval_loss,eval_accuracy,dist_to_optimum,mean_client_ess,wall_ms\n";
}

void write_metrics_row(std::ostream& out, const MetricsRecord& rec) {
  out << rec.round << ',' << format_double(rec.eval_loss) << ','
      << format_optional(rec.eval_accuracy) << ',' << format_optional(rec.dist_to_optimum) << ','
      << format_optional(rec.mean_client_ess) << ',' << format_double(rec.wall_ms) << '\n';
}

}  // namespace fedpost
