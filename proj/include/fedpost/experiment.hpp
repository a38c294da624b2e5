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

#ifndef FEDPOST_EXPERIMENT_HPP_
#define FEDPOST_EXPERIMENT_HPP_

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "fedpost/config.hpp"
#include "fedpost/federation.hpp"

namespace fedpost {

struct ExperimentSetup {
  std::vector<ClientObjective> pool;
  std::optional<ParamVector> optimum;  // global mode when it has a closed form
  ParamVector theta_init;
  RoundConfig round;  // with the derived seed filled in
};

// Builds the client pool, optimum and initial parameters. Deterministic in
// cfg.master_seed.
ExperimentSetup build_experiment(const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  ParamVector final_theta;
};

// Runs cfg.rounds rounds. `on_record` sees each record as soon as its round
// completes, so partial progress survives a Divergence thrown later.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::function<void(const MetricsRecord&)>& on_record = {});

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const MetricsRecord& rec);

}  // namespace fedpost

#endif  // FEDPOST_EXPERIMENT_HPP_
