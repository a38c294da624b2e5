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

#ifndef FEDPOST_CONFIG_HPP_
#define FEDPOST_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "fedpost/analysis.hpp"
#include "fedpost/federation.hpp"

namespace fedpost {

// Config files are flat `key = value` lines. Keys use dotted section
// prefixes (round.cohort_size); `#` starts a comment; lists are
// comma-separated and may be empty. Unknown or repeated keys are errors.

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

std::vector<KeyValue> parse_key_values(std::istream& in);

enum class Task { kToy2d, kSyntheticLsq, kSyntheticLogistic };

const char* to_string(Task task);
Task task_from_string(const std::string& name);

struct DataConfig {
  std::size_t num_clients = 10;
  Index examples_per_client = 100;
  Index dim = 10;
  int num_classes = 3;  // logistic only
  double noise_std = 1.0;
  double heterogeneity = 0.5;
  double gradient_noise_std = 0.0;  // toy2d only
};

struct ExperimentConfig {
  Task task = Task::kToy2d;
  std::size_t rounds = 100;
  std::uint64_t master_seed = 0;
  std::string output_dir = "out";
  DataConfig data;
  RoundConfig round;  // round.seed is derived from master_seed at run time
  double init_std = 0.0;
  // When false, wall_ms is written as 0 so metrics files are reproducible.
  bool wall_clock = true;
};

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::string& path);
std::string serialize(const ExperimentConfig& cfg);

// Sweeps share one file format; each sweep reads its own section.
struct SweepConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  BiasVarianceOptions bias_variance;
  EssOptions ess;
  TimingOptions timing;
};

SweepConfig parse_sweep_config(std::istream& in);
SweepConfig load_sweep_config(const std::string& path);
std::string serialize(const SweepConfig& cfg);

}  // namespace fedpost

#endif  // FEDPOST_CONFIG_HPP_
