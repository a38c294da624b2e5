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

#include "cli.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

namespace fedpost::cli {

namespace {

int exit_code_for(fedpost_status s) {
  switch (s) {
    case FEDPOST_OK: return kExitOk;
    case FEDPOST_ERR_CONFIG:
    case FEDPOST_ERR_INVALID_ARGUMENT:
    case FEDPOST_ERR_IO: return kExitConfig;
    case FEDPOST_ERR_ORACLE_FAILURE: return kExitOracle;
    case FEDPOST_ERR_TREND_VIOLATION: return kExitTrend;
    default: return kExitRuntime;
  }
}

int report(fedpost_status s, const std::string& what) {
  if (s != FEDPOST_OK) {
    std::cerr << "fedpost " << what << ": " << fedpost_status_name(s) << ": "
              << fedpost_last_error() << "\n";
  }
  return exit_code_for(s);
}

// Owns a string returned by the C API.
struct OwnedString {
  char* p = nullptr;
  ~OwnedString() { fedpost_string_free(p); }
};

int run_command(const std::string& config, const std::optional<std::string>& out,
                const std::optional<std::uint64_t>& seed) {
  fedpost_experiment* exp = nullptr;
  fedpost_status s = fedpost_experiment_load(config.c_str(), &exp);
  if (s != FEDPOST_OK) return report(s, "run");
  if (out) fedpost_experiment_set_output_dir(exp, out->c_str());
  if (seed) fedpost_experiment_set_seed(exp, *seed);
  s = fedpost_experiment_run(exp);
  const size_t n = fedpost_experiment_num_records(exp);
  if (s == FEDPOST_OK) {
    std::cout << "completed " << n << " rounds\n";
    if (n > 0) {
      fedpost_metrics_record r;
      fedpost_experiment_record(exp, n - 1, &r);
      std::cout << "final eval_loss " << r.eval_loss;
      if (r.has_eval_accuracy) std::cout << " eval_accuracy " << r.eval_accuracy;
      if (r.has_dist_to_optimum) std::cout << " dist_to_optimum " << r.dist_to_optimum;
      std::cout << "\n";
    }
  } else if (s == FEDPOST_ERR_DIVERGENCE) {
    std::cerr << "diverged after " << n << " completed rounds\n";
  }
  fedpost_experiment_destroy(exp);
  return report(s, "run");
}

int oracle_command(const fedpost_oracle_options& opts, fedpost_delta_fn fn, void* user) {
  fedpost_oracle_report rep{};
  OwnedString seeds;
  const fedpost_status s = fedpost_oracle_check(&opts, fn, user, &rep, &seeds.p);
  if (s == FEDPOST_OK || s == FEDPOST_ERR_ORACLE_FAILURE) {
    std::cout << "cases " << rep.num_cases << " failures " << rep.num_failures
              << " max_rel_error " << rep.max_rel_error << "\n";
  }
  if (s == FEDPOST_ERR_ORACLE_FAILURE && seeds.p) {
    std::cout << "failing case seeds: " << seeds.p << "\n";
  }
  return report(s, "oracle-check");
}

int sweep_command(const std::string& kind, const std::optional<std::string>& config,
                  const std::optional<std::string>& out, const std::optional<std::uint64_t>& seed,
                  bool assert_trends) {
  OwnedString summary;
  const fedpost_status s =
      fedpost_sweep_run(kind.c_str(), config ? config->c_str() : nullptr,
                        out ? out->c_str() : nullptr, seed ? &*seed : nullptr,
                        assert_trends ? 1 : 0, &summary.p);
  if (summary.p) std::cout << summary.p;
  return report(s, "sweep");
}

}  // namespace

int main(int argc, char** argv, fedpost_delta_fn delta_override, void* delta_user) {
  CLI::App app{"Federated posterior averaging experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fedpost_version()));

  std::string run_config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run a federated experiment from a config file");
  run->add_option("--config", run_config, "experiment config")->required();
  run->add_option("--out", out_dir, "output directory (overrides output_dir)");
  run->add_option("--seed", seed, "master seed (overrides seed)");

  fedpost_oracle_options oracle;
  fedpost_oracle_options_init(&oracle);
  auto* check = app.add_subcommand("oracle-check", "compare the DP delta with the dense solve");
  check->add_option("--cases", oracle.num_cases, "number of randomised cases")
      ->capture_default_str();
  check->add_option("--max-dim", oracle.max_dim, "largest dimension")->capture_default_str();
  check->add_option("--max-samples", oracle.max_samples, "largest sample count")
      ->capture_default_str();
  check->add_option("--seed", oracle.seed, "base seed")->capture_default_str();
  check->add_option("--tolerance", oracle.tolerance, "relative error bound")
      ->capture_default_str();

  std::string kind;
  std::optional<std::string> sweep_config;
  bool assert_trends = false;
  auto* sweep = app.add_subcommand("sweep", "run an analysis sweep and write its CSV");
  sweep->add_option("kind", kind, "bias_variance | ess | timing")
      ->required()
      ->check(CLI::IsMember({"bias_variance", "ess", "timing"}));
  sweep->add_option("--config", sweep_config, "sweep config (defaults when omitted)");
  sweep->add_option("--out", out_dir, "output directory (overrides output_dir)");
  sweep->add_option("--seed", seed, "seed (overrides seed)");
  sweep->add_flag("--assert-trends", assert_trends, "exit 4 when a trend check fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return run_command(run_config, out_dir, seed);
  if (*check) return oracle_command(oracle, delta_override, delta_user);
  return sweep_command(kind, sweep_config, out_dir, seed, assert_trends);
}

}  // namespace fedpost::cli
