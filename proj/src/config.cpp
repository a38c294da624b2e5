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

#include "fedpost/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <type_traits>
#include <utility>

#include "fedpost/csv.hpp"

namespace fedpost {

namespace {

// Thrown by value parsers; turned into ConfigError with the line number.
struct BadValue {
  std::string message;
};

template <typename V>
V parse_scalar(std::string_view s) {
  if constexpr (std::is_same_v<V, bool>) {
    if (s == "true") return true;
    if (s == "false") return false;
    throw BadValue{"expected true or false, got '" + std::string(s) + "'"};
  } else if constexpr (std::is_same_v<V, double>) {
    const auto v = parse_double(s);
    if (!v) throw BadValue{"expected a number, got '" + std::string(s) + "'"};
    return *v;
  } else if constexpr (std::is_integral_v<V>) {
    V v{};
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw BadValue{std::string("expected ") +
                     (std::is_signed_v<V> ? "an integer" : "a non-negative integer") +
                     ", got '" + std::string(s) + "'"};
    }
    return v;
  } else if constexpr (std::is_same_v<V, std::string>) {
    return std::string(s);
  } else {
    try {
      if constexpr (std::is_same_v<V, OptimizerKind>) return optimizer_kind_from_string(std::string(s));
      if constexpr (std::is_same_v<V, ClientUpdateKind>) return client_update_kind_from_string(std::string(s));
      if constexpr (std::is_same_v<V, Task>) return task_from_string(std::string(s));
      if constexpr (std::is_same_v<V, FedPaSampling>) {
        if (s == "iasg") return FedPaSampling::kIasg;
        if (s == "exact") return FedPaSampling::kExact;
        throw InvalidArgument("unknown sampling '" + std::string(s) + "'");
      }
    } catch (const InvalidArgument& e) {
      throw BadValue{e.what()};
    }
  }
}

template <typename V>
std::string format_scalar(const V& v) {
  if constexpr (std::is_same_v<V, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_same_v<V, double>) {
    return format_double(v);
  } else if constexpr (std::is_integral_v<V>) {
    return std::to_string(v);
  } else if constexpr (std::is_same_v<V, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<V, FedPaSampling>) {
    return v == FedPaSampling::kExact ? "exact" : "iasg";
  } else {
    return to_string(v);
  }
}

template <typename V>
struct ValueTraits {
  static V parse(std::string_view s) { return parse_scalar<V>(s); }
  static std::string format(const V& v) { return format_scalar(v); }
};

template <typename E>
struct ValueTraits<std::vector<E>> {
  static std::vector<E> parse(std::string_view s) {
    std::vector<E> out;
    if (trim(s).empty()) return out;
    for (auto part : split(s, ',')) out.push_back(parse_scalar<E>(trim(part)));
    return out;
  }
  static std::string format(const std::vector<E>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += format_scalar(v[i]);
    }
    return out;
  }
};

template <typename T>
struct Field {
  std::string key;
  std::function<void(T&, std::string_view)> set;
  std::function<std::string(const T&)> get;
};

// `ref` is a generic lambda returning a reference to the member.
template <typename T, typename Ref>
Field<T> bind(std::string key, Ref ref) {
  using V = std::remove_cvref_t<decltype(ref(std::declval<T&>()))>;
  return Field<T>{std::move(key),
                  [ref](T& c, std::string_view s) { ref(c) = ValueTraits<V>::parse(s); },
                  [ref](const T& c) { return ValueTraits<V>::format(ref(c)); }};
}

template <typename T, typename Ref>
void add_optimizer_fields(std::vector<Field<T>>& f, const std::string& prefix, Ref opt) {
  f.push_back(bind<T>(prefix + ".kind", [opt](auto& c) -> auto& { return opt(c).kind; }));
  f.push_back(bind<T>(prefix + ".lr", [opt](auto& c) -> auto& { return opt(c).lr; }));
  f.push_back(bind<T>(prefix + ".momentum", [opt](auto& c) -> auto& { return opt(c).momentum; }));
  f.push_back(bind<T>(prefix + ".beta1", [opt](auto& c) -> auto& { return opt(c).beta1; }));
  f.push_back(bind<T>(prefix + ".beta2", [opt](auto& c) -> auto& { return opt(c).beta2; }));
  f.push_back(bind<T>(prefix + ".tau", [opt](auto& c) -> auto& { return opt(c).tau; }));
}

using E = ExperimentConfig;

const std::vector<Field<E>>& experiment_fields() {
  static const std::vector<Field<E>> fields = [] {
    std::vector<Field<E>> f;
    f.push_back(bind<E>("task", [](auto& c) -> auto& { return c.task; }));
    f.push_back(bind<E>("rounds", [](auto& c) -> auto& { return c.rounds; }));
    f.push_back(bind<E>("seed", [](auto& c) -> auto& { return c.master_seed; }));
    f.push_back(bind<E>("output_dir", [](auto& c) -> auto& { return c.output_dir; }));
    f.push_back(bind<E>("data.num_clients", [](auto& c) -> auto& { return c.data.num_clients; }));
    f.push_back(bind<E>("data.examples_per_client", [](auto& c) -> auto& { return c.data.examples_per_client; }));
    f.push_back(bind<E>("data.dim", [](auto& c) -> auto& { return c.data.dim; }));
    f.push_back(bind<E>("data.num_classes", [](auto& c) -> auto& { return c.data.num_classes; }));
    f.push_back(bind<E>("data.noise_std", [](auto& c) -> auto& { return c.data.noise_std; }));
    f.push_back(bind<E>("data.heterogeneity", [](auto& c) -> auto& { return c.data.heterogeneity; }));
    f.push_back(bind<E>("data.gradient_noise_std", [](auto& c) -> auto& { return c.data.gradient_noise_std; }));
    f.push_back(bind<E>("round.cohort_size", [](auto& c) -> auto& { return c.round.cohort_size; }));
    f.push_back(bind<E>("round.local_steps", [](auto& c) -> auto& { return c.round.local_steps; }));
    f.push_back(bind<E>("round.local_epochs", [](auto& c) -> auto& { return c.round.local_epochs; }));
    f.push_back(bind<E>("round.batch_size", [](auto& c) -> auto& { return c.round.batch_size; }));
    f.push_back(bind<E>("round.client_update", [](auto& c) -> auto& { return c.round.client_update; }));
    f.push_back(bind<E>("round.burn_in_rounds", [](auto& c) -> auto& { return c.round.burn_in_rounds; }));
    f.push_back(bind<E>("sampler.burn_in_steps", [](auto& c) -> auto& { return c.round.sampler.burn_in_steps; }));
    f.push_back(bind<E>("sampler.steps_per_sample", [](auto& c) -> auto& { return c.round.sampler.steps_per_sample; }));
    f.push_back(bind<E>("sampler.num_samples", [](auto& c) -> auto& { return c.round.sampler.num_samples; }));
    f.push_back(bind<E>("shrinkage.rho", [](auto& c) -> auto& { return c.round.shrinkage.rho; }));
    f.push_back(bind<E>("shrinkage.epsilon", [](auto& c) -> auto& { return c.round.shrinkage.epsilon_denom; }));
    add_optimizer_fields<E>(f, "client_opt", [](auto& c) -> auto& { return c.round.client_opt; });
    add_optimizer_fields<E>(f, "server_opt", [](auto& c) -> auto& { return c.round.server_opt; });
    f.push_back(bind<E>("init.std", [](auto& c) -> auto& { return c.init_std; }));
    f.push_back(bind<E>("metrics.wall_clock", [](auto& c) -> auto& { return c.wall_clock; }));
    return f;
  }();
  return fields;
}

using S = SweepConfig;

const std::vector<Field<S>>& sweep_fields() {
  static const std::vector<Field<S>> fields = [] {
    std::vector<Field<S>> f;
    f.push_back(bind<S>("seed", [](auto& c) -> auto& { return c.seed; }));
    f.push_back(bind<S>("output_dir", [](auto& c) -> auto& { return c.output_dir; }));

    f.push_back(bind<S>("bias_variance.dim", [](auto& c) -> auto& { return c.bias_variance.dim; }));
    f.push_back(bind<S>("bias_variance.num_examples", [](auto& c) -> auto& { return c.bias_variance.num_examples; }));
    f.push_back(bind<S>("bias_variance.noise_std", [](auto& c) -> auto& { return c.bias_variance.noise_std; }));
    f.push_back(bind<S>("bias_variance.num_problems", [](auto& c) -> auto& { return c.bias_variance.num_problems; }));
    f.push_back(bind<S>("bias_variance.num_inits", [](auto& c) -> auto& { return c.bias_variance.num_inits; }));
    f.push_back(bind<S>("bias_variance.repeats", [](auto& c) -> auto& { return c.bias_variance.repeats; }));
    f.push_back(bind<S>("bias_variance.init_std", [](auto& c) -> auto& { return c.bias_variance.init_std; }));
    f.push_back(bind<S>("bias_variance.batch_size", [](auto& c) -> auto& { return c.bias_variance.batch_size; }));
    f.push_back(bind<S>("bias_variance.local_steps", [](auto& c) -> auto& { return c.bias_variance.local_steps_grid; }));
    f.push_back(bind<S>("bias_variance.fedavg_lr", [](auto& c) -> auto& { return c.bias_variance.fedavg_lr; }));
    f.push_back(bind<S>("bias_variance.samples", [](auto& c) -> auto& { return c.bias_variance.samples_grid; }));
    f.push_back(bind<S>("bias_variance.shrinkage", [](auto& c) -> auto& { return c.bias_variance.shrinkage_grid; }));
    f.push_back(bind<S>("bias_variance.num_samples", [](auto& c) -> auto& { return c.bias_variance.num_samples; }));
    f.push_back(bind<S>("bias_variance.rho", [](auto& c) -> auto& { return c.bias_variance.rho; }));
    f.push_back(bind<S>("bias_variance.fedpa_lr", [](auto& c) -> auto& { return c.bias_variance.fedpa_lr; }));
    f.push_back(bind<S>("bias_variance.burn_in_steps", [](auto& c) -> auto& { return c.bias_variance.burn_in_steps; }));
    f.push_back(bind<S>("bias_variance.steps_per_sample", [](auto& c) -> auto& { return c.bias_variance.steps_per_sample; }));
    f.push_back(bind<S>("bias_variance.sampling", [](auto& c) -> auto& { return c.bias_variance.sampling; }));

    f.push_back(bind<S>("ess.dims", [](auto& c) -> auto& { return c.ess.dims; }));
    f.push_back(bind<S>("ess.num_examples", [](auto& c) -> auto& { return c.ess.num_examples; }));
    f.push_back(bind<S>("ess.batch_size", [](auto& c) -> auto& { return c.ess.batch_size; }));
    f.push_back(bind<S>("ess.noise_std", [](auto& c) -> auto& { return c.ess.noise_std; }));
    f.push_back(bind<S>("ess.num_problems", [](auto& c) -> auto& { return c.ess.num_problems; }));
    f.push_back(bind<S>("ess.num_samples", [](auto& c) -> auto& { return c.ess.num_samples; }));
    f.push_back(bind<S>("ess.lr", [](auto& c) -> auto& { return c.ess.lr_grid; }));
    f.push_back(bind<S>("ess.burn_in", [](auto& c) -> auto& { return c.ess.burn_in_grid; }));
    f.push_back(bind<S>("ess.fixed_steps_per_sample", [](auto& c) -> auto& { return c.ess.fixed_steps_per_sample; }));
    f.push_back(bind<S>("ess.steps_per_sample", [](auto& c) -> auto& { return c.ess.steps_per_sample_grid; }));
    f.push_back(bind<S>("ess.fixed_burn_in", [](auto& c) -> auto& { return c.ess.fixed_burn_in; }));

    f.push_back(bind<S>("timing.dims", [](auto& c) -> auto& { return c.timing.dims; }));
    f.push_back(bind<S>("timing.num_examples", [](auto& c) -> auto& { return c.timing.num_examples; }));
    f.push_back(bind<S>("timing.batch_size", [](auto& c) -> auto& { return c.timing.batch_size; }));
    f.push_back(bind<S>("timing.local_epochs", [](auto& c) -> auto& { return c.timing.local_epochs; }));
    f.push_back(bind<S>("timing.num_samples", [](auto& c) -> auto& { return c.timing.num_samples; }));
    f.push_back(bind<S>("timing.lr", [](auto& c) -> auto& { return c.timing.lr; }));
    f.push_back(bind<S>("timing.rho", [](auto& c) -> auto& { return c.timing.rho; }));
    f.push_back(bind<S>("timing.repeats", [](auto& c) -> auto& { return c.timing.repeats; }));
    f.push_back(bind<S>("timing.warmup", [](auto& c) -> auto& { return c.timing.warmup; }));
    f.push_back(bind<S>("timing.memory_cap_bytes", [](auto& c) -> auto& { return c.timing.memory_cap_bytes; }));
    f.push_back(bind<S>("timing.methods", [](auto& c) -> auto& { return c.timing.methods; }));
    return f;
  }();
  return fields;
}

// Applies key-values to a default T. Returns key -> line for validation.
template <typename T>
std::map<std::string, std::size_t> apply(const std::vector<Field<T>>& fields,
                                         const std::vector<KeyValue>& kvs, T& cfg) {
  std::map<std::string, const Field<T>*> index;
  for (const auto& f : fields) index[f.key] = &f;
  std::map<std::string, std::size_t> lines;
  for (const auto& kv : kvs) {
    auto it = index.find(kv.key);
    if (it == index.end()) throw ConfigError("unknown key '" + kv.key + "'", kv.line);
    if (!lines.emplace(kv.key, kv.line).second) {
      throw ConfigError("duplicate key '" + kv.key + "' (first set on line " +
                            std::to_string(lines[kv.key]) + ")",
                        kv.line);
    }
    try {
      it->second->set(cfg, kv.value);
    } catch (const BadValue& e) {
      throw ConfigError(kv.key + ": " + e.message, kv.line);
    }
  }
  return lines;
}

template <typename T>
std::string serialize_fields(const std::vector<Field<T>>& fields, const T& cfg) {
  std::string out;
  for (const auto& f : fields) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

struct Violation {
  std::string key;
  std::string message;
};

void check(std::optional<Violation>& v, bool ok, const char* key, const std::string& message) {
  if (!v && !ok) v = Violation{key, message};
}

void check_optimizer(std::optional<Violation>& v, const OptimizerConfig& o,
                     const std::string& prefix) {
  if (v) return;
  if (!(o.lr > 0.0 && std::isfinite(o.lr))) v = Violation{prefix + ".lr", "must be finite and > 0"};
  else if (!(o.momentum >= 0.0 && o.momentum < 1.0)) v = Violation{prefix + ".momentum", "must be in [0, 1)"};
  else if (!(o.beta1 >= 0.0 && o.beta1 < 1.0)) v = Violation{prefix + ".beta1", "must be in [0, 1)"};
  else if (!(o.beta2 >= 0.0 && o.beta2 < 1.0)) v = Violation{prefix + ".beta2", "must be in [0, 1)"};
  else if (!(o.tau > 0.0)) v = Violation{prefix + ".tau", "must be > 0"};
}

std::optional<Violation> validate_experiment(const ExperimentConfig& c) {
  std::optional<Violation> v;
  const bool toy = c.task == Task::kToy2d;
  const std::size_t pool = toy ? 2 : c.data.num_clients;
  check(v, c.data.num_clients >= 1, "data.num_clients", "must be >= 1");
  check(v, c.data.examples_per_client >= 1, "data.examples_per_client", "must be >= 1");
  check(v, c.data.dim >= 1, "data.dim", "must be >= 1");
  check(v, c.task != Task::kSyntheticLogistic || c.data.num_classes >= 2, "data.num_classes",
        "must be >= 2 for synthetic_logistic");
  check(v, c.data.noise_std >= 0.0, "data.noise_std", "must be >= 0");
  check(v, c.data.heterogeneity >= 0.0, "data.heterogeneity", "must be >= 0");
  check(v, c.data.gradient_noise_std >= 0.0, "data.gradient_noise_std", "must be >= 0");
  check(v, c.round.cohort_size >= 1, "round.cohort_size", "must be >= 1");
  check(v, c.round.cohort_size <= pool, "round.cohort_size",
        "exceeds the number of clients (" + std::to_string(pool) + ")");
  check(v, c.round.local_steps >= 1 || c.round.local_epochs >= 1, "round.local_steps",
        "round.local_steps or round.local_epochs must be >= 1");
  const bool exact = c.round.client_update == ClientUpdateKind::kFedAvgExact ||
                     c.round.client_update == ClientUpdateKind::kFedPaExact;
  check(v, !exact || c.task != Task::kSyntheticLogistic, "round.client_update",
        "exact client updates need a closed-form posterior (not synthetic_logistic)");
  check(v, c.round.sampler.num_samples >= 1, "sampler.num_samples", "must be >= 1");
  check(v, c.round.shrinkage.rho >= 0.0, "shrinkage.rho", "must be >= 0");
  check(v, c.round.shrinkage.epsilon_denom >= 0.0, "shrinkage.epsilon", "must be >= 0");
  check_optimizer(v, c.round.client_opt, "client_opt");
  check_optimizer(v, c.round.server_opt, "server_opt");
  check(v, c.init_std >= 0.0, "init.std", "must be >= 0");
  return v;
}

std::optional<Violation> validate_sweep(const SweepConfig& c) {
  std::optional<Violation> v;
  const auto& b = c.bias_variance;
  check(v, b.dim >= 1, "bias_variance.dim", "must be >= 1");
  check(v, b.num_examples >= b.dim, "bias_variance.num_examples", "must be >= dim");
  check(v, b.noise_std > 0.0, "bias_variance.noise_std", "must be > 0");
  check(v, b.num_problems >= 1, "bias_variance.num_problems", "must be >= 1");
  check(v, b.num_inits >= 1, "bias_variance.num_inits", "must be >= 1");
  check(v, b.repeats >= 1, "bias_variance.repeats", "must be >= 1");
  check(v, b.fedavg_lr > 0.0, "bias_variance.fedavg_lr", "must be > 0");
  check(v, b.fedpa_lr > 0.0, "bias_variance.fedpa_lr", "must be > 0");
  check(v, b.rho >= 0.0, "bias_variance.rho", "must be >= 0");
  check(v, b.num_samples >= 1, "bias_variance.num_samples", "must be >= 1");
  for (auto s : b.samples_grid) check(v, s >= 1, "bias_variance.samples", "values must be >= 1");
  for (auto r : b.shrinkage_grid) check(v, r >= 0.0, "bias_variance.shrinkage", "values must be >= 0");
  const auto& e = c.ess;
  for (auto d : e.dims) check(v, d >= 1, "ess.dims", "values must be >= 1");
  check(v, e.num_problems >= 1, "ess.num_problems", "must be >= 1");
  check(v, e.num_samples >= 1, "ess.num_samples", "must be >= 1");
  for (auto lr : e.lr_grid) check(v, lr > 0.0, "ess.lr", "values must be > 0");
  check(v, e.fixed_steps_per_sample >= 1, "ess.fixed_steps_per_sample", "must be >= 1");
  for (auto k : e.steps_per_sample_grid) check(v, k >= 1, "ess.steps_per_sample", "values must be >= 1");
  const auto& t = c.timing;
  check(v, std::is_sorted(t.dims.begin(), t.dims.end()), "timing.dims", "must be sorted ascending");
  for (auto d : t.dims) check(v, d >= 1, "timing.dims", "values must be >= 1");
  check(v, t.repeats >= 5, "timing.repeats", "must be >= 5");
  check(v, t.num_samples >= 1, "timing.num_samples", "must be >= 1");
  check(v, t.lr >= 0.0, "timing.lr", "must be >= 0 (0 picks 0.5 / d)");
  for (const auto& m : t.methods) {
    check(v, m == "fedavg_delta" || m == "dp_delta" || m == "dense_delta", "timing.methods",
          "unknown method '" + m + "'");
  }
  return v;
}

template <typename T>
void raise(const std::optional<Violation>& v, const std::map<std::string, std::size_t>& lines) {
  if (!v) return;
  const auto it = lines.find(v->key);
  throw ConfigError(v->key + " " + v->message, it == lines.end() ? 0 : it->second);
}

std::ifstream open_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'", 0);
  return in;
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::istream& in) {
  std::vector<KeyValue> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view s(raw);
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("expected 'key = value', got '" + std::string(s) + "'", line);
    }
    const std::string key(trim(s.substr(0, eq)));
    if (key.empty()) throw ConfigError("empty key", line);
    out.push_back({key, std::string(trim(s.substr(eq + 1))), line});
  }
  return out;
}

const char* to_string(Task task) {
  switch (task) {
    case Task::kToy2d: return "toy2d";
    case Task::kSyntheticLsq: return "synthetic_lsq";
    case Task::kSyntheticLogistic: return "synthetic_logistic";
  }
  return "unknown";
}

Task task_from_string(const std::string& name) {
  if (name == "toy2d") return Task::kToy2d;
  if (name == "synthetic_lsq") return Task::kSyntheticLsq;
  if (name == "synthetic_logistic") return Task::kSyntheticLogistic;
  throw InvalidArgument("unknown task '" + name + "'");
}

ExperimentConfig parse_experiment_config(std::istream& in) {
  ExperimentConfig cfg;
  const auto lines = apply(experiment_fields(), parse_key_values(in), cfg);
  raise<ExperimentConfig>(validate_experiment(cfg), lines);
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  auto in = open_config(path);
  return parse_experiment_config(in);
}

std::string serialize(const ExperimentConfig& cfg) {
  return serialize_fields(experiment_fields(), cfg);
}

SweepConfig parse_sweep_config(std::istream& in) {
  SweepConfig cfg;
  const auto lines = apply(sweep_fields(), parse_key_values(in), cfg);
  raise<SweepConfig>(validate_sweep(cfg), lines);
  return cfg;
}

SweepConfig load_sweep_config(const std::string& path) {
  auto in = open_config(path);
  return parse_sweep_config(in);
}

std::string serialize(const SweepConfig& cfg) { return serialize_fields(sweep_fields(), cfg); }

}  // namespace fedpost
