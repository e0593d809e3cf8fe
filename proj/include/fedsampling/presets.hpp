// Copyright 2026 The FedSampling Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Built-in experiment presets at synthetic desk scale.
//
// Hyperparameters that are not protocol defaults (data geometry, model,
// rounds, clients per round for the client-sampling baselines) were chosen so
// the centralized arm reaches its accuracy plateau within the round budget.
//
//   imbalanced        2-class task, n = 20000 over H = 10000 long-tail
//                     clients (sigma = 4, mean size 2), FedSampling.
//   sigma-sweep       imbalanced base, sigma x {fedsampling, uniform_client,
//                     centralized}.
//   noniid            10 classes sorted into single-label shards of 300,
//                     {centralized, fedsampling, uniform_client}.
//   privacy-tradeoff  n = 100000 over H = 10000 clients (sigma = 1, mean
//                     size 10), epsilon x M grid.

#include <string>
#include <vector>

#include "fedsampling/harness.hpp"

namespace fedsampling {

inline ExperimentConfig imbalanced_preset() {
  ExperimentConfig c;
  c.name = "imbalanced";
  c.data = {20000, 4000, 10, 2, 2.0, 0.0};
  c.partition.scheme = PartitionScheme::kLognormal;
  c.partition.num_clients = 10000;
  c.partition.sigma = 4.0;
  c.partition.mean_size = 2.0;
  c.model = {ModelKind::kLinear, 10, 2, 0, 1.0};
  c.plan.strategy = Strategy::kFedSampling;
  c.plan.K = 2048;
  c.plan.client = {100, 1, 0, 1.0};
  c.plan.ratio = 0.01;
  c.ldp = LdpConfig::from_budget(3.0, 300);
  c.eta = 0.05;
  c.rounds = 200;
  c.eval_every = 10;
  c.seeds = {1, 2, 3, 4, 5};
  c.out = "results/imbalanced";
  return c;
}

inline std::vector<toml::Value> strings(std::initializer_list<const char*> xs) {
  std::vector<toml::Value> out;
  for (auto* x : xs) out.emplace_back(x);
  return out;
}

inline std::vector<toml::Value> reals(std::initializer_list<double> xs) {
  std::vector<toml::Value> out;
  for (double x : xs) out.emplace_back(x);
  return out;
}

inline std::vector<toml::Value> ints(std::initializer_list<std::int64_t> xs) {
  std::vector<toml::Value> out;
  for (auto x : xs) out.emplace_back(x);
  return out;
}

inline SweepSpec sigma_sweep_preset() {
  SweepSpec s;
  s.base = imbalanced_preset();
  s.base.name = "sigma-sweep";
  s.base.out = "results/sigma-sweep";
  s.axes = {{"partition.sigma", reals({0.0, 2.0, 4.0})},
            {"train.strategy", strings({"fedsampling", "uniform_client", "centralized"})}};
  return s;
}

inline SweepSpec noniid_preset() {
  SweepSpec s;
  ExperimentConfig& c = s.base;
  c.name = "noniid";
  c.data = {30000, 2000, 20, 10, 3.0, 0.0};
  c.partition.scheme = PartitionScheme::kLabelShards;
  c.partition.shard_size = 300;
  c.partition.num_clients = 100;
  c.partition.mean_size = 300.0;
  c.model = {ModelKind::kLinear, 20, 10, 0, 1.0};
  c.plan.strategy = Strategy::kFedSampling;
  c.plan.K = 2048;
  c.plan.client = {7, 1, 0, 1.0};
  c.plan.ratio = 0.07;
  c.ldp = LdpConfig::from_budget(3.0, 300);
  c.eta = 0.05;
  c.rounds = 300;
  c.eval_every = 1;
  c.seeds = {1, 2, 3, 4, 5};
  c.out = "results/noniid";
  s.axes = {{"train.strategy", strings({"centralized", "fedsampling", "uniform_client"})}};
  return s;
}

inline SweepSpec privacy_tradeoff_preset() {
  SweepSpec s;
  ExperimentConfig& c = s.base;
  c.name = "privacy-tradeoff";
  c.data = {100000, 4000, 10, 2, 2.0, 2.0};
  c.partition.scheme = PartitionScheme::kLognormal;
  c.partition.num_clients = 10000;
  c.partition.sigma = 1.0;
  c.partition.mean_size = 10.0;
  c.model = {ModelKind::kLinear, 10, 2, 0, 1.0};
  c.plan.strategy = Strategy::kFedSampling;
  c.plan.K = 2048;
  c.plan.client = {200, 1, 0, 1.0};
  c.ldp = LdpConfig::from_budget(3.0, 100);
  c.eta = 0.05;
  c.rounds = 200;
  c.eval_every = 10;
  c.seeds = {1, 2, 3, 4, 5};
  c.out = "results/privacy-tradeoff";
  s.axes = {{"ldp.epsilon", reals({0.5, 1.0, 3.0, 8.0})}, {"ldp.M", ints({2, 100, 10000})}};
  return s;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"imbalanced", "sigma-sweep", "noniid", "privacy-tradeoff"};
  return names;
}

// Every preset as a sweep; "imbalanced" has no axes.
inline SweepSpec preset(const std::string& name) {
  if (name == "imbalanced") return SweepSpec{imbalanced_preset(), {}, 64};
  if (name == "sigma-sweep") return sigma_sweep_preset();
  if (name == "noniid") return noniid_preset();
  if (name == "privacy-tradeoff") return privacy_tradeoff_preset();
  throw InvalidArgument("unknown preset: " + name);
}

}  // namespace fedsampling
