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

// Experiment configuration, presets, multi-seed runs and sweeps.
//
// Output layout of run_experiment(cfg, dir):
//   dir/manifest.json        resolved config, seeds, tool version
//   dir/config.toml          resolved config in the input format
//   dir/seed_<s>.jsonl       one MetricsRecord per evaluated round
//   dir/aggregate.csv        per-round mean and sample std across seeds
//
// run_sweep(spec, dir) writes one such directory per grid point plus
// dir/sweep_summary.csv keyed by the swept values and dir/manifest.json.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedsampling/config.hpp"
#include "fedsampling/data.hpp"
#include "fedsampling/engine.hpp"
#include "fedsampling/error.hpp"
#include "fedsampling/ldp.hpp"
#include "fedsampling/model.hpp"
#include "fedsampling/sampling.hpp"

namespace fedsampling {

inline constexpr const char* kToolVersion = "fedsim 1.0.0";

struct DataSpec {
  std::size_t n = 20000;         // training samples
  std::size_t test_n = 4000;     // held-out samples from the same mixture
  std::size_t dim = 10;
  std::size_t num_classes = 2;
  double class_sep = 2.0;
  double offset = 0.0;

  bool operator==(const DataSpec&) const = default;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DataSpec data;
  PartitionSpec partition;
  ModelSpec model;
  SamplingPlan plan;
  LdpConfig ldp = LdpConfig::from_budget(3.0, 300);
  double eta = 0.05;
  std::size_t rounds = 100;
  std::size_t eval_every = 10;
  std::vector<std::uint64_t> seeds{1};
  std::string out = "results";
};

namespace detail {

inline const toml::Value& need(const toml::Table& t, const std::string& key) {
  auto it = t.find(key);
  if (it == t.end()) throw InvalidArgument("config: missing key '" + key + "'");
  return it->second;
}

inline std::int64_t get_int(const toml::Table& t, const std::string& key, std::int64_t def) {
  auto it = t.find(key);
  if (it == t.end()) return def;
  if (auto p = std::get_if<std::int64_t>(&it->second.v)) return *p;
  throw InvalidArgument("config: '" + key + "' must be an integer");
}

inline std::size_t get_count(const toml::Table& t, const std::string& key, std::size_t def) {
  const auto v = get_int(t, key, static_cast<std::int64_t>(def));
  if (v < 0) throw InvalidArgument("config: '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

inline double get_real(const toml::Table& t, const std::string& key, double def) {
  auto it = t.find(key);
  if (it == t.end()) return def;
  if (auto p = std::get_if<double>(&it->second.v)) return *p;
  if (auto p = std::get_if<std::int64_t>(&it->second.v)) return static_cast<double>(*p);
  throw InvalidArgument("config: '" + key + "' must be a number");
}

inline bool get_bool(const toml::Table& t, const std::string& key, bool def) {
  auto it = t.find(key);
  if (it == t.end()) return def;
  if (auto p = std::get_if<bool>(&it->second.v)) return *p;
  throw InvalidArgument("config: '" + key + "' must be a boolean");
}

inline std::string get_str(const toml::Table& t, const std::string& key, const std::string& def) {
  auto it = t.find(key);
  if (it == t.end()) return def;
  if (auto p = std::get_if<std::string>(&it->second.v)) return *p;
  throw InvalidArgument("config: '" + key + "' must be a string");
}

inline const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "experiment.name", "experiment.rounds", "experiment.eval_every", "experiment.seeds", "experiment.out",
      "data.n", "data.test_n", "data.dim", "data.classes", "data.class_sep", "data.offset",
      "partition.scheme", "partition.num_clients", "partition.shard_size", "partition.sigma", "partition.mean_size",
      "model.kind", "model.hidden", "model.init_scale",
      "train.strategy", "train.eta", "train.K",
      "ldp.epsilon", "ldp.M", "ldp.strict_nonzero",
      "client_sampling.clients_per_round", "client_sampling.local_epochs", "client_sampling.batch_size",
      "client_sampling.server_lr",
      "fixed_ratio.r"};
  return keys;
}

}  // namespace detail

// Number of clients the partition will produce.
inline std::size_t client_count(const ExperimentConfig& cfg) {
  if (cfg.partition.scheme == PartitionScheme::kLabelShards)
    return (cfg.data.n + cfg.partition.shard_size - 1) / cfg.partition.shard_size;
  return cfg.partition.num_clients;
}

inline void validate(const ExperimentConfig& cfg) {
  using detail::require;
  require(cfg.data.n >= 1, "config: data.n must be >= 1");
  require(cfg.data.test_n >= 1, "config: data.test_n must be >= 1");
  require(cfg.data.dim >= 1, "config: data.dim must be >= 1");
  require(cfg.data.num_classes >= 2, "config: data.classes must be >= 2");
  cfg.partition.validate();
  if (cfg.partition.scheme == PartitionScheme::kLognormal) {
    const double derived = static_cast<double>(cfg.data.n) / static_cast<double>(cfg.partition.num_clients);
    require(std::abs(cfg.partition.mean_size - derived) <= 1e-9 * derived,
            "config: partition.mean_size must equal data.n / partition.num_clients");
  }
  require(cfg.model.input_dim == cfg.data.dim, "config: model input dimension must match data.dim");
  require(cfg.model.num_classes == cfg.data.num_classes, "config: model classes must match data.classes");
  cfg.model.validate();
  cfg.ldp.validate();
  require(cfg.eta > 0.0, "config: train.eta must be > 0");
  require(cfg.eval_every >= 1, "config: experiment.eval_every must be >= 1");
  require(!cfg.seeds.empty(), "config: experiment.seeds must be non-empty");
  const std::size_t H = client_count(cfg);
  cfg.plan.validate(H);
  if (cfg.plan.strategy == Strategy::kFedSampling || cfg.plan.strategy == Strategy::kCentralized)
    require(cfg.plan.K <= cfg.data.n, "config: train.K must not exceed data.n");
}

inline toml::Table to_table(const ExperimentConfig& cfg) {
  toml::Table t;
  t["experiment.name"] = cfg.name;
  t["experiment.rounds"] = static_cast<std::int64_t>(cfg.rounds);
  t["experiment.eval_every"] = static_cast<std::int64_t>(cfg.eval_every);
  toml::Array seeds;
  for (auto s : cfg.seeds) seeds.emplace_back(static_cast<std::int64_t>(s));
  t["experiment.seeds"] = seeds;
  t["experiment.out"] = cfg.out;
  t["data.n"] = static_cast<std::int64_t>(cfg.data.n);
  t["data.test_n"] = static_cast<std::int64_t>(cfg.data.test_n);
  t["data.dim"] = static_cast<std::int64_t>(cfg.data.dim);
  t["data.classes"] = static_cast<std::int64_t>(cfg.data.num_classes);
  t["data.class_sep"] = cfg.data.class_sep;
  t["data.offset"] = cfg.data.offset;
  t["partition.scheme"] = to_string(cfg.partition.scheme);
  t["partition.num_clients"] = static_cast<std::int64_t>(cfg.partition.num_clients);
  t["partition.shard_size"] = static_cast<std::int64_t>(cfg.partition.shard_size);
  t["partition.sigma"] = cfg.partition.sigma;
  t["partition.mean_size"] = cfg.partition.mean_size;
  t["model.kind"] = to_string(cfg.model.kind);
  t["model.hidden"] = static_cast<std::int64_t>(cfg.model.hidden);
  t["model.init_scale"] = cfg.model.init_scale;
  t["train.strategy"] = to_string(cfg.plan.strategy);
  t["train.eta"] = cfg.eta;
  t["train.K"] = static_cast<std::int64_t>(cfg.plan.K);
  t["ldp.epsilon"] = cfg.ldp.epsilon;
  t["ldp.M"] = cfg.ldp.M;
  t["ldp.strict_nonzero"] = cfg.ldp.strict_nonzero;
  t["client_sampling.clients_per_round"] = static_cast<std::int64_t>(cfg.plan.client.clients_per_round);
  t["client_sampling.local_epochs"] = static_cast<std::int64_t>(cfg.plan.client.local_epochs);
  t["client_sampling.batch_size"] = static_cast<std::int64_t>(cfg.plan.client.batch_size);
  t["client_sampling.server_lr"] = cfg.plan.client.server_lr;
  t["fixed_ratio.r"] = cfg.plan.ratio;
  return t;
}

// Missing keys take the defaults of ExperimentConfig; unknown keys are
// rejected. partition.mean_size, when absent, is derived as n / num_clients.
inline ExperimentConfig from_table(const toml::Table& t) {
  for (const auto& [k, v] : t) {
    const auto& keys = detail::known_keys();
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw InvalidArgument("config: unknown key '" + k + "'");
  }
  using namespace detail;
  ExperimentConfig c;
  c.name = get_str(t, "experiment.name", c.name);
  c.rounds = get_count(t, "experiment.rounds", c.rounds);
  c.eval_every = get_count(t, "experiment.eval_every", c.eval_every);
  if (auto it = t.find("experiment.seeds"); it != t.end()) {
    const auto* arr = std::get_if<toml::Array>(&it->second.v);
    if (!arr) throw InvalidArgument("config: 'experiment.seeds' must be an array");
    c.seeds.clear();
    for (const auto& s : *arr) {
      const auto* i = std::get_if<std::int64_t>(&s.v);
      if (!i || *i < 0) throw InvalidArgument("config: seeds must be non-negative integers");
      c.seeds.push_back(static_cast<std::uint64_t>(*i));
    }
  }
  c.out = get_str(t, "experiment.out", c.out);

  c.data.n = get_count(t, "data.n", c.data.n);
  c.data.test_n = get_count(t, "data.test_n", c.data.test_n);
  c.data.dim = get_count(t, "data.dim", c.data.dim);
  c.data.num_classes = get_count(t, "data.classes", c.data.num_classes);
  c.data.class_sep = get_real(t, "data.class_sep", c.data.class_sep);
  c.data.offset = get_real(t, "data.offset", c.data.offset);

  c.partition.scheme = parse_partition_scheme(get_str(t, "partition.scheme", to_string(c.partition.scheme)));
  c.partition.num_clients = get_count(t, "partition.num_clients", 10000);
  c.partition.shard_size = get_count(t, "partition.shard_size", c.partition.shard_size);
  c.partition.sigma = get_real(t, "partition.sigma", c.partition.sigma);
  const double derived = c.partition.num_clients
                             ? static_cast<double>(c.data.n) / static_cast<double>(c.partition.num_clients)
                             : 0.0;
  c.partition.mean_size = get_real(t, "partition.mean_size", derived);

  c.model.kind = parse_model_kind(get_str(t, "model.kind", to_string(c.model.kind)));
  c.model.input_dim = c.data.dim;
  c.model.num_classes = c.data.num_classes;
  c.model.hidden = get_count(t, "model.hidden", c.model.hidden);
  c.model.init_scale = get_real(t, "model.init_scale", c.model.init_scale);

  c.plan.strategy = parse_strategy(get_str(t, "train.strategy", to_string(c.plan.strategy)));
  c.eta = get_real(t, "train.eta", c.eta);
  c.plan.K = get_count(t, "train.K", c.plan.K);

  const double eps = get_real(t, "ldp.epsilon", c.ldp.epsilon);
  const auto M = get_int(t, "ldp.M", c.ldp.M);
  require(eps > 0.0, "config: ldp.epsilon must be > 0");
  require(M >= 2, "config: ldp.M must be >= 2");
  c.ldp = LdpConfig::from_budget(eps, M, get_bool(t, "ldp.strict_nonzero", false));

  c.plan.client.clients_per_round = get_count(t, "client_sampling.clients_per_round", c.plan.client.clients_per_round);
  c.plan.client.local_epochs = get_count(t, "client_sampling.local_epochs", c.plan.client.local_epochs);
  c.plan.client.batch_size = get_count(t, "client_sampling.batch_size", c.plan.client.batch_size);
  c.plan.client.server_lr = get_real(t, "client_sampling.server_lr", c.plan.client.server_lr);
  c.plan.ratio = get_real(t, "fixed_ratio.r", c.plan.ratio);
  return c;
}

inline bool same_config(const ExperimentConfig& a, const ExperimentConfig& b) { return to_table(a) == to_table(b); }

inline ExperimentConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("config not found: " + path);
  return from_table(toml::parse_file(path));
}

inline std::string serialize_config(const ExperimentConfig& cfg) { return toml::serialize(to_table(cfg)); }

// key=value override using the config value grammar, e.g. "train.K=512".
inline ExperimentConfig apply_override(const ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw InvalidArgument("override must be key=value: " + assignment);
  auto t = to_table(cfg);
  const std::string key = toml::detail::trim(assignment.substr(0, eq));
  t[key] = toml::parse_value(toml::detail::trim(assignment.substr(eq + 1)));
  if (key == "data.n" || key == "partition.num_clients") t.erase("partition.mean_size");
  return from_table(t);
}

// ---------------------------------------------------------------------------
// Running

struct World {
  Dataset train;
  Dataset test;
  std::vector<ClientDataset> clients;
};

// Train and test sets are drawn in one pass from the same mixture so they
// share class means; the first n samples train, the rest test.
inline World build_world(const ExperimentConfig& cfg, std::uint64_t seed) {
  auto data_stream = derive(seed, {{"data", 0}});
  Dataset all = make_synthetic_classification(cfg.data.n + cfg.data.test_n, cfg.data.dim, cfg.data.num_classes,
                                              cfg.data.class_sep, data_stream, cfg.data.offset);
  World w;
  w.train.dim = w.test.dim = all.dim;
  w.train.num_classes = w.test.num_classes = all.num_classes;
  w.train.samples.assign(all.samples.begin(), all.samples.begin() + static_cast<std::ptrdiff_t>(cfg.data.n));
  w.test.samples.assign(all.samples.begin() + static_cast<std::ptrdiff_t>(cfg.data.n), all.samples.end());
  auto part_stream = derive(seed, {{"partition", 0}});
  w.clients = partition(w.train, cfg.partition, part_stream);
  return w;
}

inline TrainConfig train_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  TrainConfig tc;
  tc.model = cfg.model;
  tc.plan = cfg.plan;
  tc.ldp = cfg.ldp;
  tc.eta = cfg.eta;
  tc.rounds = cfg.rounds;
  tc.eval_every = cfg.eval_every;
  tc.seed = seed;
  return tc;
}

inline TrainResult run_single(const ExperimentConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const World w = build_world(cfg, seed);
  return train(train_config(cfg, seed), w.clients, w.test);
}

inline nlohmann::json to_json(const MetricsRecord& r) {
  return {{"round", r.round},           {"train_loss", r.train_loss},     {"accuracy", r.accuracy},
          {"macro_f1", r.macro_f1},     {"eval_loss", r.eval_loss},       {"samples_used", r.samples_used},
          {"n_est", r.n_est}};
}

inline MetricsRecord metrics_from_json(const nlohmann::json& j) {
  MetricsRecord r;
  r.round = j.at("round").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.eval_loss = j.at("eval_loss").get<double>();
  r.samples_used = j.at("samples_used").get<std::size_t>();
  r.n_est = j.at("n_est").get<double>();
  return r;
}

inline nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : to_table(cfg)) {
    struct V {
      nlohmann::json operator()(bool b) const { return b; }
      nlohmann::json operator()(std::int64_t i) const { return i; }
      nlohmann::json operator()(double d) const { return d; }
      nlohmann::json operator()(const std::string& s) const { return s; }
      nlohmann::json operator()(const toml::Array& a) const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& x : a) arr.push_back(std::visit(V{}, x.v));
        return arr;
      }
    };
    j[k] = std::visit(V{}, v.v);
  }
  return j;
}

struct Stat {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation; 0 for a single value
};

inline Stat summarize(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct AggregateRow {
  std::size_t round = 0;
  std::size_t seeds = 0;
  Stat accuracy, macro_f1, eval_loss, train_loss, samples_used;
};

inline std::vector<AggregateRow> aggregate(const std::vector<std::vector<MetricsRecord>>& runs) {
  std::vector<AggregateRow> rows;
  if (runs.empty()) return rows;
  const std::size_t len = runs.front().size();
  for (const auto& r : runs)
    detail::require(r.size() == len, "aggregate: runs have different lengths");
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<double> acc, f1, el, tl, su;
    for (const auto& r : runs) {
      acc.push_back(r[i].accuracy);
      f1.push_back(r[i].macro_f1);
      el.push_back(r[i].eval_loss);
      tl.push_back(r[i].train_loss);
      su.push_back(static_cast<double>(r[i].samples_used));
    }
    rows.push_back({runs.front()[i].round, runs.size(), summarize(acc), summarize(f1), summarize(el), summarize(tl),
                    summarize(su)});
  }
  return rows;
}

inline constexpr const char* kAggregateHeader =
    "round,seeds,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,eval_loss_mean,eval_loss_std,"
    "train_loss_mean,train_loss_std,samples_used_mean,samples_used_std";

inline std::string format_real(double d) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, p);
}

struct ExperimentResult {
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<MetricsRecord>> histories;
  std::vector<AggregateRow> aggregate;
};

namespace detail {

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + p.string());
  out << text;
  if (!out) throw IoError("write failed: " + p.string());
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  validate(cfg);
  std::filesystem::create_directories(dir);
  ExperimentResult res;
  res.seeds = cfg.seeds;
  nlohmann::json files = nlohmann::json::array();
  for (auto seed : cfg.seeds) {
    auto tr = run_single(cfg, seed);
    std::string lines;
    for (const auto& rec : tr.history) {
      auto j = to_json(rec);
      j["seed"] = seed;
      j["strategy"] = to_string(cfg.plan.strategy);
      lines += j.dump() + "\n";
    }
    const std::string fname = "seed_" + std::to_string(seed) + ".jsonl";
    detail::write_text(dir / fname, lines);
    files.push_back(fname);
    res.histories.push_back(std::move(tr.history));
  }
  res.aggregate = aggregate(res.histories);

  std::string csv = std::string(kAggregateHeader) + "\n";
  for (const auto& r : res.aggregate) {
    csv += std::to_string(r.round) + "," + std::to_string(r.seeds);
    for (const Stat* s : {&r.accuracy, &r.macro_f1, &r.eval_loss, &r.train_loss, &r.samples_used})
      csv += "," + format_real(s->mean) + "," + format_real(s->sd);
    csv += "\n";
  }
  detail::write_text(dir / "aggregate.csv", csv);
  detail::write_text(dir / "config.toml", serialize_config(cfg));
  files.push_back("aggregate.csv");
  nlohmann::json manifest = {{"tool", kToolVersion}, {"kind", "experiment"}, {"config", config_json(cfg)},
                             {"seeds", cfg.seeds}, {"files", files}};
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return res;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepAxis {
  std::string key;  // flattened config key, e.g. "partition.sigma"
  std::vector<toml::Value> values;
};

struct SweepSpec {
  ExperimentConfig base;
  std::vector<SweepAxis> axes;  // zero to two
  std::size_t cap = 64;
};

struct SweepPoint {
  std::string name;
  std::vector<toml::Value> values;  // one per axis
  ExperimentConfig config;
};

inline std::string value_label(const toml::Value& v) {
  if (auto s = std::get_if<std::string>(&v.v)) return *s;
  if (auto d = std::get_if<double>(&v.v)) return format_real(*d);
  return toml::format_value(v);
}

inline std::vector<SweepPoint> expand(const SweepSpec& spec) {
  detail::require(spec.axes.size() <= 2, "sweep: at most two axes");
  std::size_t count = 1;
  for (const auto& a : spec.axes) {
    detail::require(!a.values.empty(), "sweep: axis '" + a.key + "' has no values");
    count *= a.values.size();
  }
  detail::require(count <= spec.cap, "sweep: " + std::to_string(count) + " grid points exceed cap " +
                                         std::to_string(spec.cap));
  std::vector<SweepPoint> points;
  if (spec.axes.empty()) {
    points.push_back({"base", {}, spec.base});
    return points;
  }
  const auto base = to_table(spec.base);
  const std::size_t n2 = spec.axes.size() == 2 ? spec.axes[1].values.size() : 1;
  for (const auto& v1 : spec.axes[0].values) {
    for (std::size_t j = 0; j < n2; ++j) {
      auto t = base;
      SweepPoint p;
      t[spec.axes[0].key] = v1;
      p.values.push_back(v1);
      p.name = spec.axes[0].key + "=" + value_label(v1);
      if (spec.axes.size() == 2) {
        const auto& v2 = spec.axes[1].values[j];
        t[spec.axes[1].key] = v2;
        p.values.push_back(v2);
        p.name += "__" + spec.axes[1].key + "=" + value_label(v2);
      }
      for (const auto& a : spec.axes)
        if (a.key == "data.n" || a.key == "partition.num_clients") t.erase("partition.mean_size");
      p.config = from_table(t);
      validate(p.config);
      points.push_back(std::move(p));
    }
  }
  return points;
}

// Sweep files are experiment files with an extra [sweep] table:
//   [sweep]
//   cap = 64
//   axis1 = "partition.sigma"
//   values1 = [0.0, 2.0, 4.0]
//   axis2 = "train.strategy"          (optional)
//   values2 = ["fedsampling", "centralized"]
inline SweepSpec sweep_from_table(toml::Table t) {
  SweepSpec spec;
  spec.cap = static_cast<std::size_t>(detail::get_int(t, "sweep.cap", 64));
  for (int i = 1; i <= 2; ++i) {
    const std::string ak = "sweep.axis" + std::to_string(i), vk = "sweep.values" + std::to_string(i);
    if (!t.count(ak)) {
      if (t.count(vk)) throw InvalidArgument("sweep: '" + vk + "' given without '" + ak + "'");
      continue;
    }
    SweepAxis axis;
    axis.key = detail::get_str(t, ak, "");
    const auto& keys = detail::known_keys();
    if (std::find(keys.begin(), keys.end(), axis.key) == keys.end())
      throw InvalidArgument("sweep: unknown axis key '" + axis.key + "'");
    const auto* arr = std::get_if<toml::Array>(&detail::need(t, vk).v);
    if (!arr) throw InvalidArgument("sweep: '" + vk + "' must be an array");
    axis.values = *arr;
    spec.axes.push_back(std::move(axis));
  }
  for (auto it = t.begin(); it != t.end();) {
    if (it->first.rfind("sweep.", 0) == 0) {
      static const std::vector<std::string> allowed = {"sweep.cap", "sweep.axis1", "sweep.values1", "sweep.axis2",
                                                       "sweep.values2"};
      if (std::find(allowed.begin(), allowed.end(), it->first) == allowed.end())
        throw InvalidArgument("sweep: unknown key '" + it->first + "'");
      it = t.erase(it);
    } else {
      ++it;
    }
  }
  spec.base = from_table(t);
  return spec;
}

inline toml::Table sweep_to_table(const SweepSpec& spec) {
  auto t = to_table(spec.base);
  t["sweep.cap"] = static_cast<std::int64_t>(spec.cap);
  for (std::size_t i = 0; i < spec.axes.size(); ++i) {
    t["sweep.axis" + std::to_string(i + 1)] = spec.axes[i].key;
    t["sweep.values" + std::to_string(i + 1)] = toml::Array(spec.axes[i].values);
  }
  return t;
}

inline SweepSpec load_sweep(const std::string& path) {
  if (!std::filesystem::exists(path)) throw IoError("config not found: " + path);
  return sweep_from_table(toml::parse_file(path));
}

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<ExperimentResult> results;
};

inline SweepResult run_sweep(const SweepSpec& spec, const std::filesystem::path& dir) {
  SweepResult res;
  res.points = expand(spec);  // validates everything before any compute
  std::filesystem::create_directories(dir);

  std::string header;
  for (const auto& a : spec.axes) header += a.key + ",";
  header += "point,final_round,seeds,accuracy_mean,accuracy_std,macro_f1_mean,macro_f1_std,eval_loss_mean,eval_loss_std";
  std::string csv = header + "\n";
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : res.points) {
    auto r = run_experiment(p.config, dir / p.name);
    for (const auto& v : p.values) csv += value_label(v) + ",";
    csv += p.name + ",";
    if (r.aggregate.empty()) {
      csv += "0," + std::to_string(p.config.seeds.size()) + ",,,,,,\n";
    } else {
      const auto& last = r.aggregate.back();
      csv += std::to_string(last.round) + "," + std::to_string(last.seeds);
      for (const Stat* s : {&last.accuracy, &last.macro_f1, &last.eval_loss})
        csv += "," + format_real(s->mean) + "," + format_real(s->sd);
      csv += "\n";
    }
    points.push_back(p.name);
    res.results.push_back(std::move(r));
  }
  detail::write_text(dir / "sweep_summary.csv", csv);
  nlohmann::json axes = nlohmann::json::array();
  for (const auto& a : spec.axes) axes.push_back(a.key);
  nlohmann::json manifest = {{"tool", kToolVersion}, {"kind", "sweep"},   {"base", config_json(spec.base)},
                             {"axes", axes},         {"points", points}, {"cap", spec.cap}};
  detail::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return res;
}

}  // namespace fedsampling
