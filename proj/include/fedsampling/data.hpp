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

// Synthetic classification data and the client partitioners.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "fedsampling/error.hpp"
#include "fedsampling/rng.hpp"

namespace fedsampling {

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;
  // Position in the generating dataset; partitions preserve it so that
  // multiset identity can be checked.
  std::size_t id = 0;
};

struct Dataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
};

// One client's private data. Its size is privacy-sensitive: the engine only
// hands it to client-side code (size response, local selection).
struct ClientDataset {
  std::size_t client_id = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
};

enum class PartitionScheme { kLognormal, kLabelShards, kIid };

struct PartitionSpec {
  PartitionScheme scheme = PartitionScheme::kLognormal;
  std::size_t num_clients = 1;  // lognormal / iid
  std::size_t shard_size = 1;   // label_shards
  double sigma = 0.0;           // lognormal
  double mean_size = 2.0;       // lognormal; must equal n / num_clients

  void validate() const {
    switch (scheme) {
      case PartitionScheme::kLognormal:
        detail::require(num_clients >= 1, "partition: num_clients must be >= 1");
        detail::require(sigma >= 0.0, "partition: sigma must be >= 0");
        detail::require(mean_size > 0.0, "partition: mean_size must be > 0");
        break;
      case PartitionScheme::kLabelShards:
        detail::require(shard_size >= 1, "partition: shard_size must be >= 1");
        break;
      case PartitionScheme::kIid:
        detail::require(num_clients >= 1, "partition: num_clients must be >= 1");
        break;
    }
  }
};

inline const char* to_string(PartitionScheme s) {
  switch (s) {
    case PartitionScheme::kLognormal: return "lognormal";
    case PartitionScheme::kLabelShards: return "label_shards";
    case PartitionScheme::kIid: return "iid";
  }
  return "?";
}

inline PartitionScheme parse_partition_scheme(const std::string& s) {
  if (s == "lognormal") return PartitionScheme::kLognormal;
  if (s == "label_shards") return PartitionScheme::kLabelShards;
  if (s == "iid") return PartitionScheme::kIid;
  throw InvalidArgument("unknown partition scheme: " + s);
}

// Gaussian mixture with one unit-covariance component per class. Class k is
// centred at (class_sep / sqrt(2)) * e_k + offset * 1 when L <= d, so every
// pair of means is exactly class_sep apart. For L > d the means are random
// directions of the same norm. Labels cycle 0, 1, ..., L-1.
inline Dataset make_synthetic_classification(std::size_t n, std::size_t d, std::size_t num_classes,
                                             double class_sep, RandomStream& stream,
                                             double offset = 0.0) {
  detail::require(n >= 1, "make_synthetic_classification: n must be >= 1");
  detail::require(d >= 1, "make_synthetic_classification: d must be >= 1");
  detail::require(num_classes >= 2, "make_synthetic_classification: need at least 2 classes");

  const double radius = class_sep / std::sqrt(2.0);
  std::vector<std::vector<double>> means(num_classes, std::vector<double>(d, offset));
  for (std::size_t k = 0; k < num_classes; ++k) {
    if (num_classes <= d) {
      means[k][k] += radius;
    } else {
      std::vector<double> dir(d);
      double norm2 = 0.0;
      for (auto& x : dir) {
        x = stream.standard_normal();
        norm2 += x * x;
      }
      const double scale = radius / std::sqrt(std::max(norm2, 1e-300));
      for (std::size_t j = 0; j < d; ++j) means[k][j] += dir[j] * scale;
    }
  }

  Dataset ds;
  ds.dim = d;
  ds.num_classes = num_classes;
  ds.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample& s = ds.samples[i];
    s.id = i;
    s.label = i % num_classes;
    s.features.resize(d);
    for (std::size_t j = 0; j < d; ++j) s.features[j] = means[s.label][j] + stream.standard_normal();
  }
  return ds;
}

namespace detail {

inline std::vector<ClientDataset> assign_by_sizes(const Dataset& ds, const std::vector<std::size_t>& order,
                                                  const std::vector<std::size_t>& sizes) {
  std::vector<ClientDataset> clients(sizes.size());
  std::size_t pos = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    clients[c].client_id = c;
    clients[c].samples.reserve(sizes[c]);
    for (std::size_t k = 0; k < sizes[c]; ++k) clients[c].samples.push_back(ds.samples[order[pos++]]);
  }
  return clients;
}

}  // namespace detail

// Largest-remainder allocation of n items proportionally to weights. Ties in
// the fractional part go to the lower index.
inline std::vector<std::size_t> allocate_proportional(std::size_t n, const std::vector<double>& weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  detail::require(total > 0.0 && std::isfinite(total), "allocate_proportional: weights must sum to a finite positive value");
  std::vector<std::size_t> sizes(weights.size());
  std::vector<double> frac(weights.size());
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    const double share = static_cast<double>(n) * (weights[c] / total);
    const double fl = std::floor(share);
    sizes[c] = static_cast<std::size_t>(fl);
    frac[c] = share - fl;
    assigned += sizes[c];
  }
  // Floating rounding can overshoot by a few units; trim from the largest.
  while (assigned > n) {
    auto it = std::max_element(sizes.begin(), sizes.end());
    --*it;
    --assigned;
  }
  std::vector<std::size_t> idx(weights.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return frac[a] > frac[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % idx.size()) {
    ++sizes[idx[k]];
    ++assigned;
  }
  return sizes;
}

// Long-tail partition: weights w_c = exp(sigma * Z_c), sizes allocated by
// largest remainder so the sizes sum to exactly n, samples dealt out after a
// random shuffle.
inline std::vector<ClientDataset> partition_lognormal(const Dataset& ds, std::size_t num_clients, double sigma,
                                                      double mean_size, RandomStream& stream) {
  detail::require(num_clients >= 1, "partition_lognormal: num_clients must be >= 1");
  detail::require(!ds.empty(), "partition_lognormal: dataset is empty");
  detail::require(sigma >= 0.0, "partition_lognormal: sigma must be >= 0");
  const double derived = static_cast<double>(ds.size()) / static_cast<double>(num_clients);
  detail::require(std::abs(mean_size - derived) <= 1e-9 * derived,
                  "partition_lognormal: mean_size must equal n / num_clients (" + std::to_string(derived) + ")");

  // Log-weights are shifted by their max before exponentiating so large sigma
  // cannot overflow.
  std::vector<double> logw(num_clients);
  for (auto& lw : logw) lw = sigma * stream.standard_normal();
  const double mx = *std::max_element(logw.begin(), logw.end());
  std::vector<double> w(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c) w[c] = std::exp(logw[c] - mx);
  const auto sizes = allocate_proportional(ds.size(), w);

  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  stream.shuffle(order);
  return detail::assign_by_sizes(ds, order, sizes);
}

// Label-sorted shards of shard_size consecutive samples; the last shard may
// be smaller. Ties in the sort are broken by sample id so the result does not
// depend on input order.
inline std::vector<ClientDataset> partition_label_shards(const Dataset& ds, std::size_t shard_size) {
  detail::require(shard_size >= 1, "partition_label_shards: shard_size must be >= 1");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Sample& sa = ds.samples[a];
    const Sample& sb = ds.samples[b];
    if (sa.label != sb.label) return sa.label < sb.label;
    return sa.id < sb.id;
  });
  std::vector<std::size_t> sizes;
  for (std::size_t left = ds.size(); left > 0;) {
    const std::size_t s = std::min(left, shard_size);
    sizes.push_back(s);
    left -= s;
  }
  return detail::assign_by_sizes(ds, order, sizes);
}

// Random shuffle then round-robin dealing.
inline std::vector<ClientDataset> partition_iid(const Dataset& ds, std::size_t num_clients, RandomStream& stream) {
  detail::require(num_clients >= 1, "partition_iid: num_clients must be >= 1");
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  stream.shuffle(order);
  std::vector<ClientDataset> clients(num_clients);
  for (std::size_t c = 0; c < num_clients; ++c) clients[c].client_id = c;
  for (std::size_t i = 0; i < order.size(); ++i) clients[i % num_clients].samples.push_back(ds.samples[order[i]]);
  return clients;
}

inline std::vector<ClientDataset> partition(const Dataset& ds, const PartitionSpec& spec, RandomStream& stream) {
  spec.validate();
  switch (spec.scheme) {
    case PartitionScheme::kLognormal:
      return partition_lognormal(ds, spec.num_clients, spec.sigma, spec.mean_size, stream);
    case PartitionScheme::kLabelShards:
      return partition_label_shards(ds, spec.shard_size);
    case PartitionScheme::kIid:
      return partition_iid(ds, spec.num_clients, stream);
  }
  throw InvalidArgument("partition: unknown scheme");
}

// Gini coefficient of a list of non-negative sizes (0 = perfectly equal).
inline double gini(std::vector<std::size_t> sizes) {
  if (sizes.empty()) return 0.0;
  std::sort(sizes.begin(), sizes.end());
  double cum = 0.0, weighted = 0.0;
  const double n = static_cast<double>(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double x = static_cast<double>(sizes[i]);
    cum += x;
    weighted += static_cast<double>(i + 1) * x;
  }
  if (cum == 0.0) return 0.0;
  return (2.0 * weighted) / (n * cum) - (n + 1.0) / n;
}

// CSV layout: header "label,f0,f1,...,f{d-1}", one row per sample, features
// printed with 17 significant digits so a write/read cycle is exact. The
// number of classes is recovered as max(label) + 1 unless given.
inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "label";
  for (std::size_t j = 0; j < ds.dim; ++j) out << ",f" << j;
  out << '\n';
  out.precision(17);
  for (const auto& s : ds.samples) {
    out << s.label;
    for (double x : s.features) out << ',' << x;
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Dataset read_dataset_csv(const std::string& path, std::size_t num_classes = 0) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty dataset file: " + path);
  Dataset ds;
  ds.dim = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  detail::require(ds.dim >= 1, "dataset csv: no feature columns");
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    Sample s;
    s.id = ds.samples.size();
    if (!std::getline(row, cell, ',')) throw IoError("dataset csv: malformed row");
    s.label = std::stoul(cell);
    while (std::getline(row, cell, ',')) s.features.push_back(std::stod(cell));
    if (s.features.size() != ds.dim) throw IoError("dataset csv: row has wrong width");
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  ds.num_classes = num_classes ? num_classes : max_label + 1;
  for (const auto& s : ds.samples)
    if (s.label >= ds.num_classes) throw IoError("dataset csv: label out of range");
  return ds;
}

}  // namespace fedsampling
